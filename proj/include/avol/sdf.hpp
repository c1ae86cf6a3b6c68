#pragma once

#include "avol/common.hpp"

#include <memory>

namespace avol {

// Analytic signed distance fields over the unit box, negative inside.
class Sdf {
 public:
  virtual ~Sdf() = default;
  virtual double eval(const Vec3& p) const = 0;

  // Central finite-difference gradient.
  Vec3 gradient(const Vec3& p, double h) const {
    Vec3 g;
    for (int a = 0; a < 3; ++a) {
      Vec3 lo = p, hi = p;
      lo[a] -= h;
      hi[a] += h;
      g[a] = (eval(hi) - eval(lo)) / (2.0 * h);
    }
    return g;
  }

  bool inside(const Vec3& p) const { return eval(p) < 0.0; }
};

using SdfPtr = std::shared_ptr<const Sdf>;

// Uniform-by-area surface sampling paired with each analytic shape.
struct SurfaceSampler {
  virtual ~SurfaceSampler() = default;
  virtual Vec3 sample(Rng& rng, Vec3& normal) const = 0;
  virtual double area() const = 0;
};

// Analytic shape = sdf + surface sampler.
struct ShapeSpec {
  SdfPtr sdf;
  std::shared_ptr<const SurfaceSampler> sampler;
};

ShapeSpec make_sphere(const Vec3& center, double radius);
ShapeSpec make_box(const Vec3& center, const Vec3& half_extent);
// Torus around an axis-aligned circle: `major` is the ring radius, `minor`
// the tube radius, `axis` in {0,1,2} selects the symmetry axis.
ShapeSpec make_torus(const Vec3& center, double major, double minor, int axis = 2);
// Union surface sampling drops candidates strictly inside any other part.
ShapeSpec make_union(std::vector<ShapeSpec> parts);

PointSet sample_surface(const ShapeSpec& shape, int count, Rng& rng);

// Parse {"type":"sphere","center":[...],"radius":r}, "box", "torus" or
// "union" from JSON text; unknown keys are rejected.
ShapeSpec parse_shape_spec(const std::string& json_text);

}  // namespace avol
