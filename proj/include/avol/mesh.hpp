#pragma once

#include "avol/common.hpp"

#include <array>

namespace avol {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::int32_t, 3>> triangles;
  std::vector<Vec3> normals;  // optional, per vertex

  bool empty() const { return triangles.empty(); }

  Vec3 face_normal(int t) const {
    const auto& tri = triangles[size_t(t)];
    Vec3 e1 = vertices[size_t(tri[1])] - vertices[size_t(tri[0])];
    Vec3 e2 = vertices[size_t(tri[2])] - vertices[size_t(tri[0])];
    return e1.cross(e2);  // length = 2 * area
  }

  double face_area(int t) const { return 0.5 * face_normal(t).norm(); }

  double total_area() const {
    double a = 0.0;
    for (size_t t = 0; t < triangles.size(); ++t) a += face_area(int(t));
    return a;
  }
};

// Unit-sphere mesh by icosahedron subdivision; every vertex lies exactly on
// the radius-r sphere around the center.
TriangleMesh make_icosphere(const Vec3& center, double radius, int subdivisions);

}  // namespace avol
