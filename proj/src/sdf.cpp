#include "avol/sdf.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace avol {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct SphereSdf final : Sdf, SurfaceSampler {
  Vec3 c;
  double r;
  SphereSdf(const Vec3& c_, double r_) : c(c_), r(r_) {}
  double eval(const Vec3& p) const override { return (p - c).norm() - r; }
  double area() const override { return 4.0 * kPi * r * r; }
  Vec3 sample(Rng& rng, Vec3& normal) const override {
    normal = rng.unit_vector();
    return c + r * normal;
  }
};

struct BoxSdf final : Sdf, SurfaceSampler {
  Vec3 c, h;
  BoxSdf(const Vec3& c_, const Vec3& h_) : c(c_), h(h_) {}
  double eval(const Vec3& p) const override {
    Vec3 q = (p - c).cwiseAbs() - h;
    Vec3 qpos = q.cwiseMax(0.0);
    double outside = qpos.norm();
    double inside = std::min(std::max({q.x(), q.y(), q.z()}), 0.0);
    return outside + inside;
  }
  double area() const override {
    return 8.0 * (h.x() * h.y() + h.y() * h.z() + h.z() * h.x());
  }
  Vec3 sample(Rng& rng, Vec3& normal) const override {
    double faces[3] = {h.y() * h.z(), h.z() * h.x(), h.x() * h.y()};
    double total = faces[0] + faces[1] + faces[2];
    double t = rng.uniform(0.0, total);
    int axis = t < faces[0] ? 0 : (t < faces[0] + faces[1] ? 1 : 2);
    double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
    Vec3 p = c;
    normal = Vec3::Zero();
    normal[axis] = side;
    p[axis] += side * h[axis];
    int u = (axis + 1) % 3, v = (axis + 2) % 3;
    p[u] += rng.uniform(-1.0, 1.0) * h[u];
    p[v] += rng.uniform(-1.0, 1.0) * h[v];
    return p;
  }
};

struct TorusSdf final : Sdf, SurfaceSampler {
  Vec3 c;
  double R, r;
  int axis;
  TorusSdf(const Vec3& c_, double R_, double r_, int axis_) : c(c_), R(R_), r(r_), axis(axis_) {}

  // Map world coords into the canonical frame (symmetry axis = local z).
  Vec3 to_local(const Vec3& p) const {
    Vec3 q = p - c;
    int u = (axis + 1) % 3, v = (axis + 2) % 3;
    return Vec3(q[u], q[v], q[axis]);
  }
  Vec3 to_world_dir(const Vec3& d) const {
    Vec3 out;
    int u = (axis + 1) % 3, v = (axis + 2) % 3;
    out[u] = d.x();
    out[v] = d.y();
    out[axis] = d.z();
    return out;
  }
  double eval(const Vec3& p) const override {
    Vec3 q = to_local(p);
    double ring = std::sqrt(q.x() * q.x() + q.y() * q.y()) - R;
    return std::sqrt(ring * ring + q.z() * q.z()) - r;
  }
  double area() const override { return 4.0 * kPi * kPi * R * r; }
  Vec3 sample(Rng& rng, Vec3& normal) const override {
    // phi (tube angle) has density proportional to R + r*cos(phi).
    double theta = rng.uniform(0.0, 2.0 * kPi);
    double phi;
    for (;;) {
      phi = rng.uniform(0.0, 2.0 * kPi);
      if (rng.uniform(0.0, R + r) <= R + r * std::cos(phi)) break;
    }
    Vec3 ring_dir(std::cos(theta), std::sin(theta), 0.0);
    Vec3 n_local = std::cos(phi) * ring_dir + Vec3(0.0, 0.0, std::sin(phi));
    Vec3 p_local = R * ring_dir + r * n_local;
    normal = to_world_dir(n_local);
    return c + to_world_dir(p_local);
  }
};

struct UnionSdf final : Sdf {
  std::vector<SdfPtr> parts;
  explicit UnionSdf(std::vector<SdfPtr> p) : parts(std::move(p)) {}
  double eval(const Vec3& p) const override {
    double best = parts.front()->eval(p);
    for (size_t i = 1; i < parts.size(); ++i) best = std::min(best, parts[i]->eval(p));
    return best;
  }
};

struct UnionSampler final : SurfaceSampler {
  std::vector<ShapeSpec> parts;
  double total_area = 0.0;
  explicit UnionSampler(std::vector<ShapeSpec> p) : parts(std::move(p)) {
    for (const auto& s : parts) total_area += s.sampler->area();
  }
  double area() const override { return total_area; }
  Vec3 sample(Rng& rng, Vec3& normal) const override {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      double t = rng.uniform(0.0, total_area);
      size_t pick = 0;
      for (; pick + 1 < parts.size(); ++pick) {
        if (t < parts[pick].sampler->area()) break;
        t -= parts[pick].sampler->area();
      }
      Vec3 p = parts[pick].sampler->sample(rng, normal);
      bool interior = false;
      for (size_t i = 0; i < parts.size(); ++i) {
        if (i != pick && parts[i].sdf->eval(p) < -1e-9) {
          interior = true;
          break;
        }
      }
      if (!interior) return p;
    }
    throw DataError("union surface sampling failed; parts may be fully nested");
  }
};

using nlohmann::json;

void require_keys(const json& j, std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError("unknown key in shape spec: " + it.key());
  }
}

Vec3 parse_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + " must be [x,y,z]");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

ShapeSpec parse_shape(const json& j) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError("shape spec needs a \"type\"");
  std::string type = j.at("type").get<std::string>();
  if (type == "sphere") {
    require_keys(j, {"type", "center", "radius"});
    auto s = std::make_shared<SphereSdf>(
        j.contains("center") ? parse_vec3(j.at("center"), "center") : Vec3::Zero(),
        j.at("radius").get<double>());
    return {s, s};
  }
  if (type == "box") {
    require_keys(j, {"type", "center", "half"});
    auto s = std::make_shared<BoxSdf>(
        j.contains("center") ? parse_vec3(j.at("center"), "center") : Vec3::Zero(),
        parse_vec3(j.at("half"), "half"));
    return {s, s};
  }
  if (type == "torus") {
    require_keys(j, {"type", "center", "major", "minor", "axis"});
    int axis = 2;
    if (j.contains("axis")) {
      if (j.at("axis").is_string()) {
        std::string a = j.at("axis").get<std::string>();
        if (a == "x") axis = 0;
        else if (a == "y") axis = 1;
        else if (a == "z") axis = 2;
        else throw ConfigError("torus axis must be x, y or z");
      } else {
        axis = j.at("axis").get<int>();
        if (axis < 0 || axis > 2) throw ConfigError("torus axis must be 0, 1 or 2");
      }
    }
    auto s = std::make_shared<TorusSdf>(
        j.contains("center") ? parse_vec3(j.at("center"), "center") : Vec3::Zero(),
        j.at("major").get<double>(), j.at("minor").get<double>(), axis);
    return {s, s};
  }
  if (type == "union") {
    require_keys(j, {"type", "parts"});
    if (!j.contains("parts") || !j.at("parts").is_array() || j.at("parts").empty())
      throw ConfigError("union needs a non-empty \"parts\" array");
    std::vector<ShapeSpec> parts;
    std::vector<SdfPtr> sdfs;
    for (const auto& pj : j.at("parts")) {
      parts.push_back(parse_shape(pj));
      sdfs.push_back(parts.back().sdf);
    }
    ShapeSpec out;
    out.sdf = std::make_shared<UnionSdf>(std::move(sdfs));
    out.sampler = std::make_shared<UnionSampler>(std::move(parts));
    return out;
  }
  throw ConfigError("unknown shape type: " + type);
}

}  // namespace

ShapeSpec make_sphere(const Vec3& center, double radius) {
  auto s = std::make_shared<SphereSdf>(center, radius);
  return {s, s};
}

ShapeSpec make_box(const Vec3& center, const Vec3& half_extent) {
  auto s = std::make_shared<BoxSdf>(center, half_extent);
  return {s, s};
}

ShapeSpec make_torus(const Vec3& center, double major, double minor, int axis) {
  auto s = std::make_shared<TorusSdf>(center, major, minor, axis);
  return {s, s};
}

ShapeSpec make_union(std::vector<ShapeSpec> parts) {
  if (parts.empty()) throw ConfigError("union of zero shapes");
  std::vector<SdfPtr> sdfs;
  for (const auto& p : parts) sdfs.push_back(p.sdf);
  ShapeSpec out;
  out.sdf = std::make_shared<UnionSdf>(std::move(sdfs));
  out.sampler = std::make_shared<UnionSampler>(std::move(parts));
  return out;
}

PointSet sample_surface(const ShapeSpec& shape, int count, Rng& rng) {
  PointSet out;
  out.positions.reserve(size_t(count));
  out.normals.reserve(size_t(count));
  for (int i = 0; i < count; ++i) {
    Vec3 n;
    Vec3 p = shape.sampler->sample(rng, n);
    out.positions.push_back(p);
    out.normals.push_back(n);
  }
  return out;
}

ShapeSpec parse_shape_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("shape spec is not valid JSON: ") + e.what());
  }
  return parse_shape(j);
}

}  // namespace avol
