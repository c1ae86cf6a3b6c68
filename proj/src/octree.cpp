#include "avol/octree.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace avol {

int Octree::find(const NodeKey& key) const {
  if (key.d < 0 || key.d > max_depth_) return -1;
  auto [b, e] = depth_range(key.d);
  std::uint64_t code = morton3(key);
  auto first = nodes_.begin() + b;
  auto last = nodes_.begin() + e;
  auto it = std::lower_bound(first, last, code, [](const OctreeNode& n, std::uint64_t c) {
    return morton3(n.key) < c;
  });
  if (it == last || morton3(it->key) != code) return -1;
  return int(it - nodes_.begin());
}

std::vector<std::uint8_t> Octree::split_labels(int d) const {
  auto [b, e] = depth_range(d);
  std::vector<std::uint8_t> labels(size_t(e - b), 0);
  for (int i = b; i < e; ++i) labels[size_t(i - b)] = nodes_[size_t(i)].is_leaf() ? 0 : 1;
  return labels;
}

std::vector<std::int32_t> Octree::level_leaves(int k) const {
  std::vector<std::int32_t> out;
  for (int d = 0; d <= k; ++d) {
    auto [b, e] = depth_range(d);
    for (int i = b; i < e; ++i) {
      if (d == k || nodes_[size_t(i)].is_leaf()) out.push_back(i);
    }
  }
  return out;
}

namespace {

// Lattice coordinates of a point at depth d, clamped to the grid.
inline void lattice_coords(const Vec3& p, int d, std::uint32_t& x, std::uint32_t& y,
                           std::uint32_t& z) {
  double n = std::ldexp(1.0, d);  // 2^d
  auto coord = [&](double v) {
    double t = std::floor((v + 0.5) * n);
    if (t < 0) t = 0;
    if (t > n - 1) t = n - 1;
    return std::uint32_t(t);
  };
  x = coord(p.x());
  y = coord(p.y());
  z = coord(p.z());
}

}  // namespace

Octree build_octree(const PointSet& points, int max_depth) {
  if (points.positions.empty()) throw DataError("no input points");
  if (max_depth < 3) throw ConfigError("octree max_depth must be >= 3");

  int clamped = 0;
  std::vector<std::uint64_t> codes;
  codes.reserve(points.positions.size());
  for (const Vec3& p : points.positions) {
    if (p.x() < -0.5 || p.x() > 0.5 || p.y() < -0.5 || p.y() > 0.5 || p.z() < -0.5 ||
        p.z() > 0.5) {
      ++clamped;
    }
    std::uint32_t x, y, z;
    lattice_coords(p, max_depth, x, y, z);
    codes.push_back(morton3(x, y, z));
  }
  std::sort(codes.begin(), codes.end());
  codes.erase(std::unique(codes.begin(), codes.end()), codes.end());

  // A depth-d cell with Morton prefix c is occupied iff some finest code in
  // [c << 3s, (c + 1) << 3s) exists, s = 3 * (max_depth - d).
  auto occupied = [&](std::uint64_t prefix, int d) {
    int s = 3 * (max_depth - d);
    std::uint64_t lo = prefix << s;
    std::uint64_t hi = (prefix + 1) << s;
    auto it = std::lower_bound(codes.begin(), codes.end(), lo);
    return it != codes.end() && *it < hi;
  };

  std::vector<OctreeNode> nodes;
  std::vector<std::int32_t> depth_begin(size_t(max_depth) + 2, 0);

  OctreeNode root;
  root.key = NodeKey{0, 0, 0, 0};
  root.non_empty = true;
  nodes.push_back(root);
  depth_begin[1] = 1;

  for (int d = 0; d < max_depth; ++d) {
    int begin = depth_begin[size_t(d)];
    int end = depth_begin[size_t(d) + 1];
    for (int i = begin; i < end; ++i) {
      bool split = d <= 2 || nodes[size_t(i)].non_empty;
      if (!split) continue;
      nodes[size_t(i)].first_child = std::int32_t(nodes.size());
      std::uint64_t parent_code = morton3(nodes[size_t(i)].key);
      for (std::uint32_t oct = 0; oct < 8; ++oct) {
        OctreeNode child;
        child.key = NodeKey{(nodes[size_t(i)].key.x << 1) | (oct & 1),
                            (nodes[size_t(i)].key.y << 1) | ((oct >> 1) & 1),
                            (nodes[size_t(i)].key.z << 1) | ((oct >> 2) & 1), d + 1};
        child.parent = i;
        child.non_empty = occupied(parent_code * 8 + oct, d + 1);
        nodes.push_back(child);
      }
    }
    depth_begin[size_t(d) + 2] = std::int32_t(nodes.size());
  }

  return Octree(std::move(nodes), std::move(depth_begin), max_depth, clamped);
}

InputFeatures input_features(const Octree& octree, const PointSet& points) {
  if (!points.has_normals()) throw DataError("input features require point normals");

  const int D = octree.max_depth();
  std::vector<std::int32_t> leaves = octree.leaves();
  InputFeatures out;
  out.values = Matrix::zeros(int(leaves.size()), 4);

  // Leaf row of every depth-D node (only non-empty finest leaves get data).
  auto [b, e] = octree.depth_range(D);
  std::vector<std::int32_t> row_of_node(octree.node_count(), -1);
  for (size_t r = 0; r < leaves.size(); ++r) row_of_node[size_t(leaves[r])] = std::int32_t(r);

  struct Accum {
    Vec3 normal = Vec3::Zero();
    Vec3 centroid = Vec3::Zero();
    int count = 0;
  };
  std::vector<Accum> acc(size_t(e - b));
  for (size_t pi = 0; pi < points.positions.size(); ++pi) {
    std::uint32_t x, y, z;
    lattice_coords(points.positions[pi], D, x, y, z);
    int idx = octree.find(NodeKey{x, y, z, D});
    if (idx < 0) continue;  // finest ancestor was never subdivided: impossible for non-empty
    Accum& a = acc[size_t(idx - b)];
    a.normal += points.normals[pi];
    a.centroid += points.positions[pi];
    a.count += 1;
  }

  for (int i = b; i < e; ++i) {
    const Accum& a = acc[size_t(i - b)];
    if (a.count == 0) continue;
    int row = row_of_node[size_t(i)];
    double norm = a.normal.norm();
    if (norm < 1e-8) {
      out.degenerate.push_back(row);
      continue;  // cancelled normals: leave the zero feature, flag the row
    }
    Vec3 n = a.normal / norm;
    Vec3 center;
    double size;
    node_geometry(octree.node(i).key, center, size);
    Vec3 centroid = a.centroid / double(a.count);
    double offset = (centroid - center).dot(n) / size;
    out.values(row, 0) = n.x();
    out.values(row, 1) = n.y();
    out.values(row, 2) = n.z();
    out.values(row, 3) = offset;
  }
  return out;
}

SdfSamples sample_sdf_targets(const Octree& octree, const Sdf& sdf, int samples_per_leaf,
                              std::uint64_t seed) {
  SdfSamples out;
  Rng rng(seed);
  for (std::int32_t idx : octree.leaves()) {
    Vec3 center;
    double size;
    node_geometry(octree.node(idx).key, center, size);
    double h = size / 16.0;
    for (int s = 0; s < samples_per_leaf; ++s) {
      Vec3 p = center + Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                             rng.uniform(-0.5, 0.5)) * size;
      out.positions.push_back(p);
      out.values.push_back(sdf.eval(p));
      out.gradients.push_back(sdf.gradient(p, h));
    }
  }
  return out;
}

void write_octree_dump(const Octree& octree, std::ostream& out) {
  for (const OctreeNode& n : octree.nodes()) {
    out << n.key.x << ' ' << n.key.y << ' ' << n.key.z << ' ' << n.key.d << ' '
        << (n.is_leaf() ? 1 : 0) << ' ' << (n.non_empty ? 1 : 0) << '\n';
  }
}

}  // namespace avol
