// Independent reference implementations used as test oracles. Everything in
// this header is deliberately written against the plain definitions (naive
// recursion, pairwise geometry) rather than the library's algorithms.
#pragma once

#include "avol/dual_graph.hpp"
#include "avol/octree.hpp"

#include <algorithm>
#include <cstdint>
#include <tuple>
#include <vector>

namespace avol::testing {

struct RefNode {
  NodeKey key;
  bool leaf = true;
  bool non_empty = false;
};

// Naive top-down recursive octree builder.
inline void ref_build_rec(const NodeKey& key, const std::vector<std::array<std::uint32_t, 3>>& coords,
                          std::vector<int> pts, int max_depth, std::vector<RefNode>& out) {
  bool non_empty = !pts.empty();
  bool split = key.d < max_depth && (key.d <= 2 || non_empty);
  out.push_back({key, !split, non_empty});
  if (!split) return;
  std::array<std::vector<int>, 8> buckets;
  int shift = max_depth - (key.d + 1);
  for (int p : pts) {
    const auto& c = coords[size_t(p)];
    int oct = int((c[0] >> shift) & 1) | int((c[1] >> shift) & 1) << 1 | int((c[2] >> shift) & 1) << 2;
    buckets[size_t(oct)].push_back(p);
  }
  for (int o = 0; o < 8; ++o) {
    NodeKey ck{(key.x << 1) | std::uint32_t(o & 1), (key.y << 1) | std::uint32_t((o >> 1) & 1),
               (key.z << 1) | std::uint32_t((o >> 2) & 1), key.d + 1};
    ref_build_rec(ck, coords, buckets[size_t(o)], max_depth, out);
  }
}

inline std::vector<RefNode> ref_build_octree(const PointSet& points, int max_depth) {
  std::vector<std::array<std::uint32_t, 3>> coords;
  double n = std::ldexp(1.0, max_depth);
  for (const Vec3& p : points.positions) {
    auto coord = [&](double v) {
      double t = std::floor((v + 0.5) * n);
      if (t < 0) t = 0;
      if (t > n - 1) t = n - 1;
      return std::uint32_t(t);
    };
    coords.push_back({coord(p.x()), coord(p.y()), coord(p.z())});
  }
  std::vector<int> all(points.positions.size());
  for (size_t i = 0; i < all.size(); ++i) all[size_t(i)] = int(i);
  std::vector<RefNode> out;
  ref_build_rec(NodeKey{0, 0, 0, 0}, coords, std::move(all), max_depth, out);
  std::sort(out.begin(), out.end(),
            [](const RefNode& a, const RefNode& b) { return pack_key(a.key) < pack_key(b.key); });
  return out;
}

// Edge as comparable key triple.
using EdgeKeyTuple = std::tuple<std::uint64_t, std::uint64_t, int>;

// Pairwise face-adjacency over a set of leaf cells: two cells are adjacent
// iff they touch along exactly one axis and their faces overlap with
// positive area. A sweep over the x extent skips provably disjoint pairs;
// every surviving pair is tested with the plain geometric predicate.
inline std::vector<EdgeKeyTuple> brute_force_adjacency(const std::vector<NodeKey>& cells,
                                                       int finest_depth, bool use_sweep = true) {
  struct Cell {
    std::int64_t lo[3];
    std::int64_t size;
    std::uint64_t packed;
  };
  std::vector<Cell> cs;
  cs.reserve(cells.size());
  for (const NodeKey& k : cells) {
    std::int64_t scale = std::int64_t(1) << (finest_depth - k.d);
    cs.push_back({{k.x * scale, k.y * scale, k.z * scale}, scale, pack_key(k)});
  }
  std::sort(cs.begin(), cs.end(), [](const Cell& a, const Cell& b) { return a.lo[0] < b.lo[0]; });

  std::vector<EdgeKeyTuple> edges;
  auto test_pair = [&](const Cell& a, const Cell& b) {
    int touch_axis = -1;
    bool a_below = false;
    for (int ax = 0; ax < 3; ++ax) {
      if (a.lo[ax] + a.size == b.lo[ax]) {
        if (touch_axis >= 0) return;  // touching two axes = edge/corner contact
        touch_axis = ax;
        a_below = true;
      } else if (b.lo[ax] + b.size == a.lo[ax]) {
        if (touch_axis >= 0) return;
        touch_axis = ax;
        a_below = false;
      }
    }
    if (touch_axis < 0) return;
    for (int ax = 0; ax < 3; ++ax) {
      if (ax == touch_axis) continue;
      std::int64_t lo = std::max(a.lo[ax], b.lo[ax]);
      std::int64_t hi = std::min(a.lo[ax] + a.size, b.lo[ax] + b.size);
      if (hi <= lo) return;  // no positive-area face overlap
    }
    int dir_ab = 2 * touch_axis + (a_below ? 2 : 1);
    edges.emplace_back(a.packed, b.packed, dir_ab);
    edges.emplace_back(b.packed, a.packed, opposite_direction(dir_ab));
  };

  for (size_t i = 0; i < cs.size(); ++i) {
    for (size_t j = i + 1; j < cs.size(); ++j) {
      if (use_sweep && cs[j].lo[0] > cs[i].lo[0] + cs[i].size) break;
      test_pair(cs[i], cs[j]);
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

// The library graph's edges as comparable key triples.
inline std::vector<EdgeKeyTuple> graph_edge_tuples(const DualGraph& g) {
  std::vector<EdgeKeyTuple> out;
  out.reserve(g.edges.size());
  for (const DirectedEdge& e : g.edges) {
    out.emplace_back(pack_key(g.vertices[size_t(e.src)].key), pack_key(g.vertices[size_t(e.dst)].key),
                     int(e.dir));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::uint64_t> graph_vertex_keys(const DualGraph& g) {
  std::vector<std::uint64_t> out;
  for (const DualVertex& v : g.vertices) out.push_back(pack_key(v.key));
  std::sort(out.begin(), out.end());
  return out;
}

// Random point clouds of assorted character (uniform volume, spherical
// shell, tight Gaussian cluster).
inline PointSet random_point_set(Rng& rng, int count) {
  PointSet ps;
  int kind = int(rng.uniform_index(3));
  for (int i = 0; i < count; ++i) {
    Vec3 p;
    if (kind == 0) {
      p = rng.uniform_in_box();
    } else if (kind == 1) {
      p = rng.unit_vector() * rng.uniform(0.2, 0.45);
    } else {
      p = Vec3(rng.normal(), rng.normal(), rng.normal()) * 0.08;
    }
    p = p.cwiseMax(-0.5).cwiseMin(0.5);
    ps.positions.push_back(p);
    ps.normals.push_back(rng.unit_vector());
  }
  return ps;
}

}  // namespace avol::testing
