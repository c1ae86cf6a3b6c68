#include "avol/dual_graph.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>

namespace avol {

int edge_direction(const Vec3& dp) {
  Vec3 a = dp.cwiseAbs();
  int axis = 0;
  if (a.y() > a[axis]) axis = 1;
  if (a.z() > a[axis]) axis = 2;
  for (int k = 0; k < 3; ++k) {
    if (k != axis && a[k] == a[axis]) throw DataError("non-face-adjacent pair");
  }
  return 2 * axis + (dp[axis] > 0 ? 2 : 1);
}

int DualGraph::find_vertex(const NodeKey& key) const {
  std::uint64_t code = pack_key(key);
  auto it = std::lower_bound(vertices.begin(), vertices.end(), code,
                             [](const DualVertex& v, std::uint64_t c) { return pack_key(v.key) < c; });
  if (it == vertices.end() || pack_key(it->key) != code) return -1;
  return int(it - vertices.begin());
}

void DualGraph::rebuild_buckets() {
  std::sort(edges.begin(), edges.end(), [](const DirectedEdge& a, const DirectedEdge& b) {
    if (a.dir != b.dir) return a.dir < b.dir;
    if (a.src != b.src) return a.src < b.src;
    return a.dst < b.dst;
  });
  bucket_begin.fill(0);
  for (const DirectedEdge& e : edges) ++bucket_begin[size_t(e.dir) + 1];
  for (int d = 0; d < 7; ++d) bucket_begin[size_t(d) + 1] += bucket_begin[size_t(d)];
}

DualGraph full_grid_graph(int depth) {
  DualGraph g;
  g.level = depth;
  std::uint32_t n = 1u << depth;
  std::uint64_t cells = std::uint64_t(n) * n * n;
  g.vertices.resize(cells);
  // In a full grid, the Morton code of a cell is its sorted vertex index.
  for (std::uint32_t z = 0; z < n; ++z)
    for (std::uint32_t y = 0; y < n; ++y)
      for (std::uint32_t x = 0; x < n; ++x)
        g.vertices[morton3(x, y, z)] = DualVertex{NodeKey{x, y, z, depth}};

  g.edges.reserve(size_t(6 * cells));
  for (std::uint32_t z = 0; z < n; ++z) {
    for (std::uint32_t y = 0; y < n; ++y) {
      for (std::uint32_t x = 0; x < n; ++x) {
        std::int32_t i = std::int32_t(morton3(x, y, z));
        std::uint32_t coords[3] = {x, y, z};
        for (int axis = 0; axis < 3; ++axis) {
          if (coords[axis] + 1 >= n) continue;
          std::uint32_t nb[3] = {x, y, z};
          nb[axis] += 1;
          std::int32_t j = std::int32_t(morton3(nb[0], nb[1], nb[2]));
          g.edges.push_back({i, j, std::uint8_t(2 * axis + 2)});
          g.edges.push_back({j, i, std::uint8_t(2 * axis + 1)});
        }
      }
    }
  }
  g.rebuild_buckets();
  return g;
}

namespace {

inline NodeKey child_key(const NodeKey& k, int octant) {
  return NodeKey{(k.x << 1) | std::uint32_t(octant & 1), (k.y << 1) | std::uint32_t((octant >> 1) & 1),
                 (k.z << 1) | std::uint32_t((octant >> 2) & 1), k.d + 1};
}

// Octants of a cell touching its face in direction `dir`.
inline std::array<int, 4> face_octants(int dir) {
  int axis = direction_axis(dir);
  int bit = direction_positive(dir) ? 1 : 0;
  std::array<int, 4> out{};
  int n = 0;
  for (int o = 0; o < 8; ++o) {
    if (((o >> axis) & 1) == bit) out[size_t(n++)] = o;
  }
  return out;
}

}  // namespace

DualGraph refine_graph(const DualGraph& g, const std::vector<std::uint8_t>& split) {
  if (split.size() != g.vertices.size())
    throw ConfigError("split label array does not match vertex count");
  for (size_t v = 0; v < split.size(); ++v) {
    if (split[v] && g.vertices[v].key.d != g.level)
      throw DataError("inconsistent split labels");
  }

  DualGraph out;
  out.level = g.level + 1;

  // New vertex list: carried-over vertices plus 8 children per split vertex.
  struct Tagged {
    std::uint64_t code;
    NodeKey key;
    std::int32_t origin;  // carried vertex id, or split id for children
    std::int8_t octant;   // -1 for carried vertices
  };
  std::vector<Tagged> tagged;
  tagged.reserve(g.vertices.size() + 8 * size_t(std::count(split.begin(), split.end(), 1)));
  std::vector<std::int32_t> split_id(g.vertices.size(), -1);
  std::int32_t n_split = 0;
  for (size_t v = 0; v < g.vertices.size(); ++v) {
    if (split[v]) {
      split_id[v] = n_split++;
      for (int o = 0; o < 8; ++o) {
        NodeKey ck = child_key(g.vertices[v].key, o);
        tagged.push_back({pack_key(ck), ck, std::int32_t(v), std::int8_t(o)});
      }
    } else {
      tagged.push_back({pack_key(g.vertices[v].key), g.vertices[v].key, std::int32_t(v), -1});
    }
  }
  std::sort(tagged.begin(), tagged.end(),
            [](const Tagged& a, const Tagged& b) { return a.code < b.code; });

  std::vector<std::int32_t> new_of_old(g.vertices.size(), -1);
  std::vector<std::array<std::int32_t, 8>> child_new;
  child_new.resize(size_t(n_split));
  out.vertices.resize(tagged.size());
  for (size_t n = 0; n < tagged.size(); ++n) {
    out.vertices[n] = DualVertex{tagged[n].key};
    if (tagged[n].octant < 0) {
      new_of_old[size_t(tagged[n].origin)] = std::int32_t(n);
    } else {
      child_new[size_t(split_id[size_t(tagged[n].origin)])][size_t(tagged[n].octant)] =
          std::int32_t(n);
    }
  }

  // Replace crossing edges: an invalid endpoint contributes its 4 children
  // on the shared face; two invalid endpoints pair children across it.
  out.edges.reserve(g.edges.size() * 2);
  for (const DirectedEdge& e : g.edges) {
    int axis = direction_axis(e.dir);
    bool pos = direction_positive(e.dir);
    bool si = split[size_t(e.src)] != 0;
    bool sj = split[size_t(e.dst)] != 0;
    if (!si && !sj) {
      out.edges.push_back({new_of_old[size_t(e.src)], new_of_old[size_t(e.dst)], e.dir});
    } else if (si && !sj) {
      const auto& ci = child_new[size_t(split_id[size_t(e.src)])];
      for (int o : face_octants(e.dir))
        out.edges.push_back({ci[size_t(o)], new_of_old[size_t(e.dst)], e.dir});
    } else if (!si && sj) {
      const auto& cj = child_new[size_t(split_id[size_t(e.dst)])];
      for (int o : face_octants(opposite_direction(e.dir)))
        out.edges.push_back({new_of_old[size_t(e.src)], cj[size_t(o)], e.dir});
    } else {
      const auto& ci = child_new[size_t(split_id[size_t(e.src)])];
      const auto& cj = child_new[size_t(split_id[size_t(e.dst)])];
      int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
      for (int b1 = 0; b1 < 2; ++b1) {
        for (int b2 = 0; b2 < 2; ++b2) {
          int oi = (pos ? 1 << axis : 0) | (b1 << t1) | (b2 << t2);
          int oj = (pos ? 0 : 1 << axis) | (b1 << t1) | (b2 << t2);
          out.edges.push_back({ci[size_t(oi)], cj[size_t(oj)], e.dir});
        }
      }
    }
  }

  // Intra-sibling edges via the octant lookup table: each octant has one
  // face-adjacent sibling per axis.
  for (size_t v = 0; v < g.vertices.size(); ++v) {
    if (!split[v]) continue;
    const auto& cn = child_new[size_t(split_id[v])];
    for (int o = 0; o < 8; ++o) {
      for (int axis = 0; axis < 3; ++axis) {
        int sib = o ^ (1 << axis);
        int dir = 2 * axis + (((o >> axis) & 1) ? 1 : 2);
        out.edges.push_back({cn[size_t(o)], cn[size_t(sib)], std::uint8_t(dir)});
      }
    }
  }

  out.rebuild_buckets();
  return out;
}

std::vector<DualGraph> build_hierarchy(const Octree& octree) {
  std::vector<DualGraph> levels;
  levels.push_back(full_grid_graph(3));
  for (int d = 3; d < octree.max_depth(); ++d) {
    const DualGraph& g = levels.back();
    std::vector<std::uint8_t> octree_labels = octree.split_labels(d);
    std::vector<std::uint8_t> split(g.vertices.size(), 0);
    // Depth-d vertices are the Morton-sorted tail of the level, matching the
    // octree's depth-d segment one to one.
    size_t tail = g.vertices.size() - octree_labels.size();
    for (size_t v = 0; v < g.vertices.size(); ++v) {
      if (g.vertices[v].key.d == d) split[v] = octree_labels[v - tail];
    }
    levels.push_back(refine_graph(g, split));
  }
  return levels;
}

EdgeMode parse_edge_mode(const std::string& name) {
  if (name == "full") return EdgeMode::kFull;
  if (name == "single_scale") return EdgeMode::kSingleScale;
  if (name == "fine_to_coarse") return EdgeMode::kFineToCoarse;
  if (name == "coarse_to_fine") return EdgeMode::kCoarseToFine;
  throw ConfigError("unknown edge mode: " + name);
}

std::string edge_mode_name(EdgeMode mode) {
  switch (mode) {
    case EdgeMode::kFull: return "full";
    case EdgeMode::kSingleScale: return "single_scale";
    case EdgeMode::kFineToCoarse: return "fine_to_coarse";
    case EdgeMode::kCoarseToFine: return "coarse_to_fine";
  }
  return "full";
}

DualGraph restrict_edges(const DualGraph& g, EdgeMode mode) {
  if (mode == EdgeMode::kFull) return g;
  DualGraph out;
  out.level = g.level;
  out.vertices = g.vertices;
  out.edges.reserve(g.edges.size());
  for (const DirectedEdge& e : g.edges) {
    int ds = g.vertices[size_t(e.src)].key.d;
    int dd = g.vertices[size_t(e.dst)].key.d;
    bool keep = ds == dd;
    if (mode == EdgeMode::kFineToCoarse) keep = keep || ds > dd;
    if (mode == EdgeMode::kCoarseToFine) keep = keep || ds < dd;
    if (keep) out.edges.push_back(e);
  }
  out.rebuild_buckets();
  return out;
}

int cross_scale_edge_count(const DualGraph& g) {
  int n = 0;
  for (const DirectedEdge& e : g.edges) {
    if (g.vertices[size_t(e.src)].key.d != g.vertices[size_t(e.dst)].key.d) ++n;
  }
  return n;
}

void write_graph_dump(const DualGraph& g, std::ostream& out) {
  std::vector<std::string> lines;
  lines.reserve(g.edges.size());
  auto fmt_key = [](const NodeKey& k) {
    std::ostringstream s;
    s << k.x << ' ' << k.y << ' ' << k.z << ' ' << k.d;
    return s.str();
  };
  std::vector<const DirectedEdge*> order;
  order.reserve(g.edges.size());
  for (const DirectedEdge& e : g.edges) order.push_back(&e);
  std::sort(order.begin(), order.end(), [&](const DirectedEdge* a, const DirectedEdge* b) {
    std::uint64_t sa = pack_key(g.vertices[size_t(a->src)].key);
    std::uint64_t sb = pack_key(g.vertices[size_t(b->src)].key);
    if (sa != sb) return sa < sb;
    std::uint64_t da = pack_key(g.vertices[size_t(a->dst)].key);
    std::uint64_t db = pack_key(g.vertices[size_t(b->dst)].key);
    if (da != db) return da < db;
    return a->dir < b->dir;
  });
  for (const DirectedEdge* e : order) {
    out << g.level << "; " << fmt_key(g.vertices[size_t(e->src)].key) << "; "
        << fmt_key(g.vertices[size_t(e->dst)].key) << "; " << int(e->dir) << '\n';
  }
}

}  // namespace avol
