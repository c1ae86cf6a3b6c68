#pragma once

#include "avol/common.hpp"
#include "avol/octree.hpp"

#include <array>
#include <iosfwd>

namespace avol {

// Direction codes: 0 is the self slot, 1 = -x, 2 = +x, 3 = -y, 4 = +y,
// 5 = -z, 6 = +z.
inline int opposite_direction(int dir) { return ((dir - 1) ^ 1) + 1; }
inline int direction_axis(int dir) { return (dir - 1) / 2; }
inline bool direction_positive(int dir) { return (dir & 1) == 0; }

// Classify an axis-dominant offset; throws DataError on a tie.
int edge_direction(const Vec3& dp);

struct DualVertex {
  NodeKey key;
};

struct DirectedEdge {
  std::int32_t src = 0;  // receiver i
  std::int32_t dst = 0;  // sender j
  std::uint8_t dir = 0;  // axis direction from i toward j

  friend bool operator==(const DirectedEdge&, const DirectedEdge&) = default;
};

// Dual octree graph of one hierarchy level: vertices are the leaves of the
// restricted tree T^level in (depth, Morton) order, and directed edges
// connect face-adjacent cells, stored bucketed by direction.
struct DualGraph {
  int level = 0;
  std::vector<DualVertex> vertices;
  std::vector<DirectedEdge> edges;            // sorted by (dir, src, dst)
  std::array<std::int32_t, 8> bucket_begin{};  // dir-d edges in [begin[d], begin[d+1])

  int vertex_count() const { return int(vertices.size()); }
  int edge_count() const { return int(edges.size()); }

  std::pair<std::int32_t, std::int32_t> bucket(int dir) const {
    return {bucket_begin[size_t(dir)], bucket_begin[size_t(dir) + 1]};
  }

  // Binary search on the canonical vertex order.
  int find_vertex(const NodeKey& key) const;

  int max_vertex_depth() const { return vertices.empty() ? 0 : vertices.back().key.d; }

  // Recompute bucket offsets after editing `edges` (sorts them as well).
  void rebuild_buckets();
};

// Dual graph of a full grid (every cell at `depth` is a vertex).
DualGraph full_grid_graph(int depth);

// One progressive refinement step: vertices marked in `split` (aligned with
// g.vertices, only depth == g.level vertices may be set) are replaced by
// their 8 children, crossing edges are re-attached to the children on the
// shared face, and the 24 intra-sibling edges are added per split node.
DualGraph refine_graph(const DualGraph& g, const std::vector<std::uint8_t>& split);

// G^3 .. G^D for an octree (full to depth 3).
std::vector<DualGraph> build_hierarchy(const Octree& octree);

enum class EdgeMode {
  kFull,          // identity
  kSingleScale,   // same-depth endpoints only
  kFineToCoarse,  // same-depth plus receiver-deeper edges (coarse features
                  // delivered to fine nodes)
  kCoarseToFine,  // same-depth plus receiver-shallower edges
};

EdgeMode parse_edge_mode(const std::string& name);
std::string edge_mode_name(EdgeMode mode);

DualGraph restrict_edges(const DualGraph& g, EdgeMode mode);

// Number of edges whose endpoints differ in depth.
int cross_scale_edge_count(const DualGraph& g);

// "level; x y z d; x y z d; dir" lines, sorted, for golden tests.
void write_graph_dump(const DualGraph& g, std::ostream& out);

}  // namespace avol
