#pragma once

#include "avol/common.hpp"
#include "avol/matrix.hpp"
#include "avol/sdf.hpp"

#include <iosfwd>

namespace avol {

struct OctreeNode {
  NodeKey key;
  std::int32_t parent = -1;
  std::int32_t first_child = -1;  // 8 children, contiguous, octant (Morton) order
  bool non_empty = false;

  bool is_leaf() const { return first_child < 0; }
};

// Adaptive space partition of [-0.5, 0.5]^3, full to depth 3. Nodes are
// stored per depth in ascending Morton order; the structure is immutable
// after construction.
class Octree {
 public:
  Octree(std::vector<OctreeNode> nodes, std::vector<std::int32_t> depth_begin, int max_depth,
         int clamped = 0)
      : nodes_(std::move(nodes)), depth_begin_(std::move(depth_begin)), max_depth_(max_depth),
        clamped_points_(clamped) {}

  int max_depth() const { return max_depth_; }
  const std::vector<OctreeNode>& nodes() const { return nodes_; }
  const OctreeNode& node(int i) const { return nodes_[size_t(i)]; }
  int node_count() const { return int(nodes_.size()); }

  // Index range [begin, end) of the depth-d segment.
  std::pair<int, int> depth_range(int d) const {
    return {depth_begin_[size_t(d)], depth_begin_[size_t(d) + 1]};
  }
  int depth_count(int d) const {
    auto [b, e] = depth_range(d);
    return e - b;
  }

  // Index of the node with this key, or -1.
  int find(const NodeKey& key) const;

  // Split labels over depth-d nodes: 1 iff the node has children.
  std::vector<std::uint8_t> split_labels(int d) const;

  // Leaves of the truncated tree T^k (depth-<k leaves plus all depth-k
  // nodes), in (depth, Morton) order. These are the dual-graph vertices.
  std::vector<std::int32_t> level_leaves(int k) const;
  std::vector<std::int32_t> leaves() const { return level_leaves(max_depth_); }

  // Number of input points clamped into the unit box during construction.
  int clamped_points() const { return clamped_points_; }

 private:
  std::vector<OctreeNode> nodes_;
  std::vector<std::int32_t> depth_begin_;  // size max_depth + 2
  int max_depth_ = 0;
  int clamped_points_ = 0;
};

// Build the octree over a point cloud: full to depth 3, and a deeper node is
// subdivided iff it contains at least one point. Points outside the unit box
// are clamped and counted. Throws DataError on an empty cloud and
// ConfigError when max_depth < 3.
Octree build_octree(const PointSet& points, int max_depth);

// Encoder input features over the finest-level graph vertices (= octree
// leaves, all depths): 4 channels per depth-D non-empty leaf holding the
// renormalized average point normal and the centroid offset from the cell
// center along that normal divided by the cell size; zeros elsewhere.
struct InputFeatures {
  Matrix values;                        // [leaf count x 4]
  std::vector<std::int32_t> degenerate; // leaf rows whose normals cancelled
};
InputFeatures input_features(const Octree& octree, const PointSet& points);

// Query points with target field values and finite-difference gradients
// (step = cell size / 16), `samples_per_leaf` uniform draws per leaf cell.
struct SdfSamples {
  std::vector<Vec3> positions;
  std::vector<double> values;
  std::vector<Vec3> gradients;
};
SdfSamples sample_sdf_targets(const Octree& octree, const Sdf& sdf, int samples_per_leaf,
                              std::uint64_t seed);

// Newline-delimited "x y z d leaf non_empty" dump for golden tests.
void write_octree_dump(const Octree& octree, std::ostream& out);

}  // namespace avol
