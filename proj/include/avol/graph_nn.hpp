#pragma once

#include "avol/dual_graph.hpp"
#include "avol/tape.hpp"

namespace avol {

// Depth range covered by the one-hot part of augmented features.
struct DepthRange {
  int min_depth = 3;
  int max_depth = 3;

  int onehot_len() const { return max_depth - min_depth + 1; }
  int onehot_index(int d) const {
    if (d < min_depth || d > max_depth) throw ConfigError("vertex depth out of range");
    return d - min_depth;
  }
};

// Augmented sender width: C_in plus depth one-hot plus relative offset.
inline int augmented_cols(int c_in, const DepthRange& depths) {
  return c_in + depths.onehot_len() + 3;
}
inline int conv_weight_rows(int c_in, const DepthRange& depths) {
  return 7 * augmented_cols(c_in, depths);
}

// The constant part of an augmented row for a (receiver, sender) pair:
// onehot(d_sender) followed by (o_sender - o_receiver) / r_receiver. The
// self slot uses a zero offset.
void augment_constants(const NodeKey& receiver, const NodeKey& sender, const DepthRange& depths,
                       double* out);

// Precomputed gather/scatter plan of one graph for the bucketed-GEMM
// convolution: per direction, receiver (src) and sender (dst) index arrays
// plus the constant augmentation block. Bucket 0 is the self slot.
struct GraphConvPlan {
  const DualGraph* graph = nullptr;
  DepthRange depths;

  struct Bucket {
    std::vector<std::int32_t> receiver;
    std::vector<std::int32_t> sender;
    Matrix constants;  // [edge count x (onehot_len + 3)]
  };
  std::array<Bucket, 7> buckets;

  int vertex_count() const { return graph->vertex_count(); }
};

GraphConvPlan make_conv_plan(const DualGraph& g, const DepthRange& depths);

// Dual octree graph convolution: per-direction scatter-sum of augmented
// sender rows into M [N x 7*C_aug] (missing directions stay zero), then a
// single GEMM with W [(7*C_aug) x C_out] and a bias add.
TensorRef dual_conv(Tape& tape, const GraphConvPlan& plan, TensorRef features, TensorRef weight,
                    TensorRef bias);

// Independent per-edge formulation of the same operator (plain loops, no
// tape, no GEMM); used by the kernel benchmark and as the second route of
// the formulation-equivalence check.
Matrix dual_conv_reference(const DualGraph& g, const DepthRange& depths, const Matrix& features,
                           const Matrix& weight, const Matrix& bias);

// ---------------------------------------------------------------------------
// Structure transfer between adjacent levels.
//
// A coarse vertex is "merged" when its 8 children exist in the fine graph
// (it was split), and "carried" when the same key appears in both graphs.
struct LevelTransferPlan {
  int coarse_count = 0;
  int fine_count = 0;
  std::vector<std::int32_t> merge_coarse;                     // split coarse rows
  std::array<std::vector<std::int32_t>, 8> merge_children;    // their fine child rows
  std::vector<std::int32_t> carry_coarse;
  std::vector<std::int32_t> carry_fine;
};

LevelTransferPlan make_transfer_plan(const DualGraph& coarse, const DualGraph& fine);

// Merge finest sibling groups (concat of 8 child rows through a shared FC)
// onto their parents; carried vertices pass through `carry_proj` when
// widths change (pass an invalid ref for identity). Throws when there is
// nothing to merge.
TensorRef graph_downsample(Tape& tape, const LevelTransferPlan& plan, TensorRef fine_features,
                           TensorRef merge_weight, TensorRef merge_bias, TensorRef carry_proj);

// Inverse arrangement: split vertices expand through a shared FC into their
// 8 children; carried vertices pass through `carry_proj` when widths change.
TensorRef graph_upsample(Tape& tape, const LevelTransferPlan& plan, TensorRef coarse_features,
                         TensorRef expand_weight, TensorRef expand_bias, TensorRef carry_proj);

// Output-guided skip connection: add encoder features to decoder vertices
// with exactly matching keys; missing keys contribute zero.
TensorRef skip_connect(Tape& tape, const DualGraph& decoder_graph, TensorRef decoder_features,
                       const DualGraph& encoder_graph, TensorRef encoder_features);

// Shared 2-layer MLP producing per-vertex (empty, non-empty) logits.
TensorRef predict_split_logits(Tape& tape, TensorRef features, TensorRef w1, TensorRef b1,
                               TensorRef w2, TensorRef b2);

// Split decisions from logits: a depth == level vertex subdivides iff the
// non-empty logit strictly exceeds the empty logit and level < max_depth.
std::vector<std::uint8_t> split_decisions(const DualGraph& g, const Matrix& logits, int level,
                                          int max_depth);

}  // namespace avol
