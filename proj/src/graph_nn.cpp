#include "avol/graph_nn.hpp"

#include <algorithm>
#include <cstring>

namespace avol {

void augment_constants(const NodeKey& receiver, const NodeKey& sender, const DepthRange& depths,
                       double* out) {
  int oh = depths.onehot_len();
  std::fill(out, out + oh + 3, 0.0);
  out[depths.onehot_index(sender.d)] = 1.0;
  if (!(receiver == sender)) {
    Vec3 oi, oj;
    double ri, rj;
    node_geometry(receiver, oi, ri);
    node_geometry(sender, oj, rj);
    Vec3 dp = (oj - oi) / ri;
    out[oh + 0] = dp.x();
    out[oh + 1] = dp.y();
    out[oh + 2] = dp.z();
  }
}

GraphConvPlan make_conv_plan(const DualGraph& g, const DepthRange& depths) {
  GraphConvPlan plan;
  plan.graph = &g;
  plan.depths = depths;
  const int cc = depths.onehot_len() + 3;

  // Self slot.
  auto& self = plan.buckets[0];
  int n = g.vertex_count();
  self.receiver.resize(size_t(n));
  self.sender.resize(size_t(n));
  self.constants = Matrix(n, cc);
  for (int v = 0; v < n; ++v) {
    self.receiver[size_t(v)] = v;
    self.sender[size_t(v)] = v;
    augment_constants(g.vertices[size_t(v)].key, g.vertices[size_t(v)].key, depths,
                      self.constants.row_ptr(v));
  }

  for (int dir = 1; dir <= 6; ++dir) {
    auto [b, e] = g.bucket(dir);
    auto& bucket = plan.buckets[size_t(dir)];
    bucket.receiver.reserve(size_t(e - b));
    bucket.sender.reserve(size_t(e - b));
    bucket.constants = Matrix(e - b, cc);
    for (int k = b; k < e; ++k) {
      const DirectedEdge& edge = g.edges[size_t(k)];
      bucket.receiver.push_back(edge.src);
      bucket.sender.push_back(edge.dst);
      augment_constants(g.vertices[size_t(edge.src)].key, g.vertices[size_t(edge.dst)].key, depths,
                        bucket.constants.row_ptr(k - b));
    }
  }
  return plan;
}

TensorRef dual_conv(Tape& tape, const GraphConvPlan& plan, TensorRef features, TensorRef weight,
                    TensorRef bias) {
  const Matrix& f = tape.value(features);
  const int n = plan.vertex_count();
  if (f.rows != n) throw ConfigError("dual_conv: feature rows do not match vertex count");
  const int c_aug = augmented_cols(f.cols, plan.depths);
  if (tape.value(weight).rows != 7 * c_aug)
    throw ConfigError("dual_conv: weight rows do not match 7 * augmented width");

  std::vector<TensorRef> blocks;
  blocks.reserve(7);
  for (int dir = 0; dir < 7; ++dir) {
    const auto& bucket = plan.buckets[size_t(dir)];
    if (bucket.receiver.empty()) {
      blocks.push_back(tape.input(Matrix(n, c_aug)));  // zeros are filled
      continue;
    }
    TensorRef rows = dir == 0 ? features : tape.gather_rows(features, bucket.sender);
    TensorRef aug = tape.concat_cols({rows, tape.input(bucket.constants)});
    blocks.push_back(tape.scatter_sum(aug, bucket.receiver, n));
  }
  TensorRef m = tape.concat_cols(blocks);
  return tape.add_bias(tape.matmul(m, weight), bias);
}

Matrix dual_conv_reference(const DualGraph& g, const DepthRange& depths, const Matrix& features,
                           const Matrix& weight, const Matrix& bias) {
  const int n = g.vertex_count();
  const int c_in = features.cols;
  const int cc = depths.onehot_len() + 3;
  const int c_aug = c_in + cc;
  const int c_out = weight.cols;
  if (features.rows != n) throw ConfigError("dual_conv_reference: feature rows mismatch");
  if (weight.rows != 7 * c_aug) throw ConfigError("dual_conv_reference: weight rows mismatch");

  Matrix out(n, c_out);
  for (int v = 0; v < n; ++v) {
    double* row = out.row_ptr(v);
    for (int c = 0; c < c_out; ++c) row[c] = bias(0, c);
  }

  std::vector<double> aug(size_t(c_aug));
  auto accumulate = [&](int receiver, int sender, int slot) {
    std::memcpy(aug.data(), features.row_ptr(sender), sizeof(double) * size_t(c_in));
    augment_constants(g.vertices[size_t(receiver)].key, g.vertices[size_t(sender)].key, depths,
                      aug.data() + c_in);
    const int w0 = slot * c_aug;
    double* row = out.row_ptr(receiver);
    for (int k = 0; k < c_aug; ++k) {
      double a = aug[size_t(k)];
      if (a == 0.0) continue;
      const double* wrow = weight.row_ptr(w0 + k);
      for (int c = 0; c < c_out; ++c) row[c] += a * wrow[c];
    }
  };

  for (int v = 0; v < n; ++v) accumulate(v, v, 0);
  for (const DirectedEdge& e : g.edges) accumulate(e.src, e.dst, int(e.dir));
  return out;
}

LevelTransferPlan make_transfer_plan(const DualGraph& coarse, const DualGraph& fine) {
  if (fine.level != coarse.level + 1)
    throw ConfigError("transfer plan needs adjacent levels");
  LevelTransferPlan plan;
  plan.coarse_count = coarse.vertex_count();
  plan.fine_count = fine.vertex_count();
  for (int v = 0; v < coarse.vertex_count(); ++v) {
    const NodeKey& key = coarse.vertices[size_t(v)].key;
    int same = fine.find_vertex(key);
    if (same >= 0) {
      plan.carry_coarse.push_back(v);
      plan.carry_fine.push_back(same);
      continue;
    }
    plan.merge_coarse.push_back(v);
    for (int o = 0; o < 8; ++o) {
      NodeKey ck{(key.x << 1) | std::uint32_t(o & 1), (key.y << 1) | std::uint32_t((o >> 1) & 1),
                 (key.z << 1) | std::uint32_t((o >> 2) & 1), key.d + 1};
      int child = fine.find_vertex(ck);
      if (child < 0) throw DataError("incomplete sibling group between levels");
      plan.merge_children[size_t(o)].push_back(child);
    }
  }
  return plan;
}

namespace {

TensorRef maybe_project(Tape& tape, TensorRef rows, TensorRef proj) {
  return proj.valid() ? tape.matmul(rows, proj) : rows;
}

}  // namespace

TensorRef graph_downsample(Tape& tape, const LevelTransferPlan& plan, TensorRef fine_features,
                           TensorRef merge_weight, TensorRef merge_bias, TensorRef carry_proj) {
  if (plan.merge_coarse.empty()) throw DataError("downsample: nothing to merge at this level");
  if (tape.value(fine_features).rows != plan.fine_count)
    throw ConfigError("downsample: feature rows mismatch");

  std::vector<TensorRef> sibling_blocks;
  sibling_blocks.reserve(8);
  for (int o = 0; o < 8; ++o)
    sibling_blocks.push_back(tape.gather_rows(fine_features, plan.merge_children[size_t(o)]));
  TensorRef merged =
      tape.add_bias(tape.matmul(tape.concat_cols(sibling_blocks), merge_weight), merge_bias);

  if (plan.carry_coarse.empty()) {
    return tape.scatter_sum(merged, plan.merge_coarse, plan.coarse_count);
  }
  TensorRef carried =
      maybe_project(tape, tape.gather_rows(fine_features, plan.carry_fine), carry_proj);
  TensorRef rows = tape.concat_rows({merged, carried});
  std::vector<std::int32_t> targets = plan.merge_coarse;
  targets.insert(targets.end(), plan.carry_coarse.begin(), plan.carry_coarse.end());
  return tape.scatter_sum(rows, targets, plan.coarse_count);
}

TensorRef graph_upsample(Tape& tape, const LevelTransferPlan& plan, TensorRef coarse_features,
                         TensorRef expand_weight, TensorRef expand_bias, TensorRef carry_proj) {
  if (tape.value(coarse_features).rows != plan.coarse_count)
    throw ConfigError("upsample: feature rows mismatch");

  std::vector<TensorRef> rows_parts;
  std::vector<std::int32_t> targets;

  if (!plan.merge_coarse.empty()) {
    TensorRef expanded = tape.add_bias(
        tape.matmul(tape.gather_rows(coarse_features, plan.merge_coarse), expand_weight),
        expand_bias);
    int c_out = tape.value(expanded).cols / 8;
    for (int o = 0; o < 8; ++o) {
      rows_parts.push_back(tape.slice_cols(expanded, o * c_out, (o + 1) * c_out));
      targets.insert(targets.end(), plan.merge_children[size_t(o)].begin(),
                     plan.merge_children[size_t(o)].end());
    }
  }
  if (!plan.carry_coarse.empty()) {
    rows_parts.push_back(
        maybe_project(tape, tape.gather_rows(coarse_features, plan.carry_coarse), carry_proj));
    targets.insert(targets.end(), plan.carry_fine.begin(), plan.carry_fine.end());
  }
  return tape.scatter_sum(tape.concat_rows(rows_parts), targets, plan.fine_count);
}

TensorRef skip_connect(Tape& tape, const DualGraph& decoder_graph, TensorRef decoder_features,
                       const DualGraph& encoder_graph, TensorRef encoder_features) {
  if (!encoder_features.valid() || encoder_graph.vertices.empty()) return decoder_features;
  std::vector<std::int32_t> dec_rows, enc_rows;
  for (int v = 0; v < decoder_graph.vertex_count(); ++v) {
    int hit = encoder_graph.find_vertex(decoder_graph.vertices[size_t(v)].key);
    if (hit >= 0) {
      dec_rows.push_back(v);
      enc_rows.push_back(hit);
    }
  }
  if (dec_rows.empty()) return decoder_features;
  TensorRef gathered = tape.gather_rows(encoder_features, enc_rows);
  return tape.add(decoder_features,
                  tape.scatter_sum(gathered, dec_rows, decoder_graph.vertex_count()));
}

TensorRef predict_split_logits(Tape& tape, TensorRef features, TensorRef w1, TensorRef b1,
                               TensorRef w2, TensorRef b2) {
  TensorRef h = tape.relu(tape.add_bias(tape.matmul(features, w1), b1));
  return tape.add_bias(tape.matmul(h, w2), b2);
}

std::vector<std::uint8_t> split_decisions(const DualGraph& g, const Matrix& logits, int level,
                                          int max_depth) {
  if (logits.rows != g.vertex_count() || logits.cols != 2)
    throw ConfigError("split_decisions: logits must be [vertex count x 2]");
  std::vector<std::uint8_t> out(size_t(g.vertex_count()), 0);
  if (level >= max_depth) return out;  // growth beyond max depth is clipped
  for (int v = 0; v < g.vertex_count(); ++v) {
    if (g.vertices[size_t(v)].key.d != level) continue;
    out[size_t(v)] = logits(v, 1) > logits(v, 0) ? 1 : 0;
  }
  return out;
}

}  // namespace avol
