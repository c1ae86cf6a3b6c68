#pragma once

#include "avol/common.hpp"
#include "avol/matrix.hpp"

#include <iosfwd>
#include <map>
#include <string>

namespace avol {

// Handle into a Tape.
struct TensorRef {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode differentiation record over the fixed op set used by the
// network. Ops execute eagerly; backward() replays the record in exact
// reverse order. A Tape is single-threaded.
class Tape {
 public:
  Tape();

  // Leaf holding constant or trainable values (gradient is still recorded,
  // callers decide what to do with it).
  TensorRef input(Matrix values);

  TensorRef matmul(TensorRef a, TensorRef b);
  // out[dst[e]] += rows[e]; indices must lie in [0, out_rows).
  TensorRef scatter_sum(TensorRef rows, std::vector<std::int32_t> dst, int out_rows);
  // out[e] = x[idx[e]].
  TensorRef gather_rows(TensorRef x, std::vector<std::int32_t> idx);
  TensorRef add(TensorRef a, TensorRef b);
  TensorRef sub(TensorRef a, TensorRef b);
  TensorRef mul(TensorRef a, TensorRef b);
  TensorRef mul_scalar(TensorRef a, double s);
  // Row scaling: out[r, c] = a[r, c] * s[r, 0].
  TensorRef scale_rows(TensorRef a, TensorRef s);
  // Broadcast row add: out[r, c] = a[r, c] + bias[0, c].
  TensorRef add_bias(TensorRef a, TensorRef bias);
  TensorRef relu(TensorRef a);
  // Forward 1[x > 0]; backward contributes nothing (used to build spatial
  // gradients of relu networks as first-class tape values).
  TensorRef step_mask(TensorRef a);
  TensorRef concat_cols(const std::vector<TensorRef>& parts);
  TensorRef concat_rows(const std::vector<TensorRef>& parts);
  TensorRef slice_cols(TensorRef a, int c0, int c1);
  TensorRef slice_rows(TensorRef a, int r0, int r1);
  TensorRef square(TensorRef a);
  TensorRef sqrt(TensorRef a);
  TensorRef exp(TensorRef a);
  TensorRef log(TensorRef a);
  TensorRef transpose(TensorRef a);
  TensorRef sum_all(TensorRef a);   // 1x1
  TensorRef mean_all(TensorRef a);  // 1x1

  const Matrix& value(TensorRef t) const;
  // Valid after backward().
  const Matrix& grad(TensorRef t) const;

  // Seed a 1x1 loss with 1 and accumulate gradients into every node.
  void backward(TensorRef loss);

  // NaN/Inf check after each op (defaults to on in debug builds).
  void set_check_finite(bool on) { check_finite_ = on; }

  size_t op_count() const { return nodes_.size(); }

 private:
  enum class Op {
    kInput, kMatmul, kScatterSum, kGatherRows, kAdd, kSub, kMul, kMulScalar,
    kScaleRows, kAddBias, kRelu, kStepMask, kConcatCols, kConcatRows,
    kSliceCols, kSliceRows, kSquare, kSqrt, kExp, kLog, kTranspose, kSumAll, kMeanAll,
  };

  struct Node {
    Op op;
    Matrix value;
    Matrix grad;
    std::int32_t a = -1, b = -1;
    std::vector<std::int32_t> inputs;   // concat
    std::vector<std::int32_t> indices;  // scatter/gather
    double scalar = 0.0;
    int i0 = 0, i1 = 0;  // slice bounds / scatter out_rows
  };

  TensorRef push(Node node);
  const Matrix& val(std::int32_t id) const { return nodes_[size_t(id)].value; }
  void backward_node(Node& n);

  std::vector<Node> nodes_;
  bool check_finite_;
};

// ---------------------------------------------------------------------------
// Parameters and optimization

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

// Named parameter tensors in creation order (which fixes update order).
class ParamStore {
 public:
  Parameter& create(const std::string& name, int rows, int cols);
  // Kaiming-uniform fan-in initialization.
  Parameter& create_kaiming(const std::string& name, int rows, int cols, Rng& rng);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  void zero_grads();
  std::int64_t total_values() const;

 private:
  std::vector<Parameter> params_;
};

// One standard Adam update with bias correction; `t` is the 1-based step.
void adam_step(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, std::int64_t t,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

class AdamOptimizer {
 public:
  explicit AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& store, double lr);
  std::int64_t step_count() const { return step_count_; }
  void set_step_count(std::int64_t t) { step_count_ = t; }

 private:
  double beta1_, beta2_, eps_;
  std::int64_t step_count_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoints: magic header, version byte, then named float64 tensors
// (little-endian).
void save_checkpoint(std::ostream& out, const std::vector<std::pair<std::string, Matrix>>& tensors);
std::vector<std::pair<std::string, Matrix>> load_checkpoint(std::istream& in);

void save_checkpoint_file(const std::string& path,
                          const std::vector<std::pair<std::string, Matrix>>& tensors);
std::vector<std::pair<std::string, Matrix>> load_checkpoint_file(const std::string& path);

}  // namespace avol
