#include "avol/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace avol {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw ConfigError(what);
}

}  // namespace

Tape::Tape() {
#ifdef NDEBUG
  check_finite_ = false;
#else
  check_finite_ = true;
#endif
  nodes_.reserve(256);
}

TensorRef Tape::push(Node node) {
  if (check_finite_ && node.op != Op::kInput) {
    for (double v : node.value.data) {
      if (!std::isfinite(v)) throw NumericalError("non-finite value produced by tape op");
    }
  }
  nodes_.push_back(std::move(node));
  return TensorRef{std::int32_t(nodes_.size() - 1)};
}

const Matrix& Tape::value(TensorRef t) const {
  require(t.valid() && size_t(t.id) < nodes_.size(), "invalid tensor ref");
  return nodes_[size_t(t.id)].value;
}

const Matrix& Tape::grad(TensorRef t) const {
  require(t.valid() && size_t(t.id) < nodes_.size(), "invalid tensor ref");
  return nodes_[size_t(t.id)].grad;
}

TensorRef Tape::input(Matrix values) {
  Node n;
  n.op = Op::kInput;
  n.value = std::move(values);
  return push(std::move(n));
}

TensorRef Tape::matmul(TensorRef a, TensorRef b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.cols == B.rows, "matmul shape mismatch");
  Node n;
  n.op = Op::kMatmul;
  n.a = a.id;
  n.b = b.id;
  n.value = Matrix(A.rows, B.cols);
  n.value.map().noalias() = A.map() * B.map();
  return push(std::move(n));
}

TensorRef Tape::scatter_sum(TensorRef rows, std::vector<std::int32_t> dst, int out_rows) {
  const Matrix& R = value(rows);
  require(int(dst.size()) == R.rows, "scatter_sum index count mismatch");
  for (std::int32_t d : dst) {
    if (d < 0 || d >= out_rows) throw ConfigError("scatter_sum index out of range");
  }
  Node n;
  n.op = Op::kScatterSum;
  n.a = rows.id;
  n.indices = std::move(dst);
  n.i0 = out_rows;
  n.value = Matrix(out_rows, R.cols);
  const int c = R.cols;
  for (size_t e = 0; e < n.indices.size(); ++e) {
    double* out = n.value.row_ptr(n.indices[e]);
    const double* in = R.row_ptr(int(e));
    for (int k = 0; k < c; ++k) out[k] += in[k];
  }
  return push(std::move(n));
}

TensorRef Tape::gather_rows(TensorRef x, std::vector<std::int32_t> idx) {
  const Matrix& X = value(x);
  for (std::int32_t i : idx) {
    if (i < 0 || i >= X.rows) throw ConfigError("gather_rows index out of range");
  }
  Node n;
  n.op = Op::kGatherRows;
  n.a = x.id;
  n.value = Matrix(int(idx.size()), X.cols);
  const int c = X.cols;
  for (size_t e = 0; e < idx.size(); ++e) {
    std::memcpy(n.value.row_ptr(int(e)), X.row_ptr(idx[e]), sizeof(double) * size_t(c));
  }
  n.indices = std::move(idx);
  return push(std::move(n));
}

TensorRef Tape::add(TensorRef a, TensorRef b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.same_shape(B), "add shape mismatch");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.value = A;
  for (size_t i = 0; i < B.data.size(); ++i) n.value.data[i] += B.data[i];
  return push(std::move(n));
}

TensorRef Tape::sub(TensorRef a, TensorRef b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.same_shape(B), "sub shape mismatch");
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.value = A;
  for (size_t i = 0; i < B.data.size(); ++i) n.value.data[i] -= B.data[i];
  return push(std::move(n));
}

TensorRef Tape::mul(TensorRef a, TensorRef b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.same_shape(B), "mul shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.value = A;
  for (size_t i = 0; i < B.data.size(); ++i) n.value.data[i] *= B.data[i];
  return push(std::move(n));
}

TensorRef Tape::mul_scalar(TensorRef a, double s) {
  Node n;
  n.op = Op::kMulScalar;
  n.a = a.id;
  n.scalar = s;
  n.value = value(a);
  for (double& v : n.value.data) v *= s;
  return push(std::move(n));
}

TensorRef Tape::scale_rows(TensorRef a, TensorRef s) {
  const Matrix& A = value(a);
  const Matrix& S = value(s);
  require(S.cols == 1 && S.rows == A.rows, "scale_rows needs an [n x 1] scale");
  Node n;
  n.op = Op::kScaleRows;
  n.a = a.id;
  n.b = s.id;
  n.value = A;
  for (int r = 0; r < A.rows; ++r) {
    double f = S(r, 0);
    double* row = n.value.row_ptr(r);
    for (int c = 0; c < A.cols; ++c) row[c] *= f;
  }
  return push(std::move(n));
}

TensorRef Tape::add_bias(TensorRef a, TensorRef bias) {
  const Matrix& A = value(a);
  const Matrix& B = value(bias);
  require(B.rows == 1 && B.cols == A.cols, "add_bias needs a [1 x c] bias");
  Node n;
  n.op = Op::kAddBias;
  n.a = a.id;
  n.b = bias.id;
  n.value = A;
  for (int r = 0; r < A.rows; ++r) {
    double* row = n.value.row_ptr(r);
    for (int c = 0; c < A.cols; ++c) row[c] += B.data[size_t(c)];
  }
  return push(std::move(n));
}

TensorRef Tape::relu(TensorRef a) {
  Node n;
  n.op = Op::kRelu;
  n.a = a.id;
  n.value = value(a);
  for (double& v : n.value.data) v = v > 0.0 ? v : 0.0;
  return push(std::move(n));
}

TensorRef Tape::step_mask(TensorRef a) {
  Node n;
  n.op = Op::kStepMask;
  n.a = a.id;
  n.value = value(a);
  for (double& v : n.value.data) v = v > 0.0 ? 1.0 : 0.0;
  return push(std::move(n));
}

TensorRef Tape::concat_cols(const std::vector<TensorRef>& parts) {
  require(!parts.empty(), "concat of zero tensors");
  int rows = value(parts[0]).rows;
  int cols = 0;
  for (TensorRef p : parts) {
    require(value(p).rows == rows, "concat_cols row mismatch");
    cols += value(p).cols;
  }
  Node n;
  n.op = Op::kConcatCols;
  n.value = Matrix(rows, cols);
  for (TensorRef p : parts) n.inputs.push_back(p.id);
  int at = 0;
  for (TensorRef p : parts) {
    const Matrix& P = value(p);
    for (int r = 0; r < rows; ++r)
      std::memcpy(n.value.row_ptr(r) + at, P.row_ptr(r), sizeof(double) * size_t(P.cols));
    at += P.cols;
  }
  return push(std::move(n));
}

TensorRef Tape::concat_rows(const std::vector<TensorRef>& parts) {
  require(!parts.empty(), "concat of zero tensors");
  int cols = value(parts[0]).cols;
  int rows = 0;
  for (TensorRef p : parts) {
    require(value(p).cols == cols, "concat_rows column mismatch");
    rows += value(p).rows;
  }
  Node n;
  n.op = Op::kConcatRows;
  n.value = Matrix(rows, cols);
  for (TensorRef p : parts) n.inputs.push_back(p.id);
  int at = 0;
  for (TensorRef p : parts) {
    const Matrix& P = value(p);
    std::memcpy(n.value.row_ptr(at), P.data.data(), sizeof(double) * P.data.size());
    at += P.rows;
  }
  return push(std::move(n));
}

TensorRef Tape::slice_cols(TensorRef a, int c0, int c1) {
  const Matrix& A = value(a);
  require(0 <= c0 && c0 < c1 && c1 <= A.cols, "slice_cols out of range");
  Node n;
  n.op = Op::kSliceCols;
  n.a = a.id;
  n.i0 = c0;
  n.i1 = c1;
  n.value = Matrix(A.rows, c1 - c0);
  for (int r = 0; r < A.rows; ++r)
    std::memcpy(n.value.row_ptr(r), A.row_ptr(r) + c0, sizeof(double) * size_t(c1 - c0));
  return push(std::move(n));
}

TensorRef Tape::slice_rows(TensorRef a, int r0, int r1) {
  const Matrix& A = value(a);
  require(0 <= r0 && r0 < r1 && r1 <= A.rows, "slice_rows out of range");
  Node n;
  n.op = Op::kSliceRows;
  n.a = a.id;
  n.i0 = r0;
  n.i1 = r1;
  n.value = Matrix(r1 - r0, A.cols);
  std::memcpy(n.value.data.data(), A.row_ptr(r0), sizeof(double) * n.value.data.size());
  return push(std::move(n));
}

TensorRef Tape::square(TensorRef a) {
  Node n;
  n.op = Op::kSquare;
  n.a = a.id;
  n.value = value(a);
  for (double& v : n.value.data) v *= v;
  return push(std::move(n));
}

TensorRef Tape::sqrt(TensorRef a) {
  Node n;
  n.op = Op::kSqrt;
  n.a = a.id;
  n.value = value(a);
  for (double& v : n.value.data) v = std::sqrt(v);
  return push(std::move(n));
}

TensorRef Tape::exp(TensorRef a) {
  Node n;
  n.op = Op::kExp;
  n.a = a.id;
  n.value = value(a);
  for (double& v : n.value.data) v = std::exp(v);
  return push(std::move(n));
}

TensorRef Tape::log(TensorRef a) {
  Node n;
  n.op = Op::kLog;
  n.a = a.id;
  n.value = value(a);
  for (double& v : n.value.data) v = std::log(v);
  return push(std::move(n));
}

TensorRef Tape::transpose(TensorRef a) {
  const Matrix& A = value(a);
  Node n;
  n.op = Op::kTranspose;
  n.a = a.id;
  n.value = Matrix(A.cols, A.rows);
  n.value.map().noalias() = A.map().transpose();
  return push(std::move(n));
}

TensorRef Tape::sum_all(TensorRef a) {
  Node n;
  n.op = Op::kSumAll;
  n.a = a.id;
  n.value = Matrix(1, 1);
  double s = 0.0;
  for (double v : value(a).data) s += v;
  n.value(0, 0) = s;
  return push(std::move(n));
}

TensorRef Tape::mean_all(TensorRef a) {
  const Matrix& A = value(a);
  require(!A.data.empty(), "mean of empty tensor");
  Node n;
  n.op = Op::kMeanAll;
  n.a = a.id;
  n.value = Matrix(1, 1);
  double s = 0.0;
  for (double v : A.data) s += v;
  n.value(0, 0) = s / double(A.data.size());
  return push(std::move(n));
}

void Tape::backward(TensorRef loss) {
  require(loss.valid() && size_t(loss.id) < nodes_.size(), "invalid loss ref");
  require(value(loss).rows == 1 && value(loss).cols == 1, "backward needs a 1x1 loss");
  for (Node& n : nodes_) {
    n.grad = Matrix(n.value.rows, n.value.cols);
  }
  nodes_[size_t(loss.id)].grad(0, 0) = 1.0;
  for (std::int32_t i = loss.id; i >= 0; --i) backward_node(nodes_[size_t(i)]);
}

void Tape::backward_node(Node& n) {
  const Matrix& g = n.grad;
  switch (n.op) {
    case Op::kInput:
      break;
    case Op::kMatmul: {
      Node& A = nodes_[size_t(n.a)];
      Node& B = nodes_[size_t(n.b)];
      A.grad.map().noalias() += g.map() * B.value.map().transpose();
      B.grad.map().noalias() += A.value.map().transpose() * g.map();
      break;
    }
    case Op::kScatterSum: {
      Node& R = nodes_[size_t(n.a)];
      const int c = R.value.cols;
      for (size_t e = 0; e < n.indices.size(); ++e) {
        double* out = R.grad.row_ptr(int(e));
        const double* in = g.row_ptr(n.indices[e]);
        for (int k = 0; k < c; ++k) out[k] += in[k];
      }
      break;
    }
    case Op::kGatherRows: {
      Node& X = nodes_[size_t(n.a)];
      const int c = X.value.cols;
      for (size_t e = 0; e < n.indices.size(); ++e) {
        double* out = X.grad.row_ptr(n.indices[e]);
        const double* in = g.row_ptr(int(e));
        for (int k = 0; k < c; ++k) out[k] += in[k];
      }
      break;
    }
    case Op::kAdd: {
      Node& A = nodes_[size_t(n.a)];
      Node& B = nodes_[size_t(n.b)];
      for (size_t i = 0; i < g.data.size(); ++i) {
        A.grad.data[i] += g.data[i];
        B.grad.data[i] += g.data[i];
      }
      break;
    }
    case Op::kSub: {
      Node& A = nodes_[size_t(n.a)];
      Node& B = nodes_[size_t(n.b)];
      for (size_t i = 0; i < g.data.size(); ++i) {
        A.grad.data[i] += g.data[i];
        B.grad.data[i] -= g.data[i];
      }
      break;
    }
    case Op::kMul: {
      Node& A = nodes_[size_t(n.a)];
      Node& B = nodes_[size_t(n.b)];
      for (size_t i = 0; i < g.data.size(); ++i) {
        A.grad.data[i] += g.data[i] * B.value.data[i];
        B.grad.data[i] += g.data[i] * A.value.data[i];
      }
      break;
    }
    case Op::kMulScalar: {
      Node& A = nodes_[size_t(n.a)];
      for (size_t i = 0; i < g.data.size(); ++i) A.grad.data[i] += g.data[i] * n.scalar;
      break;
    }
    case Op::kScaleRows: {
      Node& A = nodes_[size_t(n.a)];
      Node& S = nodes_[size_t(n.b)];
      for (int r = 0; r < A.value.rows; ++r) {
        double f = S.value(r, 0);
        const double* gr = g.row_ptr(r);
        const double* ar = A.value.row_ptr(r);
        double* agr = A.grad.row_ptr(r);
        double acc = 0.0;
        for (int c = 0; c < A.value.cols; ++c) {
          agr[c] += gr[c] * f;
          acc += gr[c] * ar[c];
        }
        S.grad(r, 0) += acc;
      }
      break;
    }
    case Op::kAddBias: {
      Node& A = nodes_[size_t(n.a)];
      Node& B = nodes_[size_t(n.b)];
      for (int r = 0; r < A.value.rows; ++r) {
        const double* gr = g.row_ptr(r);
        double* agr = A.grad.row_ptr(r);
        for (int c = 0; c < A.value.cols; ++c) {
          agr[c] += gr[c];
          B.grad.data[size_t(c)] += gr[c];
        }
      }
      break;
    }
    case Op::kRelu: {
      Node& A = nodes_[size_t(n.a)];
      for (size_t i = 0; i < g.data.size(); ++i) {
        if (A.value.data[i] > 0.0) A.grad.data[i] += g.data[i];
      }
      break;
    }
    case Op::kStepMask:
      break;
    case Op::kConcatCols: {
      int at = 0;
      for (std::int32_t pid : n.inputs) {
        Node& P = nodes_[size_t(pid)];
        for (int r = 0; r < P.value.rows; ++r) {
          const double* gr = g.row_ptr(r) + at;
          double* pg = P.grad.row_ptr(r);
          for (int c = 0; c < P.value.cols; ++c) pg[c] += gr[c];
        }
        at += P.value.cols;
      }
      break;
    }
    case Op::kConcatRows: {
      int at = 0;
      for (std::int32_t pid : n.inputs) {
        Node& P = nodes_[size_t(pid)];
        for (size_t i = 0; i < P.value.data.size(); ++i)
          P.grad.data[i] += g.data[size_t(at) * size_t(g.cols) + i];
        at += P.value.rows;
      }
      break;
    }
    case Op::kSliceCols: {
      Node& A = nodes_[size_t(n.a)];
      for (int r = 0; r < g.rows; ++r) {
        const double* gr = g.row_ptr(r);
        double* ag = A.grad.row_ptr(r) + n.i0;
        for (int c = 0; c < g.cols; ++c) ag[c] += gr[c];
      }
      break;
    }
    case Op::kSliceRows: {
      Node& A = nodes_[size_t(n.a)];
      double* ag = A.grad.row_ptr(n.i0);
      for (size_t i = 0; i < g.data.size(); ++i) ag[i] += g.data[i];
      break;
    }
    case Op::kSquare: {
      Node& A = nodes_[size_t(n.a)];
      for (size_t i = 0; i < g.data.size(); ++i)
        A.grad.data[i] += 2.0 * A.value.data[i] * g.data[i];
      break;
    }
    case Op::kSqrt: {
      Node& A = nodes_[size_t(n.a)];
      for (size_t i = 0; i < g.data.size(); ++i) {
        double y = n.value.data[i];
        if (y > 0.0) A.grad.data[i] += g.data[i] / (2.0 * y);
      }
      break;
    }
    case Op::kExp: {
      Node& A = nodes_[size_t(n.a)];
      for (size_t i = 0; i < g.data.size(); ++i) A.grad.data[i] += g.data[i] * n.value.data[i];
      break;
    }
    case Op::kLog: {
      Node& A = nodes_[size_t(n.a)];
      for (size_t i = 0; i < g.data.size(); ++i) A.grad.data[i] += g.data[i] / A.value.data[i];
      break;
    }
    case Op::kTranspose: {
      Node& A = nodes_[size_t(n.a)];
      A.grad.map().noalias() += g.map().transpose();
      break;
    }
    case Op::kSumAll: {
      Node& A = nodes_[size_t(n.a)];
      double s = g(0, 0);
      for (double& v : A.grad.data) v += s;
      break;
    }
    case Op::kMeanAll: {
      Node& A = nodes_[size_t(n.a)];
      double s = g(0, 0) / double(A.value.data.size());
      for (double& v : A.grad.data) v += s;
      break;
    }
  }
}

// ---------------------------------------------------------------------------

Parameter& ParamStore::create(const std::string& name, int rows, int cols) {
  if (find(name)) throw ConfigError("duplicate parameter name: " + name);
  Parameter p;
  p.name = name;
  p.value = Matrix(rows, cols);
  p.grad = Matrix(rows, cols);
  p.adam_m = Matrix(rows, cols);
  p.adam_v = Matrix(rows, cols);
  params_.push_back(std::move(p));
  return params_.back();
}

Parameter& ParamStore::create_kaiming(const std::string& name, int rows, int cols, Rng& rng) {
  Parameter& p = create(name, rows, cols);
  double bound = std::sqrt(6.0 / double(rows));
  for (double& v : p.value.data) v = rng.uniform(-bound, bound);
  return p;
}

Parameter* ParamStore::find(const std::string& name) {
  for (Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Parameter* ParamStore::find(const std::string& name) const {
  for (const Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void ParamStore::zero_grads() {
  for (Parameter& p : params_) p.zero_grad();
}

std::int64_t ParamStore::total_values() const {
  std::int64_t n = 0;
  for (const Parameter& p : params_) n += std::int64_t(p.value.size());
  return n;
}

void adam_step(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, std::int64_t t,
               double lr, double beta1, double beta2, double eps) {
  if (!param.same_shape(grad) || !param.same_shape(m) || !param.same_shape(v))
    throw ConfigError("adam_step shape mismatch");
  double bc1 = 1.0 - std::pow(beta1, double(t));
  double bc2 = 1.0 - std::pow(beta2, double(t));
  for (size_t i = 0; i < param.data.size(); ++i) {
    double g = grad.data[i];
    m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * g;
    v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * g * g;
    double mhat = m.data[i] / bc1;
    double vhat = v.data[i] / bc2;
    param.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

void AdamOptimizer::step(ParamStore& store, double lr) {
  ++step_count_;
  for (Parameter& p : store.params()) {
    adam_step(p.value, p.grad, p.adam_m, p.adam_v, step_count_, lr, beta1_, beta2_, eps_);
  }
}

// ---------------------------------------------------------------------------

namespace {
constexpr char kCheckpointMagic[8] = {'A', 'V', 'O', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kCheckpointVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("truncated checkpoint");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}
}  // namespace

void save_checkpoint(std::ostream& out,
                     const std::vector<std::pair<std::string, Matrix>>& tensors) {
  out.write(kCheckpointMagic, 8);
  out.put(char(kCheckpointVersion));
  put_u32(out, std::uint32_t(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put_u32(out, std::uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    put_u32(out, std::uint32_t(m.rows));
    put_u32(out, std::uint32_t(m.cols));
    // Raw little-endian float64 payload.
    out.write(reinterpret_cast<const char*>(m.data.data()),
              std::streamsize(m.data.size() * sizeof(double)));
  }
  if (!out) throw DataError("failed to write checkpoint");
}

std::vector<std::pair<std::string, Matrix>> load_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw DataError("not a checkpoint file (bad magic)");
  int version = in.get();
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version: " + std::to_string(version));
  std::uint32_t count = get_u32(in);
  std::vector<std::pair<std::string, Matrix>> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    int rows = int(get_u32(in));
    int cols = int(get_u32(in));
    Matrix m{rows, cols};
    in.read(reinterpret_cast<char*>(m.data.data()),
            std::streamsize(m.data.size() * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint tensor: " + name);
    tensors.emplace_back(std::move(name), std::move(m));
  }
  return tensors;
}

void save_checkpoint_file(const std::string& path,
                          const std::vector<std::pair<std::string, Matrix>>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  save_checkpoint(out, tensors);
}

std::vector<std::pair<std::string, Matrix>> load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  return load_checkpoint(in);
}

}  // namespace avol
