#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace dsan {

// Additive logit sentinel standing in for -inf. exp(kMaskValue - max) underflows
// to exactly 0 without producing NaN, which IEEE -inf arithmetic would risk.
inline constexpr double kMaskValue = -1e9;
// Logit entries at or below this are treated as masked by softmax_rows.
inline constexpr double kMaskThreshold = -1e8;
inline constexpr double kLayerNormEps = 1e-6;

struct TensorNode {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major
  std::vector<double> grad;  // empty means all-zero / never touched
  bool requires_grad = false;
};

/// Dense row-major matrix of 64-bit floats. Vectors are 1xN, scalars 1x1.
/// Copying a Tensor copies the handle; the underlying node is shared so a
/// parameter updated by the optimizer is seen by every holder.
class Tensor {
 public:
  Tensor() : node_(std::make_shared<TensorNode>()) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data,
         bool requires_grad = false);

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor constant(std::size_t rows, std::size_t cols, double value);
  static Tensor row(std::vector<double> values, bool requires_grad = false);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->data.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  double at(std::size_t r, std::size_t c) const;
  void set(std::size_t r, std::size_t c, double v);
  double item() const;  // 1x1 only

  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& mutable_data() { return node_->data; }

  /// Gradient accumulated by the last backward pass; empty means zero.
  const std::vector<double>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

/// Records one backward rule per forward operation, in execution order.
/// Constructing a Tape installs it as the thread's active tape; destruction
/// restores the previous one. Replaying the rules in reverse is a valid
/// topological order because operations only consume already-built tensors.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backward_rule);
  std::size_t size() const { return entries_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded rule in reverse,
  /// accumulating into the grad buffer of each requires_grad tensor.
  void backward(const Tensor& loss);

  static Tape* active();

 private:
  std::vector<std::function<void()>> entries_;
  Tape* previous_;
};

/// Temporarily disables recording (evaluation mode, numeric probes).
class NoTape {
 public:
  NoTape();
  ~NoTape();
  NoTape(const NoTape&) = delete;
  NoTape& operator=(const NoTape&) = delete;

 private:
  Tape* previous_;
};

// ---- forward operations, each with an exact backward rule ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// Binary elementwise; rhs may be a 1xN row broadcast against an MxN lhs.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor abs(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor elu(const Tensor& x);  // alpha = 1
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

/// Row softmax with max-subtraction. A row whose entries are all at or below
/// `masked_below` is defined to be all zeros rather than an error.
Tensor softmax_rows(const Tensor& x, double masked_below = kMaskThreshold);

/// Per-row normalization to zero mean / unit variance followed by the
/// elementwise affine gain * xhat + bias. gain and bias are 1 x cols.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = kLayerNormEps);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t first, std::size_t count);

Tensor sum_all(const Tensor& x);        // 1x1
Tensor sum_over_rows(const Tensor& x);  // 1 x cols

/// Per-column maximum over rows [0, row_count); ties go to the lowest row.
/// The winning row per column is written to *argmax when provided.
Tensor max_over_rows(const Tensor& x, std::size_t row_count,
                     std::vector<std::size_t>* argmax = nullptr);

/// Inverted dropout: keeps with probability 1-p and rescales by 1/(1-p).
Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng);

/// Mean negative log-probability of the gold labels. Probabilities below
/// 1e-12 are clamped before the log; the number of clamped entries is
/// reported through *clamped when provided.
Tensor nll_loss(const Tensor& probs, std::span<const int> labels,
                std::size_t* clamped = nullptr);

Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

// ---- gradient verification ----

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t param = 0;       // index into the checked parameter list
  std::size_t component = 0;   // flat index within that parameter
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares the analytic gradient of the scalar computation f against central
/// finite differences (f(p+h) - f(p-h)) / 2h for every component of every
/// parameter. The relative error of a component is |a-n| / max(1, |a|, |n|).
/// f must be deterministic; two identical evaluations are used to verify that
/// and a kLogic error is raised otherwise. step must lie in [1e-6, 1e-4].
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<Tensor>& params, double step = 1e-5);

}  // namespace dsan
