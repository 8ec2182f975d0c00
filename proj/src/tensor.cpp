#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace dsan {

namespace {

thread_local Tape* g_active_tape = nullptr;

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorKind::kLogic, std::string(op) + ": incompatible shapes " +
                                     shape_str(a) + " and " + shape_str(b));
}

std::vector<double>& grad_buf(TensorNode& n) {
  if (n.grad.empty()) n.grad.assign(n.data.size(), 0.0);
  return n.grad;
}

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void check_finite(const char* op, const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::kNumeric,
                  std::string(op) + " produced a non-finite value");
    }
  }
}

// rhs is either lhs-shaped or a 1 x cols row vector broadcast over lhs rows.
enum class BroadcastMode { kNone, kRow };

BroadcastMode binary_mode(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return BroadcastMode::kNone;
  if (b.rows() == 1 && b.cols() == a.cols()) return BroadcastMode::kRow;
  shape_error(op, a, b);
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data,
               bool requires_grad)
    : node_(std::make_shared<TensorNode>()) {
  if (rows * cols != data.size()) {
    throw Error(ErrorKind::kLogic,
                "tensor: " + std::to_string(rows) + "x" + std::to_string(cols) +
                    " shape does not match " + std::to_string(data.size()) +
                    " values");
  }
  node_->rows = rows;
  node_->cols = cols;
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return Tensor(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad);
}

Tensor Tensor::constant(std::size_t rows, std::size_t cols, double value) {
  return Tensor(rows, cols, std::vector<double>(rows * cols, value));
}

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  std::size_t n = values.size();
  return Tensor(1, n, std::move(values), requires_grad);
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) {
      throw Error(ErrorKind::kLogic, "tensor: ragged initializer rows");
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(data));
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node_->data[r * node_->cols + c];
}

void Tensor::set(std::size_t r, std::size_t c, double v) {
  node_->data[r * node_->cols + c] = v;
}

double Tensor::item() const {
  if (size() != 1) {
    throw Error(ErrorKind::kLogic, "item: tensor is " + shape_str(*this) + ", not 1x1");
  }
  return node_->data[0];
}

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::function<void()> backward_rule) {
  entries_.push_back(std::move(backward_rule));
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw Error(ErrorKind::kLogic, "backward: loss must be scalar");
  }
  grad_buf(*loss.node()).assign(1, 1.0);
  NoTape guard;  // backward rules must never record
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    (*it)();
  }
}

NoTape::NoTape() : previous_(g_active_tape) { g_active_tape = nullptr; }

NoTape::~NoTape() { g_active_tape = previous_; }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.data();
  const auto& bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double aik = av[i * k + p];
      if (aik == 0.0) continue;
      const double* brow = bv.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  check_finite("matmul", out);
  Tensor result(m, n, std::move(out));
  if (recording({&a, &b})) {
    result.node()->requires_grad = true;
    Tape::active()->record([an = a.node(), bn = b.node(), on = result.node()] {
      if (on->grad.empty()) return;
      std::size_t m = an->rows, k = an->cols, n = bn->cols;
      const auto& g = on->grad;
      if (an->requires_grad) {
        auto& ga = grad_buf(*an);  // ga += g . b^T
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            const double* grow = g.data() + i * n;
            const double* brow = bn->data.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
            ga[i * k + p] += s;
          }
        }
      }
      if (bn->requires_grad) {
        auto& gb = grad_buf(*bn);  // gb += a^T . g
        for (std::size_t p = 0; p < k; ++p) {
          for (std::size_t i = 0; i < m; ++i) {
            double aip = an->data[i * k + p];
            if (aip == 0.0) continue;
            const double* grow = g.data() + i * n;
            double* gbrow = gb.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
          }
        }
      }
    });
  }
  return result;
}

Tensor transpose(const Tensor& x) {
  std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x.data()[i * c + j];
  }
  Tensor result(c, r, std::move(out));
  if (recording({&x})) {
    result.node()->requires_grad = true;
    Tape::active()->record([xn = x.node(), on = result.node()] {
      if (on->grad.empty()) return;
      std::size_t r = xn->rows, c = xn->cols;
      auto& gx = grad_buf(*xn);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += on->grad[j * r + i];
      }
    });
  }
  return result;
}

namespace {

template <typename Fwd>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd,
                 // per-element partials w.r.t. a and b
                 double (*da)(double, double), double (*db)(double, double)) {
  BroadcastMode mode = binary_mode(name, a, b);
  std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double bv = mode == BroadcastMode::kRow ? b.data()[j] : b.data()[i * cols + j];
      out[i * cols + j] = fwd(a.data()[i * cols + j], bv);
    }
  }
  check_finite(name, out);
  Tensor result(rows, cols, std::move(out));
  if (recording({&a, &b})) {
    result.node()->requires_grad = true;
    Tape::active()->record([an = a.node(), bn = b.node(), on = result.node(), mode,
                            da, db] {
      if (on->grad.empty()) return;
      std::size_t rows = an->rows, cols = an->cols;
      const auto& g = on->grad;
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
          std::size_t bi = mode == BroadcastMode::kRow ? j : i * cols + j;
          double av = an->data[i * cols + j];
          double bv = bn->data[bi];
          double gij = g[i * cols + j];
          if (an->requires_grad) grad_buf(*an)[i * cols + j] += gij * da(av, bv);
          if (bn->requires_grad) grad_buf(*bn)[bi] += gij * db(av, bv);
        }
      }
    });
  }
  return result;
}

template <typename Fwd, typename Dx>
Tensor unary_op(const char* name, const Tensor& x, Fwd fwd, Dx dx) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x.data()[i]);
  check_finite(name, out);
  Tensor result(x.rows(), x.cols(), std::move(out));
  if (recording({&x})) {
    result.node()->requires_grad = true;
    Tape::active()->record([xn = x.node(), on = result.node(), dx] {
      if (on->grad.empty()) return;
      auto& gx = grad_buf(*xn);
      for (std::size_t i = 0; i < xn->data.size(); ++i) {
        gx[i] += on->grad[i] * dx(xn->data[i], on->data[i]);
      }
    });
  }
  return result;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      +[](double, double) { return 1.0; }, +[](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      +[](double, double) { return 1.0; }, +[](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      +[](double, double y) { return y; }, +[](double x, double) { return x; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary_op(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor abs(const Tensor& x) {
  return unary_op(
      "abs", x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor elu(const Tensor& x) {
  return unary_op(
      "elu", x, [](double v) { return v > 0.0 ? v : std::expm1(v); },
      // for v <= 0 the output is e^v - 1, so d/dv = e^v = y + 1
      [](double v, double y) { return v > 0.0 ? 1.0 : y + 1.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      "sigmoid", x,
      [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                     : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary_op(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor softmax_rows(const Tensor& x, double masked_below) {
  std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> out(rows * cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xi = x.data().data() + i * cols;
    double mx = -std::numeric_limits<double>::infinity();
    bool any_live = false;
    for (std::size_t j = 0; j < cols; ++j) {
      if (xi[j] > masked_below) {
        any_live = true;
        mx = std::max(mx, xi[j]);
      }
    }
    if (!any_live) continue;  // fully-masked row stays all zeros
    double sum = 0.0;
    double* oi = out.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      oi[j] = std::exp(xi[j] - mx);
      sum += oi[j];
    }
    for (std::size_t j = 0; j < cols; ++j) oi[j] /= sum;
  }
  check_finite("softmax_rows", out);
  Tensor result(rows, cols, std::move(out));
  if (recording({&x})) {
    result.node()->requires_grad = true;
    Tape::active()->record([xn = x.node(), on = result.node()] {
      if (on->grad.empty()) return;
      std::size_t rows = xn->rows, cols = xn->cols;
      auto& gx = grad_buf(*xn);
      for (std::size_t i = 0; i < rows; ++i) {
        const double* y = on->data.data() + i * cols;
        const double* gy = on->grad.data() + i * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += gy[j] * y[j];
        for (std::size_t j = 0; j < cols; ++j) {
          gx[i * cols + j] += y[j] * (gy[j] - dot);
        }
      }
    });
  }
  return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  std::size_t rows = x.rows(), cols = x.cols();
  if (gain.rows() != 1 || gain.cols() != cols) shape_error("layer_norm", x, gain);
  if (bias.rows() != 1 || bias.cols() != cols) shape_error("layer_norm", x, bias);
  if (cols < 2) {
    throw Error(ErrorKind::kLogic, "layer_norm: needs at least 2 columns");
  }
  std::vector<double> out(rows * cols);
  std::vector<double> inv_std(rows);
  std::vector<double> mean(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xi = x.data().data() + i * cols;
    double mu = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mu += xi[j];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= static_cast<double>(cols);
    double is = 1.0 / std::sqrt(var + eps);
    mean[i] = mu;
    inv_std[i] = is;
    for (std::size_t j = 0; j < cols; ++j) {
      out[i * cols + j] = gain.data()[j] * (xi[j] - mu) * is + bias.data()[j];
    }
  }
  check_finite("layer_norm", out);
  Tensor result(rows, cols, std::move(out));
  if (recording({&x, &gain, &bias})) {
    result.node()->requires_grad = true;
    Tape::active()->record([xn = x.node(), gn = gain.node(), bn = bias.node(),
                            on = result.node(), mean, inv_std] {
      if (on->grad.empty()) return;
      std::size_t rows = xn->rows, cols = xn->cols;
      double dcols = static_cast<double>(cols);
      for (std::size_t i = 0; i < rows; ++i) {
        const double* xi = xn->data.data() + i * cols;
        const double* gy = on->grad.data() + i * cols;
        double is = inv_std[i], mu = mean[i];
        // dxhat, and reductions needed for the mean/variance paths
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
          double xhat = (xi[j] - mu) * is;
          double dxhat = gy[j] * gn->data[j];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
        }
        if (xn->requires_grad) {
          auto& gx = grad_buf(*xn);
          for (std::size_t j = 0; j < cols; ++j) {
            double xhat = (xi[j] - mu) * is;
            double dxhat = gy[j] * gn->data[j];
            gx[i * cols + j] +=
                is * (dxhat - sum_dxhat / dcols - xhat * sum_dxhat_xhat / dcols);
          }
        }
        if (gn->requires_grad) {
          auto& gg = grad_buf(*gn);
          for (std::size_t j = 0; j < cols; ++j) {
            gg[j] += gy[j] * (xi[j] - mu) * is;
          }
        }
        if (bn->requires_grad) {
          auto& gb = grad_buf(*bn);
          for (std::size_t j = 0; j < cols; ++j) gb[j] += gy[j];
        }
      }
    });
  }
  return result;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) {
    throw Error(ErrorKind::kLogic, "concat_cols: no parts");
  }
  std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  bool needs_grad = false;
  for (const Tensor& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts[0], p);
    cols += p.cols();
    needs_grad = needs_grad || p.requires_grad();
  }
  std::vector<double> out(rows * cols);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy_n(p.data().data() + i * p.cols(), p.cols(),
                  out.data() + i * cols + offset);
    }
    offset += p.cols();
  }
  Tensor result(rows, cols, std::move(out));
  if (Tape::active() != nullptr && needs_grad) {
    result.node()->requires_grad = true;
    std::vector<std::shared_ptr<TensorNode>> nodes;
    nodes.reserve(parts.size());
    for (const Tensor& p : parts) nodes.push_back(p.node());
    Tape::active()->record([nodes = std::move(nodes), on = result.node()] {
      if (on->grad.empty()) return;
      std::size_t rows = on->rows, cols = on->cols;
      std::size_t offset = 0;
      for (const auto& pn : nodes) {
        if (pn->requires_grad) {
          auto& gp = grad_buf(*pn);
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < pn->cols; ++j) {
              gp[i * pn->cols + j] += on->grad[i * cols + offset + j];
            }
          }
        }
        offset += pn->cols;
      }
    });
  }
  return result;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) {
    throw Error(ErrorKind::kLogic, "concat_rows: no parts");
  }
  std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  bool needs_grad = false;
  for (const Tensor& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", parts[0], p);
    rows += p.rows();
    needs_grad = needs_grad || p.requires_grad();
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const Tensor& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  Tensor result(rows, cols, std::move(out));
  if (Tape::active() != nullptr && needs_grad) {
    result.node()->requires_grad = true;
    std::vector<std::shared_ptr<TensorNode>> nodes;
    nodes.reserve(parts.size());
    for (const Tensor& p : parts) nodes.push_back(p.node());
    Tape::active()->record([nodes = std::move(nodes), on = result.node()] {
      if (on->grad.empty()) return;
      std::size_t start = 0;
      for (const auto& pn : nodes) {
        if (pn->requires_grad) {
          auto& gp = grad_buf(*pn);
          for (std::size_t i = 0; i < pn->data.size(); ++i) {
            gp[i] += on->grad[start + i];
          }
        }
        start += pn->data.size();
      }
    });
  }
  return result;
}

Tensor slice_cols(const Tensor& x, std::size_t first, std::size_t count) {
  if (first + count > x.cols()) {
    throw Error(ErrorKind::kLogic,
                "slice_cols: [" + std::to_string(first) + ", " +
                    std::to_string(first + count) + ") exceeds " + shape_str(x));
  }
  std::size_t rows = x.rows();
  std::vector<double> out(rows * count);
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy_n(x.data().data() + i * x.cols() + first, count,
                out.data() + i * count);
  }
  Tensor result(rows, count, std::move(out));
  if (recording({&x})) {
    result.node()->requires_grad = true;
    Tape::active()->record([xn = x.node(), on = result.node(), first, count] {
      if (on->grad.empty()) return;
      auto& gx = grad_buf(*xn);
      for (std::size_t i = 0; i < xn->rows; ++i) {
        for (std::size_t j = 0; j < count; ++j) {
          gx[i * xn->cols + first + j] += on->grad[i * count + j];
        }
      }
    });
  }
  return result;
}

Tensor sum_all(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor result(1, 1, {total});
  if (recording({&x})) {
    result.node()->requires_grad = true;
    Tape::active()->record([xn = x.node(), on = result.node()] {
      if (on->grad.empty()) return;
      auto& gx = grad_buf(*xn);
      for (double& g : gx) g += on->grad[0];
    });
  }
  return result;
}

Tensor sum_over_rows(const Tensor& x) {
  std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> out(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out[j] += x.data()[i * cols + j];
  }
  Tensor result(1, cols, std::move(out));
  if (recording({&x})) {
    result.node()->requires_grad = true;
    Tape::active()->record([xn = x.node(), on = result.node()] {
      if (on->grad.empty()) return;
      auto& gx = grad_buf(*xn);
      for (std::size_t i = 0; i < xn->rows; ++i) {
        for (std::size_t j = 0; j < xn->cols; ++j) {
          gx[i * xn->cols + j] += on->grad[j];
        }
      }
    });
  }
  return result;
}

Tensor max_over_rows(const Tensor& x, std::size_t row_count,
                     std::vector<std::size_t>* argmax) {
  if (row_count == 0 || row_count > x.rows()) {
    throw Error(ErrorKind::kLogic,
                "max_over_rows: row_count " + std::to_string(row_count) +
                    " out of range for " + shape_str(x));
  }
  std::size_t cols = x.cols();
  std::vector<double> out(cols);
  std::vector<std::size_t> winners(cols, 0);
  for (std::size_t j = 0; j < cols; ++j) {
    double best = x.at(0, j);
    std::size_t best_row = 0;
    for (std::size_t i = 1; i < row_count; ++i) {
      double v = x.at(i, j);
      if (v > best) {  // strict: ties keep the lowest row
        best = v;
        best_row = i;
      }
    }
    out[j] = best;
    winners[j] = best_row;
  }
  if (argmax != nullptr) *argmax = winners;
  Tensor result(1, cols, std::move(out));
  if (recording({&x})) {
    result.node()->requires_grad = true;
    Tape::active()->record([xn = x.node(), on = result.node(),
                            winners = std::move(winners)] {
      if (on->grad.empty()) return;
      auto& gx = grad_buf(*xn);
      for (std::size_t j = 0; j < xn->cols; ++j) {
        gx[winners[j] * xn->cols + j] += on->grad[j];
      }
    });
  }
  return result;
}

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0) {
    throw Error(ErrorKind::kUsage, "dropout: probability must be in [0, 1)");
  }
  if (p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  double inv_keep = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = keep(rng) ? inv_keep : 0.0;
    out[i] = x.data()[i] * mask[i];
  }
  Tensor result(x.rows(), x.cols(), std::move(out));
  if (recording({&x})) {
    result.node()->requires_grad = true;
    Tape::active()->record([xn = x.node(), on = result.node(),
                            mask = std::move(mask)] {
      if (on->grad.empty()) return;
      auto& gx = grad_buf(*xn);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += on->grad[i] * mask[i];
    });
  }
  return result;
}

Tensor nll_loss(const Tensor& probs, std::span<const int> labels,
                std::size_t* clamped) {
  constexpr double kFloor = 1e-12;
  std::size_t batch = probs.rows();
  if (labels.size() != batch) {
    throw Error(ErrorKind::kLogic, "nll_loss: " + std::to_string(labels.size()) +
                                       " labels for " + std::to_string(batch) +
                                       " rows");
  }
  double total = 0.0;
  std::size_t clamp_count = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols()) {
      throw Error(ErrorKind::kLogic, "nll_loss: label out of range");
    }
    double p = probs.at(b, static_cast<std::size_t>(y));
    if (p < kFloor) {
      p = kFloor;
      ++clamp_count;
    }
    total -= std::log(p);
  }
  if (clamped != nullptr) *clamped = clamp_count;
  Tensor result(1, 1, {total / static_cast<double>(batch)});
  if (recording({&probs})) {
    result.node()->requires_grad = true;
    std::vector<int> ys(labels.begin(), labels.end());
    Tape::active()->record([pn = probs.node(), on = result.node(),
                            ys = std::move(ys)] {
      if (on->grad.empty()) return;
      auto& gp = grad_buf(*pn);
      double inv_batch = 1.0 / static_cast<double>(pn->rows);
      for (std::size_t b = 0; b < pn->rows; ++b) {
        double p = pn->data[b * pn->cols + static_cast<std::size_t>(ys[b])];
        if (p < kFloor) continue;  // clamped: flat region, zero gradient
        gp[b * pn->cols + static_cast<std::size_t>(ys[b])] +=
            on->grad[0] * (-inv_batch / p);
      }
    });
  }
  return result;
}

Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> data(rows * cols);
  for (double& v : data) v = dist(rng);
  return Tensor(rows, cols, std::move(data), true);
}

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<Tensor>& params, double step) {
  if (step < 1e-6 || step > 1e-4) {
    throw Error(ErrorKind::kUsage, "grad_check: step must be in [1e-6, 1e-4]");
  }
  auto eval = [&f]() {
    NoTape guard;
    Tensor out = f();
    if (out.size() != 1) {
      throw Error(ErrorKind::kLogic, "grad_check: f must return a scalar");
    }
    return out.item();
  };
  if (eval() != eval()) {
    throw Error(ErrorKind::kLogic,
                "grad_check: f is not deterministic (is dropout disabled?)");
  }

  for (const Tensor& p : params) {
    const_cast<Tensor&>(p).zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = f();
    if (loss.size() != 1) {
      throw Error(ErrorKind::kLogic, "grad_check: f must return a scalar");
    }
    tape.backward(loss);
  }
  analytic.reserve(params.size());
  for (const Tensor& p : params) {
    if (p.grad().empty()) {
      analytic.emplace_back(p.size(), 0.0);
    } else {
      analytic.push_back(p.grad());
    }
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& values = const_cast<Tensor&>(params[pi]).mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      double saved = values[i];
      values[i] = saved + step;
      double up = eval();
      values[i] = saved - step;
      double down = eval();
      values[i] = saved;
      double numeric = (up - down) / (2.0 * step);
      double a = analytic[pi][i];
      double err = std::fabs(a - numeric) /
                   std::max({1.0, std::fabs(a), std::fabs(numeric)});
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        report.param = pi;
        report.component = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace dsan
