// Scalar-loop reference implementations used only by tests. They recompute
// each operation with plain per-element loops and no shared code with the
// tensor ops they verify.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "attention.hpp"
#include "tensor.hpp"

namespace dsan::oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid to_grid(const Tensor& t) {
  Grid g(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) g[i][j] = t.at(i, j);
  }
  return g;
}

inline Grid matmul(const Grid& a, const Grid& b) {
  Grid out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b[0].size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < b.size(); ++k) s += a[i][k] * b[k][j];
      out[i][j] = s;
    }
  }
  return out;
}

inline std::vector<double> softmax(std::span<const double> logits,
                                   double masked_below) {
  std::vector<double> out(logits.size(), 0.0);
  double sum = 0.0;
  bool any_live = false;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (logits[j] > masked_below) any_live = true;
    out[j] = std::exp(logits[j]);
    sum += out[j];
  }
  if (!any_live) return std::vector<double>(logits.size(), 0.0);
  for (double& v : out) v /= sum;
  return out;
}

inline std::vector<double> layer_norm_row(std::span<const double> x,
                                          std::span<const double> gain,
                                          std::span<const double> bias,
                                          double eps) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] = gain[j] * (x[j] - mean) / std::sqrt(var + eps) + bias[j];
  }
  return out;
}

inline Grid layer_norm(const Grid& x, const Tensor& gain, const Tensor& bias,
                       double eps = kLayerNormEps) {
  Grid out;
  out.reserve(x.size());
  for (const auto& row : x) {
    out.push_back(layer_norm_row(row, gain.data(), bias.data(), eps));
  }
  return out;
}

// softmax(Q K^T / sqrt(d_k) + offset) V, one query row at a time
inline Grid attention(const Tensor& q, const Tensor& k, const Tensor& v,
                      const Tensor& offset) {
  std::size_t n = q.rows(), dk = q.cols(), dv = v.cols(), m = k.rows();
  Grid out(n, std::vector<double>(dv, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> logits(m);
    for (std::size_t j = 0; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < dk; ++d) dot += q.at(i, d) * k.at(j, d);
      logits[j] = dot / std::sqrt(static_cast<double>(dk)) + offset.at(i, j);
    }
    std::vector<double> w = softmax(logits, kMaskThreshold);
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t d = 0; d < dv; ++d) out[i][d] += w[j] * v.at(j, d);
    }
  }
  return out;
}

inline double elu(double v) { return v > 0.0 ? v : std::exp(v) - 1.0; }
inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
inline double relu(double v) { return v > 0.0 ? v : 0.0; }

inline Grid add_row(const Grid& x, const Tensor& bias) {
  Grid out = x;
  for (auto& row : out) {
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias.at(0, j);
  }
  return out;
}

// Eqs. of the multi-dimensional pooling: per-dimension softmax over tokens of
// logit rows l(u_i), then a weighted per-dimension sum over tokens.
inline std::vector<double> multi_dim_pool(const Tensor& u,
                                          const MultiDimParams& p,
                                          std::span<const std::uint8_t> pad) {
  Grid ug = to_grid(u);
  Grid hidden = layer_norm(add_row(matmul(ug, to_grid(p.hidden_proj)),
                                   p.hidden_bias),
                           p.hidden_ln.gain, p.hidden_ln.bias);
  for (auto& row : hidden) {
    for (double& v : row) v = elu(v);
  }
  Grid logits = layer_norm(add_row(matmul(hidden, to_grid(p.logit_proj)),
                                   p.logit_bias),
                           p.logit_ln.gain, p.logit_ln.bias);
  std::size_t n = u.rows(), dim = u.cols();
  std::vector<double> out(dim, 0.0);
  for (std::size_t d = 0; d < dim; ++d) {
    std::vector<double> column(n);
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = pad[i] != 0 ? logits[i][d] : kMaskValue;
    }
    std::vector<double> w = softmax(column, kMaskThreshold);
    for (std::size_t i = 0; i < n; ++i) out[d] += w[i] * ug[i][d];
  }
  return out;
}

}  // namespace dsan::oracle

#include "encoder.hpp"

namespace dsan::oracle {

// gate = sigmoid(S' + H' + b), out = gate .* S' + (1 - gate) .* H', where
// S' and H' are the layer-normalized projections of embeddings / attention.
inline Grid fusion_gate(const Tensor& embeddings, const Tensor& attention_out,
                        const FusionGateParams& p) {
  Grid sp = layer_norm(matmul(to_grid(embeddings), to_grid(p.embed_proj)),
                       p.embed_ln.gain, p.embed_ln.bias);
  Grid hp = layer_norm(matmul(to_grid(attention_out), to_grid(p.attn_proj)),
                       p.attn_ln.gain, p.attn_ln.bias);
  Grid out(sp.size(), std::vector<double>(sp[0].size()));
  for (std::size_t i = 0; i < sp.size(); ++i) {
    for (std::size_t j = 0; j < sp[0].size(); ++j) {
      double gate = sigmoid(sp[i][j] + hp[i][j] + p.gate_bias.at(0, j));
      out[i][j] = gate * sp[i][j] + (1.0 - gate) * hp[i][j];
    }
  }
  return out;
}

// LayerNorm(x + max(0, x W1 + b1) W2 + b2), evaluated one position at a time
inline Grid position_ffn(const Tensor& x, const FFNParams& p) {
  std::size_t n = x.rows(), dim = x.cols(), hidden_dim = p.hidden_bias.cols();
  Grid out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> hidden(hidden_dim, 0.0);
    for (std::size_t k = 0; k < hidden_dim; ++k) {
      double s = p.hidden_bias.at(0, k);
      for (std::size_t d = 0; d < dim; ++d) s += x.at(i, d) * p.hidden_proj.at(d, k);
      hidden[k] = relu(s);
    }
    std::vector<double> residual(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      double s = p.out_bias.at(0, d);
      for (std::size_t k = 0; k < hidden_dim; ++k) {
        s += hidden[k] * p.out_proj.at(k, d);
      }
      residual[d] = x.at(i, d) + s;
    }
    out.push_back(layer_norm_row(residual, p.residual_ln.gain.data(),
                                 p.residual_ln.bias.data(), kLayerNormEps));
  }
  return out;
}

}  // namespace dsan::oracle
