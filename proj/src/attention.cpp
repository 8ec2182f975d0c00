#include "attention.hpp"

#include <cmath>

namespace dsan {

LayerNormParams LayerNormParams::init(std::size_t dim) {
  return LayerNormParams{
      .gain = Tensor(1, dim, std::vector<double>(dim, 1.0), true),
      .bias = Tensor::zeros(1, dim, true),
  };
}

void LayerNormParams::collect(const std::string& prefix,
                              std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p) {
  return layer_norm(x, p.gain, p.bias);
}

MultiHeadParams MultiHeadParams::init(std::size_t model_dim, std::size_t heads,
                                      std::mt19937_64& rng) {
  if (heads == 0 || model_dim % heads != 0) {
    throw Error(ErrorKind::kUsage,
                "multi-head attention: model dim " + std::to_string(model_dim) +
                    " is not divisible by " + std::to_string(heads) + " heads");
  }
  return MultiHeadParams{
      .query_proj = glorot_uniform(model_dim, model_dim, rng),
      .key_proj = glorot_uniform(model_dim, model_dim, rng),
      .value_proj = glorot_uniform(model_dim, model_dim, rng),
      .out_proj = glorot_uniform(model_dim, model_dim, rng),
      .query_ln = LayerNormParams::init(model_dim),
      .key_ln = LayerNormParams::init(model_dim),
      .value_ln = LayerNormParams::init(model_dim),
      .heads = heads,
  };
}

void MultiHeadParams::collect(const std::string& prefix,
                              std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".WQ", query_proj});
  out.push_back({prefix + ".WK", key_proj});
  out.push_back({prefix + ".WV", value_proj});
  out.push_back({prefix + ".WO", out_proj});
  query_ln.collect(prefix + ".ln_q", out);
  key_ln.collect(prefix + ".ln_k", out);
  value_ln.collect(prefix + ".ln_v", out);
}

MultiDimParams MultiDimParams::init(std::size_t dim, std::mt19937_64& rng) {
  return MultiDimParams{
      .hidden_proj = glorot_uniform(dim, dim, rng),
      .hidden_bias = Tensor::zeros(1, dim, true),
      .logit_proj = glorot_uniform(dim, dim, rng),
      .logit_bias = Tensor::zeros(1, dim, true),
      .hidden_ln = LayerNormParams::init(dim),
      .logit_ln = LayerNormParams::init(dim),
  };
}

void MultiDimParams::collect(const std::string& prefix,
                             std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".W1", hidden_proj});
  out.push_back({prefix + ".b1", hidden_bias});
  out.push_back({prefix + ".W2", logit_proj});
  out.push_back({prefix + ".b2", logit_bias});
  hidden_ln.collect(prefix + ".ln1", out);
  logit_ln.collect(prefix + ".ln2", out);
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const Tensor& logit_offset, Tensor* weights) {
  if (q.cols() != k.cols() || k.rows() != v.rows()) {
    throw Error(ErrorKind::kLogic,
                "scaled_dot_attention: Q " + std::to_string(q.rows()) + "x" +
                    std::to_string(q.cols()) + " K " + std::to_string(k.rows()) +
                    "x" + std::to_string(k.cols()) + " V " +
                    std::to_string(v.rows()) + "x" + std::to_string(v.cols()));
  }
  double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor logits = scale(matmul(q, transpose(k)), inv_sqrt_dk);
  Tensor attention = softmax_rows(add(logits, logit_offset));
  if (weights != nullptr) *weights = attention;
  return matmul(attention, v);
}

namespace {

Tensor project(const Tensor& x, const Tensor& weight, const LayerNormParams& ln,
               LnPlacement placement) {
  if (placement == LnPlacement::kProjInput) {
    return matmul(layer_norm(x, ln), weight);
  }
  return layer_norm(matmul(x, weight), ln);
}

}  // namespace

Tensor masked_multi_head(const Tensor& x, const MultiHeadParams& p,
                         const Tensor& combined_mask, LnPlacement placement,
                         std::vector<Tensor>* head_weights) {
  std::size_t dim = x.cols();
  if (p.heads == 0 || dim % p.heads != 0) {
    throw Error(ErrorKind::kUsage,
                "masked_multi_head: dim " + std::to_string(dim) +
                    " is not divisible by " + std::to_string(p.heads) + " heads");
  }
  std::size_t head_dim = dim / p.heads;
  Tensor q = project(x, p.query_proj, p.query_ln, placement);
  Tensor k = project(x, p.key_proj, p.key_ln, placement);
  Tensor v = project(x, p.value_proj, p.value_ln, placement);

  if (head_weights != nullptr) head_weights->clear();
  std::vector<Tensor> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    Tensor qh = slice_cols(q, h * head_dim, head_dim);
    Tensor kh = slice_cols(k, h * head_dim, head_dim);
    Tensor vh = slice_cols(v, h * head_dim, head_dim);
    Tensor weights;
    heads.push_back(scaled_dot_attention(qh, kh, vh, combined_mask, &weights));
    if (head_weights != nullptr) head_weights->push_back(weights);
  }
  return matmul(concat_cols(heads), p.out_proj);
}

Tensor multi_dim_source2token(const Tensor& u, const MultiDimParams& p,
                              std::span<const std::uint8_t> pad_mask,
                              LnPlacement placement, Tensor* weights) {
  std::size_t n = u.rows(), dim = u.cols();
  if (pad_mask.size() != n) {
    throw Error(ErrorKind::kLogic, "multi_dim_source2token: pad mask length " +
                                       std::to_string(pad_mask.size()) +
                                       " for " + std::to_string(n) + " rows");
  }
  Tensor hidden;
  Tensor logits;
  if (placement == LnPlacement::kProjInput) {
    hidden = elu(add(matmul(layer_norm(u, p.hidden_ln), p.hidden_proj),
                     p.hidden_bias));
    logits = add(matmul(layer_norm(hidden, p.logit_ln), p.logit_proj),
                 p.logit_bias);
  } else {
    hidden = elu(layer_norm(add(matmul(u, p.hidden_proj), p.hidden_bias),
                            p.hidden_ln));
    logits = layer_norm(add(matmul(hidden, p.logit_proj), p.logit_bias),
                        p.logit_ln);
  }

  // padded rows are pushed to the sentinel in every dimension
  Tensor pad_offset = Tensor::zeros(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (pad_mask[i] == 0) {
      for (std::size_t j = 0; j < dim; ++j) pad_offset.set(i, j, kMaskValue);
    }
  }
  // softmax over tokens (rows) within each dimension (column)
  Tensor attention =
      transpose(softmax_rows(transpose(add(logits, pad_offset))));
  if (weights != nullptr) *weights = attention;
  return sum_over_rows(mul(attention, u));
}

}  // namespace dsan
