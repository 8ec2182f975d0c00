#include "encoder.hpp"

#include <algorithm>

namespace dsan {

EncoderConfig EncoderConfig::with_model_dim(std::size_t model_dim,
                                            std::size_t heads, double alpha,
                                            double dropout) {
  return EncoderConfig{
      .model_dim = model_dim,
      .heads = heads,
      .ffn_dim = 4 * model_dim,
      .alpha = alpha,
      .dropout = dropout,
  };
}

FusionGateParams FusionGateParams::init(std::size_t dim, std::mt19937_64& rng) {
  return FusionGateParams{
      .embed_proj = glorot_uniform(dim, dim, rng),
      .attn_proj = glorot_uniform(dim, dim, rng),
      .gate_bias = Tensor::zeros(1, dim, true),
      .embed_ln = LayerNormParams::init(dim),
      .attn_ln = LayerNormParams::init(dim),
  };
}

void FusionGateParams::collect(const std::string& prefix,
                               std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".WS", embed_proj});
  out.push_back({prefix + ".WH", attn_proj});
  out.push_back({prefix + ".bF", gate_bias});
  embed_ln.collect(prefix + ".ln_s", out);
  attn_ln.collect(prefix + ".ln_h", out);
}

FFNParams FFNParams::init(std::size_t dim, std::size_t ffn_dim,
                          std::mt19937_64& rng) {
  return FFNParams{
      .hidden_proj = glorot_uniform(dim, ffn_dim, rng),
      .hidden_bias = Tensor::zeros(1, ffn_dim, true),
      .out_proj = glorot_uniform(ffn_dim, dim, rng),
      .out_bias = Tensor::zeros(1, dim, true),
      .residual_ln = LayerNormParams::init(dim),
  };
}

void FFNParams::collect(const std::string& prefix,
                        std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".W1", hidden_proj});
  out.push_back({prefix + ".b1", hidden_bias});
  out.push_back({prefix + ".W2", out_proj});
  out.push_back({prefix + ".b2", out_bias});
  residual_ln.collect(prefix + ".ln", out);
}

void DirectionParams::collect(const std::string& prefix,
                              std::vector<NamedTensor>& out) const {
  mha.collect(prefix + ".mha", out);
  gate.collect(prefix + ".gate", out);
  ffn.collect(prefix + ".ffn", out);
}

EncoderParams EncoderParams::init(const EncoderConfig& cfg,
                                  std::mt19937_64& rng) {
  auto branch = [&] {
    return DirectionParams{
        .mha = MultiHeadParams::init(cfg.model_dim, cfg.heads, rng),
        .gate = FusionGateParams::init(cfg.model_dim, rng),
        .ffn = FFNParams::init(cfg.model_dim, cfg.ffn_dim, rng),
    };
  };
  return EncoderParams{
      .forward_branch = branch(),
      .backward_branch = branch(),
      .pooling = MultiDimParams::init(2 * cfg.model_dim, rng),
  };
}

void EncoderParams::collect(const std::string& prefix,
                            std::vector<NamedTensor>& out) const {
  forward_branch.collect(prefix + ".fw", out);
  backward_branch.collect(prefix + ".bw", out);
  pooling.collect(prefix + ".pool", out);
}

Tensor fusion_gate(const Tensor& embeddings, const Tensor& attention_out,
                   const FusionGateParams& p, LnPlacement placement,
                   bool train_mode, double dropout_p, std::mt19937_64* rng,
                   Tensor* gate_values) {
  if (embeddings.rows() != attention_out.rows() ||
      embeddings.cols() != attention_out.cols()) {
    throw Error(ErrorKind::kLogic,
                "fusion_gate: embedding rows " + std::to_string(embeddings.rows()) +
                    "x" + std::to_string(embeddings.cols()) +
                    " vs attention " + std::to_string(attention_out.rows()) + "x" +
                    std::to_string(attention_out.cols()));
  }
  auto project = [&](const Tensor& x, const Tensor& w, const LayerNormParams& ln) {
    return placement == LnPlacement::kProjInput ? matmul(layer_norm(x, ln), w)
                                                : layer_norm(matmul(x, w), ln);
  };
  Tensor embed_part = project(embeddings, p.embed_proj, p.embed_ln);
  Tensor attn_part = project(attention_out, p.attn_proj, p.attn_ln);
  Tensor pre = add(add(embed_part, attn_part), p.gate_bias);
  if (train_mode && dropout_p > 0.0) {
    if (rng == nullptr) {
      throw Error(ErrorKind::kLogic, "fusion_gate: dropout needs an rng");
    }
    pre = dropout(pre, dropout_p, *rng);
  }
  Tensor gate = sigmoid(pre);
  if (gate_values != nullptr) *gate_values = gate;
  Tensor one_minus = sub(Tensor::constant(gate.rows(), gate.cols(), 1.0), gate);
  return add(mul(gate, embed_part), mul(one_minus, attn_part));
}

Tensor position_ffn(const Tensor& x, const FFNParams& p, Tensor* hidden_pre) {
  Tensor pre = add(matmul(x, p.hidden_proj), p.hidden_bias);
  if (hidden_pre != nullptr) *hidden_pre = pre;
  Tensor ffn_out = add(matmul(relu(pre), p.out_proj), p.out_bias);
  return layer_norm(add(x, ffn_out), p.residual_ln);
}

Tensor maxpool_real_positions(const Tensor& u,
                              std::span<const std::uint8_t> pad_mask,
                              std::vector<std::size_t>* argmax) {
  if (pad_mask.size() != u.rows()) {
    throw Error(ErrorKind::kLogic, "maxpool: pad mask length mismatch");
  }
  std::size_t real = 0;
  while (real < pad_mask.size() && pad_mask[real] != 0) ++real;
  for (std::size_t i = real; i < pad_mask.size(); ++i) {
    if (pad_mask[i] != 0) {
      throw Error(ErrorKind::kLogic, "maxpool: real positions must be a prefix");
    }
  }
  if (real == 0) {
    throw Error(ErrorKind::kLogic, "maxpool: all positions are padding");
  }
  return max_over_rows(u, real, argmax);
}

Tensor embed_sentence(std::span<const int> ids, const EmbeddingTable& table) {
  Tensor out = Tensor::zeros(ids.size(), table.dim);
  auto& data = out.mutable_data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto row = table.row(ids[i]);
    std::copy(row.begin(), row.end(), data.begin() + i * table.dim);
  }
  return out;
}

Tensor encode_branch(const Tensor& embeddings, const Tensor& combined_mask,
                     const DirectionParams& p, const EncoderConfig& cfg,
                     bool train_mode, std::mt19937_64* rng, BranchTrace* trace) {
  std::vector<Tensor>* weight_sink =
      trace != nullptr ? &trace->head_weights : nullptr;
  Tensor attn = masked_multi_head(embeddings, p.mha, combined_mask,
                                  cfg.ln_placement, weight_sink);
  if (train_mode && cfg.dropout > 0.0) {
    if (rng == nullptr) {
      throw Error(ErrorKind::kLogic, "encode_branch: dropout needs an rng");
    }
    attn = dropout(attn, cfg.dropout, *rng);
  }
  Tensor* gate_sink = trace != nullptr ? &trace->gate : nullptr;
  Tensor gated = fusion_gate(embeddings, attn, p.gate, cfg.ln_placement,
                             train_mode, cfg.dropout, rng, gate_sink);
  Tensor* hidden_sink = trace != nullptr ? &trace->ffn_hidden_pre : nullptr;
  Tensor out = position_ffn(gated, p.ffn, hidden_sink);
  if (trace != nullptr) trace->output = out;
  return out;
}

EncodedSentence encode_sentence(std::span<const int> padded_ids,
                                std::span<const std::uint8_t> pad_mask,
                                const EmbeddingTable& table,
                                const EncoderParams& params,
                                const EncoderConfig& cfg, MaskCache& masks,
                                bool train_mode, std::mt19937_64* rng,
                                EncodeTrace* trace) {
  std::size_t n = padded_ids.size();
  if (pad_mask.size() != n || n == 0) {
    throw Error(ErrorKind::kLogic, "encode_sentence: bad pad mask");
  }
  Tensor embeddings = embed_sentence(padded_ids, table);
  const MaskSet& set = masks.get(n);

  EncodedSentence out;
  Tensor fw_mask = combine(set, Direction::kForward, cfg.alpha, pad_mask);
  Tensor bw_mask = combine(set, Direction::kBackward, cfg.alpha, pad_mask);
  out.u_fw = encode_branch(embeddings, fw_mask, params.forward_branch, cfg,
                           train_mode, rng,
                           trace != nullptr ? &trace->forward_branch : nullptr);
  out.u_bw = encode_branch(embeddings, bw_mask, params.backward_branch, cfg,
                           train_mode, rng,
                           trace != nullptr ? &trace->backward_branch : nullptr);
  std::vector<Tensor> parts{out.u_fw, out.u_bw};
  out.u = concat_cols(parts);

  Tensor* pool_sink = trace != nullptr ? &trace->pool_weights : nullptr;
  Tensor pooled = multi_dim_source2token(out.u, params.pooling, pad_mask,
                                         cfg.ln_placement, pool_sink);
  std::vector<std::size_t>* argmax_sink =
      trace != nullptr ? &trace->maxpool_argmax : nullptr;
  Tensor maxed = maxpool_real_positions(out.u, pad_mask, argmax_sink);
  std::vector<Tensor> vec_parts{pooled, maxed};
  out.sentence_vector = concat_cols(vec_parts);
  return out;
}

}  // namespace dsan
