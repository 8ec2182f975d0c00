#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "masks.hpp"
#include "tensor.hpp"

namespace dsan {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Where layer normalization sits relative to a linear projection. The paper
/// lane normalizes each projection's output; kProjInput normalizes the input
/// instead so the alternative reading stays testable.
enum class LnPlacement { kProjOutput, kProjInput };

struct LayerNormParams {
  Tensor gain;  // 1 x dim, initialized to ones
  Tensor bias;  // 1 x dim, initialized to zeros

  static LayerNormParams init(std::size_t dim);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

Tensor layer_norm(const Tensor& x, const LayerNormParams& p);

/// Q/K/V projections are fused model_dim x model_dim matrices sliced into
/// `heads` equal column blocks; this is identical to per-head projection
/// matrices. Projections carry no bias. The output projection is bias-free
/// and unnormalized so a fully-masked attention result stays exactly zero.
struct MultiHeadParams {
  Tensor query_proj;
  Tensor key_proj;
  Tensor value_proj;
  Tensor out_proj;
  LayerNormParams query_ln;
  LayerNormParams key_ln;
  LayerNormParams value_ln;
  std::size_t heads = 1;

  static MultiHeadParams init(std::size_t model_dim, std::size_t heads,
                              std::mt19937_64& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// Two stacked 2d_e x 2d_e projections with an ELU in between produce one
/// logit per (token, dimension); softmax runs over tokens per dimension.
struct MultiDimParams {
  Tensor hidden_proj;
  Tensor hidden_bias;
  Tensor logit_proj;
  Tensor logit_bias;
  LayerNormParams hidden_ln;
  LayerNormParams logit_ln;

  static MultiDimParams init(std::size_t dim, std::mt19937_64& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// softmax(Q K^T / sqrt(d_k) + logit_offset) V. Rows whose offsets mask every
/// key produce zero output rows. The attention weight matrix is copied to
/// *weights when provided.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const Tensor& logit_offset,
                            Tensor* weights = nullptr);

/// Self-attention (Q = K = V = x) over `heads` subspaces with the combined
/// directional + distance + padding mask shared across heads.
Tensor masked_multi_head(const Tensor& x, const MultiHeadParams& p,
                         const Tensor& combined_mask,
                         LnPlacement placement = LnPlacement::kProjOutput,
                         std::vector<Tensor>* head_weights = nullptr);

/// Pools an n x dim sequence to a 1 x dim vector with per-dimension attention
/// over tokens; padded rows get exactly zero weight in every dimension.
Tensor multi_dim_source2token(const Tensor& u, const MultiDimParams& p,
                              std::span<const std::uint8_t> pad_mask,
                              LnPlacement placement = LnPlacement::kProjOutput,
                              Tensor* weights = nullptr);

}  // namespace dsan
