#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "attention.hpp"
#include "data.hpp"
#include "masks.hpp"
#include "tensor.hpp"

namespace dsan {

struct EncoderConfig {
  std::size_t model_dim = 300;   // d_e, fixed by the embedding file
  std::size_t heads = 5;
  std::size_t ffn_dim = 1200;    // 4 * d_e
  double alpha = 1.5;            // distance mask weight; 0 disables it
  double dropout = 0.1;
  LnPlacement ln_placement = LnPlacement::kProjOutput;

  static EncoderConfig with_model_dim(std::size_t model_dim, std::size_t heads,
                                      double alpha, double dropout);
};

/// Gates projected word embeddings against projected attention output:
/// gate = sigmoid(S' + H' + b), output = gate .* S' + (1 - gate) .* H'.
struct FusionGateParams {
  Tensor embed_proj;  // W applied to raw embeddings
  Tensor attn_proj;   // W applied to the attention result
  Tensor gate_bias;
  LayerNormParams embed_ln;
  LayerNormParams attn_ln;

  static FusionGateParams init(std::size_t dim, std::mt19937_64& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// Two linear maps with a ReLU between, applied per position, wrapped in a
/// residual connection and layer normalization.
struct FFNParams {
  Tensor hidden_proj;  // dim x ffn_dim
  Tensor hidden_bias;
  Tensor out_proj;     // ffn_dim x dim
  Tensor out_bias;
  LayerNormParams residual_ln;

  static FFNParams init(std::size_t dim, std::size_t ffn_dim,
                        std::mt19937_64& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct DirectionParams {
  MultiHeadParams mha;
  FusionGateParams gate;
  FFNParams ffn;

  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct EncoderParams {
  DirectionParams forward_branch;
  DirectionParams backward_branch;
  MultiDimParams pooling;

  static EncoderParams init(const EncoderConfig& cfg, std::mt19937_64& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
  const DirectionParams& branch(Direction d) const {
    return d == Direction::kForward ? forward_branch : backward_branch;
  }
};

struct EncodedSentence {
  Tensor u_fw;             // n x d_e
  Tensor u_bw;             // n x d_e
  Tensor u;                // n x 2d_e, features concatenated
  Tensor sentence_vector;  // 1 x 4d_e: [multi-dim pooled ; max pooled]
};

/// Instrumentation taps captured during an encode pass (evaluation mode).
struct BranchTrace {
  std::vector<Tensor> head_weights;  // h matrices of n x n attention weights
  Tensor gate;                       // n x d_e sigmoid gate values
  Tensor ffn_hidden_pre;             // n x ffn_dim pre-activations
  Tensor output;                     // n x d_e branch result
};

struct EncodeTrace {
  BranchTrace forward_branch;
  BranchTrace backward_branch;
  Tensor pool_weights;                     // n x 2d_e
  std::vector<std::size_t> maxpool_argmax; // 2d_e winning rows
};

Tensor fusion_gate(const Tensor& embeddings, const Tensor& attention_out,
                   const FusionGateParams& p,
                   LnPlacement placement = LnPlacement::kProjOutput,
                   bool train_mode = false, double dropout_p = 0.0,
                   std::mt19937_64* rng = nullptr, Tensor* gate_values = nullptr);

Tensor position_ffn(const Tensor& x, const FFNParams& p,
                    Tensor* hidden_pre = nullptr);

/// Per-dimension maximum over real (non-pad) rows, which must form a prefix.
/// The winning row per dimension is written to *argmax when provided.
Tensor maxpool_real_positions(const Tensor& u,
                              std::span<const std::uint8_t> pad_mask,
                              std::vector<std::size_t>* argmax = nullptr);

/// One directional branch: masked multi-head -> fusion gate -> position FFN.
/// The combined mask decides the direction; parameters are the branch's own.
Tensor encode_branch(const Tensor& embeddings, const Tensor& combined_mask,
                     const DirectionParams& p, const EncoderConfig& cfg,
                     bool train_mode, std::mt19937_64* rng,
                     BranchTrace* trace = nullptr);

Tensor embed_sentence(std::span<const int> ids, const EmbeddingTable& table);

EncodedSentence encode_sentence(std::span<const int> padded_ids,
                                std::span<const std::uint8_t> pad_mask,
                                const EmbeddingTable& table,
                                const EncoderParams& params,
                                const EncoderConfig& cfg, MaskCache& masks,
                                bool train_mode, std::mt19937_64* rng,
                                EncodeTrace* trace = nullptr);

}  // namespace dsan
