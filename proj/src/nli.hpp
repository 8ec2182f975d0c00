#pragma once

#include <memory>
#include <random>
#include <vector>

#include "data.hpp"
#include "encoder.hpp"

namespace dsan {

/// 300-unit ReLU layer (normalized, dropped out) into a 3-way softmax.
struct ClassifierParams {
  Tensor hidden_proj;  // 16 d_e x d_h
  Tensor hidden_bias;
  Tensor out_proj;     // d_h x 3
  Tensor out_bias;
  LayerNormParams hidden_ln;

  static ClassifierParams init(std::size_t feature_dim, std::size_t hidden_dim,
                               std::mt19937_64& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t hidden_dim = 300;  // d_h
};

/// [u ; v ; |u - v| ; u .* v] over two equal-length row vectors.
Tensor relation_features(const Tensor& u, const Tensor& v);

/// Probabilities over the three labels for a batch of feature rows.
Tensor classify(const Tensor& features, const ClassifierParams& p,
                bool train_mode = false, double dropout_p = 0.0,
                std::mt19937_64* rng = nullptr);

/// Siamese NLI classifier: premise and hypothesis run through one shared
/// encoder parameter set; the relation features feed the classifier head.
class NliModel {
 public:
  NliModel(ModelConfig config, Vocabulary vocab, EmbeddingTable embeddings,
           EncoderParams encoder, ClassifierParams classifier);

  static NliModel init(const ModelConfig& config, Vocabulary vocab,
                       EmbeddingTable embeddings, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const EmbeddingTable& embeddings() const { return embeddings_; }
  const EncoderParams& encoder() const { return encoder_; }
  const ClassifierParams& classifier() const { return classifier_; }
  MaskCache& mask_cache() const { return *mask_cache_; }

  std::vector<NamedTensor> named_params() const;
  std::size_t parameter_count() const;

  EncodedSentence encode(std::span<const int> padded_ids,
                         std::span<const std::uint8_t> pad_mask,
                         bool train_mode = false,
                         std::mt19937_64* rng = nullptr,
                         EncodeTrace* trace = nullptr) const;

  /// Encode one tokenized sentence with no padding.
  EncodedSentence encode_tokens(std::span<const int> ids) const;

  /// batch x 3 label probabilities.
  Tensor batch_probabilities(const Batch& batch, bool train_mode = false,
                             std::mt19937_64* rng = nullptr) const;

  Tensor batch_loss(const Batch& batch, bool train_mode = false,
                    std::mt19937_64* rng = nullptr,
                    std::size_t* clamped = nullptr) const;

 private:
  ModelConfig config_;
  Vocabulary vocab_;
  EmbeddingTable embeddings_;
  EncoderParams encoder_;
  ClassifierParams classifier_;
  std::unique_ptr<MaskCache> mask_cache_;
};

int argmax_label(const Tensor& probs, std::size_t row);

}  // namespace dsan
