#include "nli.hpp"

namespace dsan {

ClassifierParams ClassifierParams::init(std::size_t feature_dim,
                                        std::size_t hidden_dim,
                                        std::mt19937_64& rng) {
  return ClassifierParams{
      .hidden_proj = glorot_uniform(feature_dim, hidden_dim, rng),
      .hidden_bias = Tensor::zeros(1, hidden_dim, true),
      .out_proj = glorot_uniform(hidden_dim, kLabelCount, rng),
      .out_bias = Tensor::zeros(1, kLabelCount, true),
      .hidden_ln = LayerNormParams::init(hidden_dim),
  };
}

void ClassifierParams::collect(const std::string& prefix,
                               std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".Wr", hidden_proj});
  out.push_back({prefix + ".br", hidden_bias});
  out.push_back({prefix + ".Wc", out_proj});
  out.push_back({prefix + ".bc", out_bias});
  hidden_ln.collect(prefix + ".ln", out);
}

Tensor relation_features(const Tensor& u, const Tensor& v) {
  if (u.rows() != v.rows() || u.cols() != v.cols()) {
    throw Error(ErrorKind::kLogic,
                "relation_features: lengths " + std::to_string(u.cols()) +
                    " and " + std::to_string(v.cols()) + " differ");
  }
  std::vector<Tensor> parts{u, v, abs(sub(u, v)), mul(u, v)};
  return concat_cols(parts);
}

Tensor classify(const Tensor& features, const ClassifierParams& p,
                bool train_mode, double dropout_p, std::mt19937_64* rng) {
  Tensor hidden =
      relu(layer_norm(add(matmul(features, p.hidden_proj), p.hidden_bias),
                      p.hidden_ln));
  if (train_mode && dropout_p > 0.0) {
    if (rng == nullptr) {
      throw Error(ErrorKind::kLogic, "classify: dropout needs an rng");
    }
    hidden = dropout(hidden, dropout_p, *rng);
  }
  return softmax_rows(add(matmul(hidden, p.out_proj), p.out_bias));
}

NliModel::NliModel(ModelConfig config, Vocabulary vocab,
                   EmbeddingTable embeddings, EncoderParams encoder,
                   ClassifierParams classifier)
    : config_(config),
      vocab_(std::move(vocab)),
      embeddings_(std::move(embeddings)),
      encoder_(std::move(encoder)),
      classifier_(std::move(classifier)),
      mask_cache_(std::make_unique<MaskCache>()) {
  if (embeddings_.dim != config_.encoder.model_dim) {
    throw Error(ErrorKind::kUsage,
                "model dim " + std::to_string(config_.encoder.model_dim) +
                    " does not match embedding dim " +
                    std::to_string(embeddings_.dim));
  }
}

NliModel NliModel::init(const ModelConfig& config, Vocabulary vocab,
                        EmbeddingTable embeddings, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  EncoderParams encoder = EncoderParams::init(config.encoder, rng);
  ClassifierParams classifier = ClassifierParams::init(
      16 * config.encoder.model_dim, config.hidden_dim, rng);
  return NliModel(config, std::move(vocab), std::move(embeddings),
                  std::move(encoder), std::move(classifier));
}

std::vector<NamedTensor> NliModel::named_params() const {
  std::vector<NamedTensor> out;
  encoder_.collect("enc", out);
  classifier_.collect("clf", out);
  return out;
}

std::size_t NliModel::parameter_count() const {
  std::size_t total = 0;
  for (const NamedTensor& nt : named_params()) total += nt.tensor.size();
  return total;
}

EncodedSentence NliModel::encode(std::span<const int> padded_ids,
                                 std::span<const std::uint8_t> pad_mask,
                                 bool train_mode, std::mt19937_64* rng,
                                 EncodeTrace* trace) const {
  return encode_sentence(padded_ids, pad_mask, embeddings_, encoder_,
                         config_.encoder, *mask_cache_, train_mode, rng, trace);
}

EncodedSentence NliModel::encode_tokens(std::span<const int> ids) const {
  std::vector<std::uint8_t> pad(ids.size(), 1);
  return encode(ids, pad, false, nullptr);
}

Tensor NliModel::batch_probabilities(const Batch& batch, bool train_mode,
                                     std::mt19937_64* rng) const {
  std::size_t size = batch.labels.size();
  if (size == 0 || batch.premise.batch != size ||
      batch.hypothesis.batch != size) {
    throw Error(ErrorKind::kLogic, "batch_probabilities: inconsistent batch");
  }
  std::vector<Tensor> feature_rows;
  feature_rows.reserve(size);
  for (std::size_t b = 0; b < size; ++b) {
    EncodedSentence premise =
        encode(batch.premise.sentence(b), batch.premise.sentence_pad_mask(b),
               train_mode, rng);
    EncodedSentence hypothesis =
        encode(batch.hypothesis.sentence(b),
               batch.hypothesis.sentence_pad_mask(b), train_mode, rng);
    feature_rows.push_back(relation_features(premise.sentence_vector,
                                             hypothesis.sentence_vector));
  }
  Tensor features = concat_rows(feature_rows);
  return classify(features, classifier_, train_mode, config_.encoder.dropout,
                  rng);
}

Tensor NliModel::batch_loss(const Batch& batch, bool train_mode,
                            std::mt19937_64* rng, std::size_t* clamped) const {
  Tensor probs = batch_probabilities(batch, train_mode, rng);
  return nll_loss(probs, batch.labels, clamped);
}

int argmax_label(const Tensor& probs, std::size_t row) {
  int best = 0;
  double best_value = probs.at(row, 0);
  for (std::size_t c = 1; c < probs.cols(); ++c) {
    if (probs.at(row, c) > best_value) {  // ties keep the lowest label
      best_value = probs.at(row, c);
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace dsan
