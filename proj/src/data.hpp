#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "error.hpp"

namespace dsan {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kLabelCount = 3;  // entailment=0, contradiction=1, neutral=2

const char* label_name(int label);
std::optional<int> label_from_name(const std::string& name);

/// Splits on whitespace, then detaches leading/trailing punctuation characters
/// as their own tokens. Case is preserved (pre-trained vectors are cased).
/// Internal punctuation (apostrophes, hyphens) stays inside the word.
std::vector<std::string> tokenize(const std::string& text);

class Vocabulary {
 public:
  Vocabulary();

  int add(const std::string& token);     // returns existing id if present
  int lookup(const std::string& token) const;  // kUnkId when absent
  const std::string& token(int id) const;
  std::size_t size() const { return id_to_token_.size(); }

  std::vector<int> to_ids(std::span<const std::string> tokens) const;

  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Frozen pre-trained word vectors, one row per vocabulary id. Row kPadId is
/// all zeros; tokens missing from the vector file keep a zero row, which makes
/// them indistinguishable from UNK downstream.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<double> rows;  // vocab_size x dim, row-major
  bool frozen = true;
  std::size_t found = 0;  // vocabulary tokens that had a pre-trained vector

  std::span<const double> row(int id) const {
    return {rows.data() + static_cast<std::size_t>(id) * dim, dim};
  }
};

/// Text format: "token v1 v2 ... v_d" per line; d is fixed by the first line
/// and a line with any other arity is a format error reporting its number.
EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab);

struct NLIExample {
  std::vector<int> premise;
  std::vector<int> hypothesis;
  int label = 0;
};

struct RawExample {
  std::vector<std::string> premise;
  std::vector<std::string> hypothesis;
  int label = 0;
};

struct CorpusStats {
  std::size_t retained = 0;
  std::size_t dropped = 0;  // gold_label "-" (annotator disagreement)
  std::size_t total_lines() const { return retained + dropped; }
};

/// JSON-lines with keys sentence1, sentence2, gold_label. Lines labeled "-"
/// are dropped and counted; any other unknown label is a data error.
std::vector<RawExample> parse_nli_jsonl(const std::string& path,
                                        CorpusStats* stats = nullptr);

void add_corpus_tokens(const std::vector<RawExample>& corpus, Vocabulary& vocab);
std::vector<NLIExample> to_id_examples(const std::vector<RawExample>& corpus,
                                       const Vocabulary& vocab);

struct SentenceBatch {
  std::vector<int> ids;                 // batch x max_len, row-major, PAD padded
  std::vector<std::size_t> lengths;     // real token counts
  std::vector<std::uint8_t> pad_mask;   // batch x max_len, 1 where real
  std::size_t batch = 0;
  std::size_t max_len = 0;

  std::span<const int> sentence(std::size_t b) const {
    return {ids.data() + b * max_len, max_len};
  }
  std::span<const std::uint8_t> sentence_pad_mask(std::size_t b) const {
    return {pad_mask.data() + b * max_len, max_len};
  }
};

struct Batch {
  SentenceBatch premise;
  SentenceBatch hypothesis;
  std::vector<int> labels;
};

SentenceBatch pad_sentences(std::span<const std::vector<int>> sentences);

/// Deterministic stream of batches over the example list. Each batch is
/// padded to its own maximum length; the final partial batch is retained.
class BatchStream {
 public:
  BatchStream(std::span<const NLIExample> examples, std::size_t batch_size,
              bool shuffle, std::uint64_t seed);

  std::optional<Batch> next();
  void reset();
  std::size_t batch_count() const;

 private:
  std::span<const NLIExample> examples_;
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::size_t cursor_ = 0;
};

}  // namespace dsan
