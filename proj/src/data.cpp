#include "data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace dsan {

namespace {

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

}  // namespace

const char* label_name(int label) {
  switch (label) {
    case 0: return "entailment";
    case 1: return "contradiction";
    case 2: return "neutral";
    default: throw Error(ErrorKind::kLogic, "label out of range");
  }
}

std::optional<int> label_from_name(const std::string& name) {
  if (name == "entailment") return 0;
  if (name == "contradiction") return 1;
  if (name == "neutral") return 2;
  return std::nullopt;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream words(text);
  std::string word;
  while (words >> word) {
    std::vector<std::string> trailing;
    while (word.size() > 1 && is_punct(word.front())) {
      out.push_back(word.substr(0, 1));
      word.erase(0, 1);
    }
    while (word.size() > 1 && is_punct(word.back())) {
      trailing.push_back(word.substr(word.size() - 1));
      word.pop_back();
    }
    out.push_back(word);
    out.insert(out.end(), trailing.rbegin(), trailing.rend());
  }
  if (out.empty()) {
    throw Error(ErrorKind::kData, "tokenize: no tokens in sentence");
  }
  return out;
}

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = token_to_id_.try_emplace(
      token, static_cast<int>(id_to_token_.size()));
  if (inserted) id_to_token_.push_back(token);
  return it->second;
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw Error(ErrorKind::kLogic, "vocabulary: id out of range");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::to_ids(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(lookup(t));
  return ids;
}

EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open embedding file: " + path);
  }
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> values;
    double v;
    while (fields >> v) values.push_back(v);
    if (table.dim == 0) {
      if (values.empty()) {
        throw Error(ErrorKind::kData,
                    path + ":" + std::to_string(line_no) + ": no vector values");
      }
      table.dim = values.size();
      table.rows.assign(vocab.size() * table.dim, 0.0);
    }
    if (values.size() != table.dim) {
      throw Error(ErrorKind::kData,
                  path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(table.dim) + " values, found " +
                      std::to_string(values.size()));
    }
    int id = vocab.lookup(token);
    if (id == kUnkId || id == kPadId) continue;  // not a corpus token
    std::copy(values.begin(), values.end(),
              table.rows.begin() + static_cast<std::size_t>(id) * table.dim);
    ++table.found;
  }
  if (table.dim == 0) {
    throw Error(ErrorKind::kData, path + ": embedding file is empty");
  }
  return table;
}

std::vector<RawExample> parse_nli_jsonl(const std::string& path,
                                        CorpusStats* stats) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open corpus file: " + path);
  }
  std::vector<RawExample> out;
  CorpusStats counts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kData, path + ":" + std::to_string(line_no) +
                                        ": malformed JSON: " + e.what());
    }
    if (!record.contains("sentence1") || !record.contains("sentence2") ||
        !record.contains("gold_label")) {
      throw Error(ErrorKind::kData,
                  path + ":" + std::to_string(line_no) +
                      ": missing sentence1/sentence2/gold_label");
    }
    std::string gold = record["gold_label"].get<std::string>();
    if (gold == "-") {  // annotators disagreed; SNLI convention is to drop
      ++counts.dropped;
      continue;
    }
    std::optional<int> label = label_from_name(gold);
    if (!label.has_value()) {
      throw Error(ErrorKind::kData, path + ":" + std::to_string(line_no) +
                                        ": unknown gold_label \"" + gold + "\"");
    }
    RawExample example;
    try {
      example.premise = tokenize(record["sentence1"].get<std::string>());
      example.hypothesis = tokenize(record["sentence2"].get<std::string>());
    } catch (const Error& e) {
      throw Error(ErrorKind::kData,
                  path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    example.label = *label;
    out.push_back(std::move(example));
    ++counts.retained;
  }
  if (stats != nullptr) *stats = counts;
  return out;
}

void add_corpus_tokens(const std::vector<RawExample>& corpus, Vocabulary& vocab) {
  for (const RawExample& ex : corpus) {
    for (const std::string& t : ex.premise) vocab.add(t);
    for (const std::string& t : ex.hypothesis) vocab.add(t);
  }
}

std::vector<NLIExample> to_id_examples(const std::vector<RawExample>& corpus,
                                       const Vocabulary& vocab) {
  std::vector<NLIExample> out;
  out.reserve(corpus.size());
  for (const RawExample& ex : corpus) {
    out.push_back(NLIExample{
        .premise = vocab.to_ids(ex.premise),
        .hypothesis = vocab.to_ids(ex.hypothesis),
        .label = ex.label,
    });
  }
  return out;
}

SentenceBatch pad_sentences(std::span<const std::vector<int>> sentences) {
  SentenceBatch batch;
  batch.batch = sentences.size();
  for (const auto& s : sentences) batch.max_len = std::max(batch.max_len, s.size());
  batch.ids.assign(batch.batch * batch.max_len, kPadId);
  batch.pad_mask.assign(batch.batch * batch.max_len, 0);
  batch.lengths.resize(batch.batch);
  for (std::size_t b = 0; b < batch.batch; ++b) {
    const auto& s = sentences[b];
    if (s.empty()) {
      throw Error(ErrorKind::kLogic, "pad_sentences: empty sentence");
    }
    batch.lengths[b] = s.size();
    std::copy(s.begin(), s.end(), batch.ids.begin() + b * batch.max_len);
    std::fill_n(batch.pad_mask.begin() + b * batch.max_len, s.size(),
                std::uint8_t{1});
  }
  return batch;
}

BatchStream::BatchStream(std::span<const NLIExample> examples,
                         std::size_t batch_size, bool shuffle,
                         std::uint64_t seed)
    : examples_(examples), batch_size_(batch_size) {
  if (batch_size_ == 0) {
    throw Error(ErrorKind::kUsage, "batch size must be at least 1");
  }
  order_.resize(examples_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (shuffle) {
    std::mt19937_64 rng(seed);
    std::shuffle(order_.begin(), order_.end(), rng);
  }
}

std::optional<Batch> BatchStream::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  std::size_t end = std::min(cursor_ + batch_size_, order_.size());
  std::vector<std::vector<int>> premises, hypotheses;
  Batch batch;
  premises.reserve(end - cursor_);
  hypotheses.reserve(end - cursor_);
  for (std::size_t i = cursor_; i < end; ++i) {
    const NLIExample& ex = examples_[order_[i]];
    premises.push_back(ex.premise);
    hypotheses.push_back(ex.hypothesis);
    batch.labels.push_back(ex.label);
  }
  cursor_ = end;
  batch.premise = pad_sentences(premises);
  batch.hypothesis = pad_sentences(hypotheses);
  return batch;
}

void BatchStream::reset() { cursor_ = 0; }

std::size_t BatchStream::batch_count() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

}  // namespace dsan
