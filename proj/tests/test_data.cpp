#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "data.hpp"

using namespace dsan;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("dsan_data_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name, const std::string& content) const {
    std::string p = (path / name).string();
    std::ofstream out(p);
    out << content;
    return p;
  }
};

}  // namespace

TEST_CASE("tokenizer") {
  auto tokens = tokenize("A lady stands outside of a Mexican market.");
  std::vector<std::string> expected{"A",  "lady",    "stands", "outside", "of",
                                    "a",  "Mexican", "market", "."};
  CHECK(tokens == expected);

  CHECK(tokenize("hello") == std::vector<std::string>{"hello"});

  CHECK(tokenize("don't stop.") ==
        std::vector<std::string>{"don't", "stop", "."});

  CHECK(tokenize("(well-known), yes...") ==
        std::vector<std::string>{"(", "well-known", ")", ",", "yes", ".", ".",
                                 "."});

  CHECK_THROWS_AS(tokenize("   "), Error);
  CHECK_THROWS_AS(tokenize(""), Error);
}

TEST_CASE("vocabulary ids round trip") {
  Vocabulary vocab;
  CHECK(vocab.size() == 2);  // <pad>, <unk>
  int dog = vocab.add("dog");
  int cat = vocab.add("cat");
  CHECK(dog == 2);
  CHECK(cat == 3);
  CHECK(vocab.add("dog") == dog);
  CHECK(vocab.lookup("dog") == dog);
  CHECK(vocab.lookup("zebra") == kUnkId);
  CHECK(vocab.token(dog) == "dog");

  auto tokens = tokenize("dog cat dog");
  auto ids = vocab.to_ids(tokens);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CHECK(vocab.token(ids[i]) == tokens[i]);
  }
}

TEST_CASE("embedding loader") {
  TempDir dir;
  Vocabulary vocab;
  vocab.add("alpha");
  vocab.add("beta");
  vocab.add("missing");

  SUBCASE("vectors pass through and absent tokens stay zero") {
    std::string path = dir.file("vec.txt",
                                "alpha 0.5 -1.25 3\n"
                                "beta 1 2 3\n"
                                "extra 9 9 9\n");
    EmbeddingTable table = load_embeddings(path, vocab);
    CHECK(table.dim == 3);
    CHECK(table.frozen);
    CHECK(table.found == 2);
    auto alpha = table.row(vocab.lookup("alpha"));
    CHECK(alpha[0] == 0.5);
    CHECK(alpha[1] == -1.25);
    CHECK(alpha[2] == 3.0);
    for (double v : table.row(vocab.lookup("missing"))) CHECK(v == 0.0);
    for (double v : table.row(kPadId)) CHECK(v == 0.0);
    for (double v : table.row(kUnkId)) CHECK(v == 0.0);
  }

  SUBCASE("inconsistent arity is a format error with the line number") {
    std::string path = dir.file("bad.txt",
                                "alpha 1 2 3\n"
                                "beta 1 2\n");
    try {
      load_embeddings(path, vocab);
      FAIL("expected format error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kData);
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }

  SUBCASE("missing file is an io error") {
    CHECK_THROWS_AS(load_embeddings((dir.path / "nope.txt").string(), vocab),
                    Error);
  }
}

TEST_CASE("nli jsonl parsing") {
  TempDir dir;

  SUBCASE("labels map and dashes drop") {
    std::string path = dir.file(
        "corpus.jsonl",
        R"({"sentence1":"a b","sentence2":"c","gold_label":"neutral"})"
        "\n"
        R"({"sentence1":"a","sentence2":"b","gold_label":"-"})"
        "\n"
        R"({"sentence1":"x y z","sentence2":"w","gold_label":"entailment"})"
        "\n"
        R"({"sentence1":"q","sentence2":"r","gold_label":"contradiction"})"
        "\n");
    CorpusStats stats;
    auto corpus = parse_nli_jsonl(path, &stats);
    CHECK(stats.retained == 3);
    CHECK(stats.dropped == 1);
    CHECK(stats.total_lines() == 4);
    CHECK(corpus[0].label == 2);
    CHECK(corpus[1].label == 0);
    CHECK(corpus[2].label == 1);
    CHECK(corpus[0].premise == std::vector<std::string>{"a", "b"});
  }

  SUBCASE("malformed json reports its line") {
    std::string path = dir.file(
        "broken.jsonl",
        R"({"sentence1":"a","sentence2":"b","gold_label":"neutral"})"
        "\n{oops\n");
    try {
      parse_nli_jsonl(path);
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kData);
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }

  SUBCASE("unknown label is an error") {
    std::string path = dir.file(
        "odd.jsonl",
        R"({"sentence1":"a","sentence2":"b","gold_label":"perhaps"})" "\n");
    CHECK_THROWS_AS(parse_nli_jsonl(path), Error);
  }
}

TEST_CASE("batching") {
  std::vector<NLIExample> examples;
  for (int i = 0; i < 130; ++i) {
    NLIExample ex;
    ex.premise.assign(static_cast<std::size_t>(1 + i % 7), 2);
    ex.hypothesis.assign(static_cast<std::size_t>(1 + i % 3), 3);
    ex.label = i % 3;
    examples.push_back(ex);
  }

  SUBCASE("130 examples at batch 64 give 64, 64, 2") {
    BatchStream stream(examples, 64, false, 0);
    CHECK(stream.batch_count() == 3);
    std::vector<std::size_t> sizes;
    while (auto batch = stream.next()) sizes.push_back(batch->labels.size());
    CHECK(sizes == std::vector<std::size_t>{64, 64, 2});
  }

  SUBCASE("unshuffled order is corpus order") {
    BatchStream stream(examples, 8, false, 123);
    auto batch = stream.next();
    REQUIRE(batch.has_value());
    for (int i = 0; i < 8; ++i) {
      CHECK(batch->labels[static_cast<std::size_t>(i)] == i % 3);
      CHECK(batch->premise.lengths[static_cast<std::size_t>(i)] ==
            static_cast<std::size_t>(1 + i % 7));
    }
  }

  SUBCASE("same seed gives identical streams") {
    BatchStream a(examples, 16, true, 42);
    BatchStream b(examples, 16, true, 42);
    while (true) {
      auto ba = a.next();
      auto bb = b.next();
      CHECK(ba.has_value() == bb.has_value());
      if (!ba.has_value()) break;
      CHECK(ba->premise.ids == bb->premise.ids);
      CHECK(ba->hypothesis.ids == bb->hypothesis.ids);
      CHECK(ba->labels == bb->labels);
    }

    BatchStream c(examples, 16, true, 43);
    auto bc = c.next();
    BatchStream d(examples, 16, true, 42);
    auto bd = d.next();
    CHECK(bc->labels != bd->labels);  // different seed shuffles differently
  }

  SUBCASE("padding is per batch with trailing pads") {
    BatchStream stream(examples, 4, false, 0);
    auto batch = stream.next();
    REQUIRE(batch.has_value());
    const SentenceBatch& prem = batch->premise;
    CHECK(prem.max_len == 4);  // lengths 1..4 in the first four examples
    for (std::size_t b = 0; b < prem.batch; ++b) {
      for (std::size_t j = 0; j < prem.max_len; ++j) {
        bool real = j < prem.lengths[b];
        CHECK(prem.sentence_pad_mask(b)[j] == (real ? 1 : 0));
        if (!real) CHECK(prem.sentence(b)[j] == kPadId);
      }
    }
  }

  SUBCASE("zero batch size is a usage error") {
    CHECK_THROWS_AS(BatchStream(examples, 0, false, 0), Error);
  }
}
