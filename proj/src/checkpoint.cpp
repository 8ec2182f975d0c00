#include "checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <map>

namespace dsan {

namespace {

constexpr char kMagic[8] = {'D', 'S', 'A', 'N', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_doubles(std::ostream& out, const std::vector<double>& values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

[[noreturn]] void truncated(const std::string& path) {
  throw Error(ErrorKind::kData, path + ": truncated or corrupt checkpoint");
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) truncated(path);
  return v;
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) truncated(path);
  return v;
}

double read_f64(std::istream& in, const std::string& path) {
  double v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) truncated(path);
  return v;
}

std::string read_string(std::istream& in, const std::string& path) {
  std::uint32_t len = read_u32(in, path);
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), len)) truncated(path);
  return s;
}

std::vector<double> read_doubles(std::istream& in, std::size_t count,
                                 const std::string& path) {
  std::vector<double> values(count);
  if (count > 0 &&
      !in.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(count * sizeof(double)))) {
    truncated(path);
  }
  return values;
}

}  // namespace

void save_checkpoint(const NliModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kIo, "cannot write checkpoint: " + path);
  }
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);

  const ModelConfig& cfg = model.config();
  write_u64(out, cfg.encoder.model_dim);
  write_u64(out, cfg.encoder.heads);
  write_u64(out, cfg.encoder.ffn_dim);
  write_u64(out, cfg.hidden_dim);
  write_f64(out, cfg.encoder.alpha);
  write_f64(out, cfg.encoder.dropout);
  write_u32(out, cfg.encoder.ln_placement == LnPlacement::kProjInput ? 1 : 0);

  const auto& tokens = model.vocab().tokens();
  write_u64(out, tokens.size());
  for (const std::string& t : tokens) write_string(out, t);

  write_u64(out, model.embeddings().dim);
  write_doubles(out, model.embeddings().rows);

  std::vector<NamedTensor> params = model.named_params();
  write_u64(out, params.size());
  for (const NamedTensor& nt : params) {
    write_string(out, nt.name);
    write_u64(out, nt.tensor.rows());
    write_u64(out, nt.tensor.cols());
    write_doubles(out, nt.tensor.data());
  }
  out.flush();
  if (!out) {
    throw Error(ErrorKind::kIo, "failed writing checkpoint: " + path);
  }
}

NliModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open checkpoint: " + path);
  }
  char magic[8] = {};
  if (!in.read(magic, sizeof(magic)) ||
      !std::equal(std::begin(magic), std::end(magic), std::begin(kMagic))) {
    throw Error(ErrorKind::kData, path + ": not a checkpoint file");
  }
  std::uint32_t version = read_u32(in, path);
  if (version != kVersion) {
    throw Error(ErrorKind::kData, path + ": unsupported checkpoint version " +
                                      std::to_string(version));
  }

  ModelConfig cfg;
  cfg.encoder.model_dim = read_u64(in, path);
  cfg.encoder.heads = read_u64(in, path);
  cfg.encoder.ffn_dim = read_u64(in, path);
  cfg.hidden_dim = read_u64(in, path);
  cfg.encoder.alpha = read_f64(in, path);
  cfg.encoder.dropout = read_f64(in, path);
  cfg.encoder.ln_placement = read_u32(in, path) == 1 ? LnPlacement::kProjInput
                                                     : LnPlacement::kProjOutput;

  std::uint64_t token_count = read_u64(in, path);
  Vocabulary vocab;
  for (std::uint64_t i = 0; i < token_count; ++i) {
    std::string token = read_string(in, path);
    if (i < 2) continue;  // <pad> and <unk> are built in
    vocab.add(token);
  }
  if (vocab.size() != token_count) {
    throw Error(ErrorKind::kData, path + ": duplicate vocabulary entries");
  }

  EmbeddingTable table;
  table.dim = read_u64(in, path);
  table.rows = read_doubles(in, token_count * table.dim, path);
  table.frozen = true;

  NliModel model =
      NliModel::init(cfg, std::move(vocab), std::move(table), /*seed=*/0);

  std::map<std::string, Tensor> by_name;
  for (const NamedTensor& nt : model.named_params()) {
    by_name.emplace(nt.name, nt.tensor);
  }

  std::uint64_t entry_count = read_u64(in, path);
  if (entry_count != by_name.size()) {
    throw Error(ErrorKind::kData,
                path + ": expected " + std::to_string(by_name.size()) +
                    " parameters, found " + std::to_string(entry_count));
  }
  for (std::uint64_t e = 0; e < entry_count; ++e) {
    std::string name = read_string(in, path);
    std::uint64_t rows = read_u64(in, path);
    std::uint64_t cols = read_u64(in, path);
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw Error(ErrorKind::kData, path + ": unknown parameter " + name);
    }
    Tensor& target = it->second;
    if (target.rows() != rows || target.cols() != cols) {
      throw Error(ErrorKind::kData,
                  path + ": parameter " + name + " is " + std::to_string(rows) +
                      "x" + std::to_string(cols) + ", expected " +
                      std::to_string(target.rows()) + "x" +
                      std::to_string(target.cols()));
    }
    target.mutable_data() = read_doubles(in, rows * cols, path);
    by_name.erase(it);
  }
  if (!by_name.empty()) {
    throw Error(ErrorKind::kData,
                path + ": missing parameter " + by_name.begin()->first);
  }
  return model;
}

}  // namespace dsan
