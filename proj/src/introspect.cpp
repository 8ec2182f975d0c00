#include "introspect.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace dsan {

namespace {

std::vector<double> row_means(const Tensor& t) {
  std::vector<double> out(t.rows(), 0.0);
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) out[i] += t.at(i, j);
    out[i] /= static_cast<double>(t.cols());
  }
  return out;
}

std::vector<double> row_maxima(const Tensor& t) {
  std::vector<double> out(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    double best = t.at(i, 0);
    for (std::size_t j = 1; j < t.cols(); ++j) best = std::max(best, t.at(i, j));
    out[i] = best;
  }
  return out;
}

Tensor mean_of(const std::vector<Tensor>& parts) {
  Tensor sum = Tensor::zeros(parts[0].rows(), parts[0].cols());
  for (const Tensor& p : parts) {
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum.mutable_data()[i] += p.data()[i];
    }
  }
  double inv = 1.0 / static_cast<double>(parts.size());
  for (double& v : sum.mutable_data()) v *= inv;
  return sum;
}

std::string format_value(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

std::string csv_field(const std::string& raw) {
  bool needs_quotes = raw.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs_quotes) return raw;
  std::string quoted = "\"";
  for (char c : raw) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string xml_escape(const std::string& raw) {
  std::string out;
  for (char c : raw) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::ofstream open_file(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::kIo, "cannot write " + path.string());
  }
  return out;
}

void write_matrix_csv(const std::filesystem::path& path, const Tensor& matrix,
                      const std::vector<std::string>& tokens) {
  std::ofstream out = open_file(path);
  out << "";
  for (const std::string& t : tokens) out << "," << csv_field(t);
  out << "\n";
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    out << csv_field(tokens[i]);
    for (std::size_t j = 0; j < matrix.cols(); ++j) {
      out << "," << format_value(matrix.at(i, j));
    }
    out << "\n";
  }
}

void write_vector_csv(const std::filesystem::path& path,
                      const std::vector<double>& values,
                      const std::vector<std::string>& tokens) {
  std::ofstream out = open_file(path);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out << ",";
    out << csv_field(tokens[i]);
  }
  out << "\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out << ",";
    out << format_value(values[i]);
  }
  out << "\n";
}

// white -> deep blue, t in [0, 1]
std::string heat_color(double t) {
  auto channel = [t](int from, int to) {
    return from + static_cast<int>(std::lround(t * (to - from)));
  };
  char buffer[8];
  std::snprintf(buffer, sizeof(buffer), "#%02x%02x%02x", channel(255, 13),
                channel(255, 71), channel(255, 161));
  return buffer;
}

void write_heatmap_svg(const std::filesystem::path& path, const Tensor& matrix,
                       const std::vector<std::string>& tokens,
                       bool label_rows) {
  constexpr int kCell = 34;
  constexpr int kMarginLeft = 96;
  constexpr int kMarginTop = 96;
  std::size_t rows = matrix.rows(), cols = matrix.cols();
  int width = kMarginLeft + static_cast<int>(cols) * kCell + 8;
  int height = kMarginTop + static_cast<int>(rows) * kCell + 8;

  double max_value = 0.0;
  for (double v : matrix.data()) max_value = std::max(max_value, v);

  std::ofstream out = open_file(path);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  out << "<style>text{font-family:monospace;font-size:12px;}</style>\n";
  for (std::size_t j = 0; j < cols; ++j) {
    int x = kMarginLeft + static_cast<int>(j) * kCell + kCell / 2;
    out << "<text x=\"" << x << "\" y=\"" << kMarginTop - 8
        << "\" text-anchor=\"start\" transform=\"rotate(-60 " << x << " "
        << kMarginTop - 8 << ")\">" << xml_escape(tokens[j]) << "</text>\n";
  }
  if (label_rows) {
    for (std::size_t i = 0; i < rows; ++i) {
      int y = kMarginTop + static_cast<int>(i) * kCell + kCell / 2 + 4;
      out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << y
          << "\" text-anchor=\"end\">" << xml_escape(tokens[i]) << "</text>\n";
    }
  }
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double v = matrix.at(i, j);
      double t = max_value > 0.0 ? std::max(0.0, v) / max_value : 0.0;
      out << "<rect x=\"" << kMarginLeft + static_cast<int>(j) * kCell
          << "\" y=\"" << kMarginTop + static_cast<int>(i) * kCell
          << "\" width=\"" << kCell << "\" height=\"" << kCell
          << "\" fill=\"" << heat_color(t)
          << "\" stroke=\"#cccccc\" stroke-width=\"1\"><title>"
          << xml_escape(format_value(v)) << "</title></rect>\n";
    }
  }
  out << "</svg>\n";
}

void write_vector_svg(const std::filesystem::path& path,
                      const std::vector<double>& values,
                      const std::vector<std::string>& tokens) {
  Tensor row(1, values.size(), values);
  write_heatmap_svg(path, row, tokens, /*label_rows=*/false);
}

}  // namespace

CaseStudyReport capture(const std::string& sentence, const NliModel& model,
                        std::optional<double> alpha_override) {
  CaseStudyReport report;
  report.tokens = tokenize(sentence);
  std::vector<int> ids = model.vocab().to_ids(report.tokens);
  std::vector<std::uint8_t> pad(ids.size(), 1);

  EncodeTrace trace;
  if (alpha_override.has_value()) {
    EncoderConfig cfg = model.config().encoder;
    cfg.alpha = *alpha_override;
    encode_sentence(ids, pad, model.embeddings(), model.encoder(), cfg,
                    model.mask_cache(), false, nullptr, &trace);
  } else {
    model.encode(ids, pad, false, nullptr, &trace);
  }

  for (Direction dir : {Direction::kForward, Direction::kBackward}) {
    std::size_t d = direction_index(dir);
    const BranchTrace& branch = dir == Direction::kForward
                                    ? trace.forward_branch
                                    : trace.backward_branch;
    report.attn_per_head[d] = branch.head_weights;
    report.attn_avg[d] = mean_of(branch.head_weights);
    report.gate_avg[d] = row_means(branch.gate);
    report.ffn_out_max[d] = row_maxima(branch.output);

    const Tensor& pre = branch.ffn_hidden_pre;
    std::vector<double>& deact = report.ffn_deact_ratio[d];
    deact.assign(pre.rows(), 0.0);
    for (std::size_t i = 0; i < pre.rows(); ++i) {
      std::size_t zeros = 0;
      for (std::size_t j = 0; j < pre.cols(); ++j) zeros += pre.at(i, j) <= 0.0;
      deact[i] = static_cast<double>(zeros) / static_cast<double>(pre.cols());
    }
  }

  report.multidim_avg_weight = row_means(trace.pool_weights);

  std::size_t n = report.tokens.size();
  std::size_t pooled_dims = trace.maxpool_argmax.size();
  report.maxpool_ratio.assign(n, 0.0);
  for (std::size_t winner : trace.maxpool_argmax) {
    report.maxpool_ratio[winner] += 1.0;
  }
  for (double& v : report.maxpool_ratio) {
    v *= 100.0 / static_cast<double>(pooled_dims);
  }
  return report;
}

void export_report(const CaseStudyReport& report, const std::string& out_dir,
                   int formats) {
  namespace fs = std::filesystem;
  fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root / "pooling", ec);
  if (ec) {
    throw Error(ErrorKind::kIo, "cannot create " + out_dir + ": " + ec.message());
  }
  const auto& tokens = report.tokens;

  {
    std::ofstream out = open_file(root / "tokens.csv");
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0) out << ",";
      out << csv_field(tokens[i]);
    }
    out << "\n";
  }

  for (Direction dir : {Direction::kForward, Direction::kBackward}) {
    std::size_t d = direction_index(dir);
    fs::path dir_path = root / direction_name(dir);
    fs::create_directories(dir_path, ec);
    if (ec) {
      throw Error(ErrorKind::kIo,
                  "cannot create " + dir_path.string() + ": " + ec.message());
    }
    if (formats & kExportCsv) {
      write_matrix_csv(dir_path / "attn_avg.csv", report.attn_avg[d], tokens);
      for (std::size_t h = 0; h < report.attn_per_head[d].size(); ++h) {
        write_matrix_csv(dir_path / ("attn_head" + std::to_string(h) + ".csv"),
                         report.attn_per_head[d][h], tokens);
      }
      write_vector_csv(dir_path / "gate_avg.csv", report.gate_avg[d], tokens);
      write_vector_csv(dir_path / "ffn_deact_ratio.csv",
                       report.ffn_deact_ratio[d], tokens);
      write_vector_csv(dir_path / "ffn_out_max.csv", report.ffn_out_max[d],
                       tokens);
    }
    if (formats & kExportSvg) {
      write_heatmap_svg(dir_path / "attn_avg.svg", report.attn_avg[d], tokens,
                        true);
      for (std::size_t h = 0; h < report.attn_per_head[d].size(); ++h) {
        write_heatmap_svg(dir_path / ("attn_head" + std::to_string(h) + ".svg"),
                          report.attn_per_head[d][h], tokens, true);
      }
      write_vector_svg(dir_path / "gate_avg.svg", report.gate_avg[d], tokens);
      write_vector_svg(dir_path / "ffn_deact_ratio.svg",
                       report.ffn_deact_ratio[d], tokens);
      write_vector_svg(dir_path / "ffn_out_max.svg", report.ffn_out_max[d],
                       tokens);
    }
  }

  if (formats & kExportCsv) {
    write_vector_csv(root / "pooling" / "multidim_avg_weight.csv",
                     report.multidim_avg_weight, tokens);
    write_vector_csv(root / "pooling" / "maxpool_ratio.csv",
                     report.maxpool_ratio, tokens);
  }
  if (formats & kExportSvg) {
    write_vector_svg(root / "pooling" / "multidim_avg_weight.svg",
                     report.multidim_avg_weight, tokens);
    write_vector_svg(root / "pooling" / "maxpool_ratio.svg",
                     report.maxpool_ratio, tokens);
  }
}

}  // namespace dsan
