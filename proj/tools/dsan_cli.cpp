// Command-line front end for the dsan shared library. Progress and summaries
// go to stderr; machine-readable artifacts go to files only.
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <dsan/dsan.h>

namespace {

int exit_code_of(dsan_status status) {
  switch (status) {
    case DSAN_OK: return 0;
    case DSAN_ERR_USAGE: return 1;
    case DSAN_ERR_DATA: return 2;
    case DSAN_ERR_IO: return 2;
    case DSAN_ERR_NUMERIC: return 3;
  }
  return 1;
}

int finish(dsan_status status) {
  if (status != DSAN_OK) {
    std::fprintf(stderr, "error: %s\n", dsan_last_error());
  }
  return exit_code_of(status);
}

void print_epoch(int epoch, double train_loss, double train_acc,
                 double valid_acc, double seconds, void*) {
  std::fprintf(stderr,
               "epoch %d: train_loss=%.4f train_acc=%.4f valid_acc=%.4f "
               "(%.1fs)\n",
               epoch, train_loss, train_acc, valid_acc, seconds);
}

void echo_config(const CLI::App& app, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  std::ofstream out(std::filesystem::path(out_dir) / "config.toml",
                    std::ios::trunc);
  out << app.config_to_str(true, true);
}

struct ModelHandle {
  dsan_model* model = nullptr;
  ~ModelHandle() { dsan_model_close(model); }
};

const char* kLabelNames[3] = {"entailment", "contradiction", "neutral"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distance-based self-attention sentence encoder for NLI"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read defaults from a TOML/INI file");

  dsan_train_options train_options;
  dsan_train_options_init(&train_options);

  std::string embeddings, train_path, valid_path, data_path, checkpoint;
  std::string out_path, sentence, sentences_path, buckets_arg, formats_arg;
  int batch_size = 64;
  double alpha_override = -1.0;
  bool ln_input = false;

  CLI::App* train = app.add_subcommand("train", "Train a model from scratch");
  train->add_option("--embeddings", embeddings, "Pre-trained word vectors")
      ->required()->check(CLI::ExistingFile);
  train->add_option("--train", train_path, "Training corpus (JSON lines)")
      ->required()->check(CLI::ExistingFile);
  train->add_option("--valid", valid_path, "Validation corpus (JSON lines)")
      ->required()->check(CLI::ExistingFile);
  train->add_option("--out", out_path, "Output directory")->required();
  train->add_option("--epochs", train_options.epochs, "Epoch budget");
  train->add_option("--batch-size", train_options.batch_size, "Batch size");
  train->add_option("--heads", train_options.heads, "Attention heads");
  train->add_option("--alpha", train_options.alpha,
                    "Distance mask weight; 0 disables the distance mask");
  train->add_option("--dropout", train_options.dropout, "Dropout probability");
  train->add_option("--lr", train_options.learning_rate, "Adam learning rate");
  train->add_option("--hidden-dim", train_options.hidden_dim,
                    "Classifier hidden width");
  train->add_option("--seed", train_options.seed, "RNG seed");
  train->add_option("--adam-beta1", train_options.adam_beta1, "Adam beta1");
  train->add_option("--adam-beta2", train_options.adam_beta2, "Adam beta2");
  train->add_option("--adam-eps", train_options.adam_eps, "Adam epsilon");
  train->add_flag("--ln-input", ln_input,
                  "Layer-normalize projection inputs instead of outputs");

  CLI::App* eval = app.add_subcommand("eval", "Accuracy on a corpus");
  eval->add_option("--checkpoint", checkpoint, "Model checkpoint")
      ->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data_path, "Corpus (JSON lines)")
      ->required()->check(CLI::ExistingFile);
  eval->add_option("--batch-size", batch_size, "Batch size");
  eval->add_option("--out", out_path, "Optional metrics CSV");

  CLI::App* by_length =
      app.add_subcommand("eval-by-length", "Accuracy bucketed by mean length");
  by_length->add_option("--checkpoint", checkpoint, "Model checkpoint")
      ->required()->check(CLI::ExistingFile);
  by_length->add_option("--data", data_path, "Corpus (JSON lines)")
      ->required()->check(CLI::ExistingFile);
  by_length->add_option("--buckets", buckets_arg,
                        "Ascending bucket edges, e.g. 10,15,20,25")
      ->required();
  by_length->add_option("--out", out_path, "Output CSV")->required();
  by_length->add_option("--batch-size", batch_size, "Batch size");

  CLI::App* encode =
      app.add_subcommand("encode", "Encode sentences to 4*d_e vectors");
  encode->add_option("--checkpoint", checkpoint, "Model checkpoint")
      ->required()->check(CLI::ExistingFile);
  encode->add_option("--sentences", sentences_path, "One sentence per line")
      ->required()->check(CLI::ExistingFile);
  encode->add_option("--out", out_path, "Output file")->required();

  CLI::App* inspect =
      app.add_subcommand("inspect", "Case-study report for one sentence");
  inspect->add_option("--checkpoint", checkpoint, "Model checkpoint")
      ->required()->check(CLI::ExistingFile);
  inspect->add_option("--sentence", sentence, "Sentence to analyze")->required();
  inspect->add_option("--out", out_path, "Output directory")->required();
  inspect->add_option("--formats", formats_arg, "csv, svg, or csv,svg")
      ->default_val("csv,svg");
  inspect->add_option("--alpha", alpha_override,
                      "Override the checkpoint's distance-mask weight "
                      "(0 reproduces the no-distance-mask ablation)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  if (train->parsed()) {
    train_options.normalize_projection_input = ln_input ? 1 : 0;
    train_options.on_epoch = print_epoch;
    echo_config(app, out_path);
    dsan_status status =
        dsan_train(embeddings.c_str(), train_path.c_str(), valid_path.c_str(),
                   out_path.c_str(), &train_options, nullptr);
    if (status == DSAN_OK) {
      std::fprintf(stderr, "best checkpoint: %s/best.ckpt\n", out_path.c_str());
    }
    return finish(status);
  }

  if (eval->parsed()) {
    ModelHandle handle;
    dsan_status status = dsan_model_open(checkpoint.c_str(), &handle.model);
    if (status != DSAN_OK) return finish(status);
    double accuracy = 0.0;
    int64_t confusion[9] = {};
    status = dsan_model_evaluate(handle.model, data_path.c_str(), batch_size,
                                 &accuracy, confusion);
    if (status != DSAN_OK) return finish(status);
    std::fprintf(stderr, "accuracy: %.4f\n", accuracy);
    for (int gold = 0; gold < 3; ++gold) {
      std::fprintf(stderr, "%-13s -> %" PRId64 " %" PRId64 " %" PRId64 "\n",
                   kLabelNames[gold], confusion[gold * 3], confusion[gold * 3 + 1],
                   confusion[gold * 3 + 2]);
    }
    if (!out_path.empty()) {
      std::ofstream out(out_path, std::ios::trunc);
      if (!out) {
        std::fprintf(stderr, "error: cannot write %s\n", out_path.c_str());
        return 2;
      }
      out << "metric,value\n";
      char line[96];
      std::snprintf(line, sizeof(line), "accuracy,%.6f\n", accuracy);
      out << line;
      for (int gold = 0; gold < 3; ++gold) {
        for (int pred = 0; pred < 3; ++pred) {
          out << "confusion_" << kLabelNames[gold] << "_" << kLabelNames[pred]
              << "," << confusion[gold * 3 + pred] << "\n";
        }
      }
    }
    return 0;
  }

  if (by_length->parsed()) {
    std::vector<double> edges;
    std::stringstream stream(buckets_arg);
    std::string field;
    while (std::getline(stream, field, ',')) {
      try {
        edges.push_back(std::stod(field));
      } catch (const std::exception&) {
        std::fprintf(stderr, "error: bad bucket edge \"%s\"\n", field.c_str());
        return 1;
      }
    }
    ModelHandle handle;
    dsan_status status = dsan_model_open(checkpoint.c_str(), &handle.model);
    if (status != DSAN_OK) return finish(status);
    status = dsan_model_evaluate_by_length(handle.model, data_path.c_str(),
                                           batch_size, edges.data(),
                                           edges.size(), out_path.c_str());
    if (status == DSAN_OK) {
      std::fprintf(stderr, "length table written to %s\n", out_path.c_str());
    }
    return finish(status);
  }

  if (encode->parsed()) {
    ModelHandle handle;
    dsan_status status = dsan_model_open(checkpoint.c_str(), &handle.model);
    if (status != DSAN_OK) return finish(status);
    std::ifstream in(sentences_path);
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) {
      std::fprintf(stderr, "error: cannot write %s\n", out_path.c_str());
      return 2;
    }
    std::vector<double> vec(
        static_cast<std::size_t>(dsan_model_vector_dim(handle.model)));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) {
        std::fprintf(stderr, "warning: line %zu is empty, skipped\n", line_no);
        continue;
      }
      status = dsan_model_encode(handle.model, line.c_str(), vec.data(),
                                 vec.size());
      if (status != DSAN_OK) return finish(status);
      char buffer[32];
      for (std::size_t d = 0; d < vec.size(); ++d) {
        std::snprintf(buffer, sizeof(buffer), "%.17g", vec[d]);
        if (d > 0) out << '\t';
        out << buffer;
      }
      out << '\n';
    }
    return 0;
  }

  if (inspect->parsed()) {
    int formats = 0;
    if (formats_arg.find("csv") != std::string::npos) formats |= DSAN_EXPORT_CSV;
    if (formats_arg.find("svg") != std::string::npos) formats |= DSAN_EXPORT_SVG;
    if (formats == 0) {
      std::fprintf(stderr, "error: --formats must name csv and/or svg\n");
      return 1;
    }
    ModelHandle handle;
    dsan_status status = dsan_model_open(checkpoint.c_str(), &handle.model);
    if (status != DSAN_OK) return finish(status);
    echo_config(app, out_path);
    status = dsan_model_inspect(handle.model, sentence.c_str(), out_path.c_str(),
                                formats, alpha_override);
    if (status == DSAN_OK) {
      std::fprintf(stderr, "report written to %s\n", out_path.c_str());
    }
    return finish(status);
  }

  return 1;
}
