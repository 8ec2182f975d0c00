#include "dsan/dsan.h"

#include <cstring>
#include <string>

#include "checkpoint.hpp"
#include "data.hpp"
#include "introspect.hpp"
#include "nli.hpp"
#include "train.hpp"

struct dsan_model {
  dsan::NliModel model;
};

namespace {

thread_local std::string g_last_error;

dsan_status status_of(dsan::ErrorKind kind) {
  switch (kind) {
    case dsan::ErrorKind::kUsage: return DSAN_ERR_USAGE;
    case dsan::ErrorKind::kData: return DSAN_ERR_DATA;
    case dsan::ErrorKind::kNumeric: return DSAN_ERR_NUMERIC;
    case dsan::ErrorKind::kIo: return DSAN_ERR_IO;
    case dsan::ErrorKind::kLogic: return DSAN_ERR_USAGE;
  }
  return DSAN_ERR_USAGE;
}

dsan_status fail(dsan_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename Fn>
dsan_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const dsan::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::exception& e) {
    return fail(DSAN_ERR_USAGE, e.what());
  }
}

dsan_status require(bool ok, const char* what) {
  return ok ? DSAN_OK : fail(DSAN_ERR_USAGE, what);
}

std::vector<dsan::NLIExample> load_corpus_for(const dsan::NliModel& model,
                                              const char* path) {
  std::vector<dsan::RawExample> raw = dsan::parse_nli_jsonl(path);
  return dsan::to_id_examples(raw, model.vocab());
}

}  // namespace

extern "C" {

const char* dsan_last_error(void) { return g_last_error.c_str(); }

void dsan_train_options_init(dsan_train_options* options) {
  if (options == nullptr) return;
  std::memset(options, 0, sizeof(*options));
  options->learning_rate = 0.001;
  options->batch_size = 64;
  options->heads = 5;
  options->alpha = 1.5;
  options->dropout = 0.1;
  options->hidden_dim = 300;
  options->epochs = 10;
  options->seed = 1;
  options->adam_beta1 = 0.9;
  options->adam_beta2 = 0.999;
  options->adam_eps = 1e-8;
}

dsan_status dsan_train(const char* embeddings_path, const char* train_path,
                       const char* valid_path, const char* out_dir,
                       const dsan_train_options* options,
                       dsan_model** out_model) {
  if (dsan_status s = require(embeddings_path && train_path && valid_path &&
                                  out_dir && options,
                              "dsan_train: missing required argument");
      s != DSAN_OK) {
    return s;
  }
  return guarded([&]() -> dsan_status {
    dsan::TrainConfig config;
    config.learning_rate = options->learning_rate;
    config.batch_size = static_cast<std::size_t>(options->batch_size);
    config.heads = static_cast<std::size_t>(options->heads);
    config.alpha = options->alpha;
    config.dropout = options->dropout;
    config.hidden_dim = static_cast<std::size_t>(options->hidden_dim);
    config.epochs = static_cast<std::size_t>(options->epochs);
    config.seed = options->seed;
    config.adam_beta1 = options->adam_beta1;
    config.adam_beta2 = options->adam_beta2;
    config.adam_eps = options->adam_eps;
    config.ln_placement = options->normalize_projection_input != 0
                              ? dsan::LnPlacement::kProjInput
                              : dsan::LnPlacement::kProjOutput;
    config.validate();

    std::vector<dsan::RawExample> train_raw = dsan::parse_nli_jsonl(train_path);
    std::vector<dsan::RawExample> valid_raw = dsan::parse_nli_jsonl(valid_path);

    dsan::Vocabulary vocab;
    dsan::add_corpus_tokens(train_raw, vocab);
    dsan::add_corpus_tokens(valid_raw, vocab);
    dsan::EmbeddingTable table = dsan::load_embeddings(embeddings_path, vocab);

    dsan::ModelConfig model_config{
        .encoder = dsan::EncoderConfig::with_model_dim(
            table.dim, config.heads, config.alpha, config.dropout),
        .hidden_dim = config.hidden_dim,
    };
    model_config.encoder.ln_placement = config.ln_placement;

    std::vector<dsan::NLIExample> train_set =
        dsan::to_id_examples(train_raw, vocab);
    std::vector<dsan::NLIExample> valid_set =
        dsan::to_id_examples(valid_raw, vocab);

    dsan::NliModel model = dsan::NliModel::init(model_config, std::move(vocab),
                                                std::move(table), config.seed);

    dsan::EpochCallback callback;
    if (options->on_epoch != nullptr) {
      callback = [options](const dsan::EpochMetrics& em) {
        options->on_epoch(static_cast<int>(em.epoch), em.train_loss,
                          em.train_accuracy, em.valid_accuracy, em.seconds,
                          options->user_data);
      };
    }
    dsan::TrainResult result =
        dsan::train_loop(model, train_set, valid_set, config, out_dir, callback);

    if (out_model != nullptr) {
      *out_model =
          new dsan_model{dsan::load_checkpoint(result.checkpoint_path)};
    }
    return DSAN_OK;
  });
}

dsan_status dsan_model_open(const char* checkpoint_path, dsan_model** out_model) {
  if (dsan_status s = require(checkpoint_path != nullptr && out_model != nullptr,
                              "dsan_model_open: missing required argument");
      s != DSAN_OK) {
    return s;
  }
  return guarded([&]() -> dsan_status {
    *out_model = new dsan_model{dsan::load_checkpoint(checkpoint_path)};
    return DSAN_OK;
  });
}

void dsan_model_close(dsan_model* model) { delete model; }

int dsan_model_embed_dim(const dsan_model* model) {
  return model == nullptr
             ? 0
             : static_cast<int>(model->model.config().encoder.model_dim);
}

int dsan_model_vector_dim(const dsan_model* model) {
  return 4 * dsan_model_embed_dim(model);
}

int64_t dsan_model_parameter_count(const dsan_model* model) {
  return model == nullptr
             ? 0
             : static_cast<int64_t>(model->model.parameter_count());
}

dsan_status dsan_model_encode(const dsan_model* model, const char* sentence,
                              double* out, size_t out_len) {
  if (dsan_status s = require(model != nullptr && sentence != nullptr &&
                                  out != nullptr,
                              "dsan_model_encode: missing required argument");
      s != DSAN_OK) {
    return s;
  }
  if (out_len != static_cast<size_t>(dsan_model_vector_dim(model))) {
    return fail(DSAN_ERR_USAGE,
                "dsan_model_encode: out_len must be " +
                    std::to_string(dsan_model_vector_dim(model)));
  }
  return guarded([&]() -> dsan_status {
    std::vector<std::string> tokens = dsan::tokenize(sentence);
    std::vector<int> ids = model->model.vocab().to_ids(tokens);
    dsan::EncodedSentence encoded = model->model.encode_tokens(ids);
    const std::vector<double>& vec = encoded.sentence_vector.data();
    std::memcpy(out, vec.data(), vec.size() * sizeof(double));
    return DSAN_OK;
  });
}

dsan_status dsan_model_evaluate(const dsan_model* model,
                                const char* corpus_path, int batch_size,
                                double* accuracy, int64_t confusion[9]) {
  if (dsan_status s = require(model != nullptr && corpus_path != nullptr &&
                                  accuracy != nullptr && batch_size > 0,
                              "dsan_model_evaluate: missing required argument");
      s != DSAN_OK) {
    return s;
  }
  return guarded([&]() -> dsan_status {
    std::vector<dsan::NLIExample> examples =
        load_corpus_for(model->model, corpus_path);
    dsan::EvalResult result = dsan::evaluate(
        model->model, examples, static_cast<std::size_t>(batch_size));
    *accuracy = result.accuracy;
    if (confusion != nullptr) {
      for (std::size_t gold = 0; gold < 3; ++gold) {
        for (std::size_t pred = 0; pred < 3; ++pred) {
          confusion[gold * 3 + pred] =
              static_cast<int64_t>(result.confusion[gold][pred]);
        }
      }
    }
    return DSAN_OK;
  });
}

dsan_status dsan_model_evaluate_by_length(const dsan_model* model,
                                          const char* corpus_path,
                                          int batch_size,
                                          const double* bucket_edges,
                                          size_t edge_count,
                                          const char* out_csv_path) {
  if (dsan_status s =
          require(model != nullptr && corpus_path != nullptr &&
                      out_csv_path != nullptr && batch_size > 0 &&
                      (bucket_edges != nullptr || edge_count == 0),
                  "dsan_model_evaluate_by_length: missing required argument");
      s != DSAN_OK) {
    return s;
  }
  return guarded([&]() -> dsan_status {
    std::vector<dsan::NLIExample> examples =
        load_corpus_for(model->model, corpus_path);
    auto rows = dsan::evaluate_by_length(
        model->model, examples, {bucket_edges, edge_count},
        static_cast<std::size_t>(batch_size));
    dsan::write_length_table_csv(rows, out_csv_path);
    return DSAN_OK;
  });
}

dsan_status dsan_model_inspect(const dsan_model* model, const char* sentence,
                               const char* out_dir, int formats,
                               double alpha_override) {
  if (dsan_status s = require(model != nullptr && sentence != nullptr &&
                                  out_dir != nullptr,
                              "dsan_model_inspect: missing required argument");
      s != DSAN_OK) {
    return s;
  }
  if ((formats & (DSAN_EXPORT_CSV | DSAN_EXPORT_SVG)) == 0) {
    return fail(DSAN_ERR_USAGE, "dsan_model_inspect: no export format selected");
  }
  return guarded([&]() -> dsan_status {
    std::optional<double> alpha;
    if (alpha_override >= 0.0) alpha = alpha_override;
    dsan::CaseStudyReport report =
        dsan::capture(sentence, model->model, alpha);
    dsan::export_report(report, out_dir, formats);
    return DSAN_OK;
  });
}

}  // extern "C"
