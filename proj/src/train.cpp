#include "train.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "checkpoint.hpp"

namespace dsan {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0 || batch_size == 0 || heads == 0 || epochs == 0) {
    throw Error(ErrorKind::kUsage, "train config: values must be positive");
  }
  if (alpha < 0.0) {
    throw Error(ErrorKind::kUsage, "train config: alpha must be non-negative");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw Error(ErrorKind::kUsage, "train config: dropout must be in [0, 1)");
  }
}

AdamOptimizer::AdamOptimizer(std::vector<NamedTensor> params,
                             double learning_rate, double beta1, double beta2,
                             double eps)
    : learning_rate_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  slots_.reserve(params.size());
  for (NamedTensor& nt : params) {
    Slot slot;
    slot.first_moment.assign(nt.tensor.size(), 0.0);
    slot.second_moment.assign(nt.tensor.size(), 0.0);
    slot.param = std::move(nt);
    slots_.push_back(std::move(slot));
  }
}

void AdamOptimizer::zero_grads() {
  for (Slot& slot : slots_) slot.param.tensor.zero_grad();
}

void AdamOptimizer::step() {
  ++timestep_;
  double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(timestep_));
  double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(timestep_));
  for (Slot& slot : slots_) {
    const std::vector<double>& grad = slot.param.tensor.grad();
    if (grad.empty()) continue;  // no gradient reached this parameter
    auto& values = slot.param.tensor.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      double g = grad[i];
      if (!std::isfinite(g)) {
        throw Error(ErrorKind::kNumeric,
                    "non-finite gradient in parameter " + slot.param.name);
      }
      slot.first_moment[i] = beta1_ * slot.first_moment[i] + (1.0 - beta1_) * g;
      slot.second_moment[i] =
          beta2_ * slot.second_moment[i] + (1.0 - beta2_) * g * g;
      double m_hat = slot.first_moment[i] / bias1;
      double v_hat = slot.second_moment[i] / bias2;
      values[i] -= learning_rate_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

EvalResult evaluate(const NliModel& model, std::span<const NLIExample> examples,
                    std::size_t batch_size) {
  EvalResult result;
  BatchStream stream(examples, batch_size, false, 0);
  while (auto batch = stream.next()) {
    Tensor probs = model.batch_probabilities(*batch, false, nullptr);
    for (std::size_t b = 0; b < batch->labels.size(); ++b) {
      int predicted = argmax_label(probs, b);
      int gold = batch->labels[b];
      result.confusion[static_cast<std::size_t>(gold)]
                      [static_cast<std::size_t>(predicted)] += 1;
      result.correct += predicted == gold;
      ++result.total;
    }
  }
  result.accuracy = result.total == 0
                        ? 0.0
                        : static_cast<double>(result.correct) /
                              static_cast<double>(result.total);
  return result;
}

std::vector<LengthBucketRow> evaluate_by_length(
    const NliModel& model, std::span<const NLIExample> examples,
    std::span<const double> bucket_edges, std::size_t batch_size) {
  for (std::size_t i = 1; i < bucket_edges.size(); ++i) {
    if (bucket_edges[i] <= bucket_edges[i - 1]) {
      throw Error(ErrorKind::kUsage, "bucket edges must be ascending");
    }
  }
  std::vector<LengthBucketRow> rows(bucket_edges.size() + 1);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].lower = k == 0 ? 0.0 : bucket_edges[k - 1];
    if (k < bucket_edges.size()) rows[k].upper = bucket_edges[k];
  }

  BatchStream stream(examples, batch_size, false, 0);
  std::size_t index = 0;
  while (auto batch = stream.next()) {
    Tensor probs = model.batch_probabilities(*batch, false, nullptr);
    for (std::size_t b = 0; b < batch->labels.size(); ++b, ++index) {
      const NLIExample& example = examples[index];
      double mean_len =
          (static_cast<double>(example.premise.size()) +
           static_cast<double>(example.hypothesis.size())) / 2.0;
      std::size_t bucket = 0;
      while (bucket < bucket_edges.size() && mean_len >= bucket_edges[bucket]) {
        ++bucket;
      }
      rows[bucket].count += 1;
      rows[bucket].correct += argmax_label(probs, b) == batch->labels[b];
    }
  }
  for (LengthBucketRow& row : rows) {
    if (row.count > 0) {
      row.accuracy =
          static_cast<double>(row.correct) / static_cast<double>(row.count);
    }
  }
  return rows;
}

void write_length_table_csv(const std::vector<LengthBucketRow>& rows,
                            const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kIo, "cannot write length table: " + path);
  }
  out << "bucket_low,bucket_high,count,accuracy\n";
  char buffer[64];
  for (const LengthBucketRow& row : rows) {
    out << row.lower << ",";
    if (row.upper.has_value()) out << *row.upper;
    out << "," << row.count << ",";
    if (row.accuracy.has_value()) {
      std::snprintf(buffer, sizeof(buffer), "%.6f", *row.accuracy);
      out << buffer;
    }
    out << "\n";
  }
}

TrainResult train_loop(NliModel& model, std::span<const NLIExample> train_set,
                       std::span<const NLIExample> valid_set,
                       const TrainConfig& config, const std::string& out_dir,
                       const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) {
    throw Error(ErrorKind::kUsage, "training set is empty");
  }
  std::filesystem::create_directories(out_dir);
  TrainResult result;
  result.metrics_path = (std::filesystem::path(out_dir) / "metrics.csv").string();
  result.checkpoint_path = (std::filesystem::path(out_dir) / "best.ckpt").string();

  std::ofstream metrics(result.metrics_path, std::ios::trunc);
  if (!metrics) {
    throw Error(ErrorKind::kIo, "cannot write metrics: " + result.metrics_path);
  }
  metrics << "epoch,train_loss,train_acc,valid_acc,seconds\n";

  AdamOptimizer optimizer(model.named_params(), config.learning_rate,
                          config.adam_beta1, config.adam_beta2, config.adam_eps);
  std::mt19937_64 rng(config.seed);
  result.best_valid_accuracy = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    auto start = std::chrono::steady_clock::now();
    BatchStream stream(train_set, config.batch_size, true, rng());
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    while (auto batch = stream.next()) {
      optimizer.zero_grads();
      std::size_t clamped = 0;
      {
        Tape tape;
        Tensor probs = model.batch_probabilities(*batch, true, &rng);
        Tensor loss = nll_loss(probs, batch->labels, &clamped);
        tape.backward(loss);
        loss_sum += loss.item() * static_cast<double>(batch->labels.size());
        for (std::size_t b = 0; b < batch->labels.size(); ++b) {
          correct += argmax_label(probs, b) == batch->labels[b];
        }
        seen += batch->labels.size();
      }
      result.clamped_log_count += clamped;
      optimizer.step();
    }

    EvalResult valid = evaluate(model, valid_set, config.batch_size);
    double seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start).count();
    EpochMetrics em{
        .epoch = epoch,
        .train_loss = loss_sum / static_cast<double>(seen),
        .train_accuracy =
            static_cast<double>(correct) / static_cast<double>(seen),
        .valid_accuracy = valid.accuracy,
        .seconds = seconds,
    };
    result.history.push_back(em);
    char line[160];
    std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f,%.6f,%.3f\n", em.epoch,
                  em.train_loss, em.train_accuracy, em.valid_accuracy,
                  em.seconds);
    metrics << line;
    metrics.flush();
    if (on_epoch) on_epoch(em);

    if (em.valid_accuracy > result.best_valid_accuracy) {
      result.best_valid_accuracy = em.valid_accuracy;
      result.best_epoch = epoch;
      save_checkpoint(model, result.checkpoint_path);
    }
  }
  return result;
}

}  // namespace dsan
