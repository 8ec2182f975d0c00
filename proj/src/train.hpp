#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nli.hpp"

namespace dsan {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 64;
  std::size_t heads = 5;
  double alpha = 1.5;
  double dropout = 0.1;
  std::size_t hidden_dim = 300;  // d_h
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  LnPlacement ln_placement = LnPlacement::kProjOutput;

  void validate() const;
};

/// Bias-corrected Adam over the model's named parameters. The frozen
/// embedding table is not a parameter and is never touched.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<NamedTensor> params, double learning_rate,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void zero_grads();
  /// One update from the gradients accumulated by the last backward pass.
  /// A non-finite gradient aborts with a numeric error naming the parameter.
  void step();
  std::size_t timestep() const { return timestep_; }

 private:
  struct Slot {
    NamedTensor param;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
  };
  std::vector<Slot> slots_;
  double learning_rate_, beta1_, beta2_, eps_;
  std::size_t timestep_ = 0;
};

struct EvalResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  // confusion[gold][predicted]
  std::array<std::array<std::size_t, kLabelCount>, kLabelCount> confusion{};
};

EvalResult evaluate(const NliModel& model, std::span<const NLIExample> examples,
                    std::size_t batch_size = 64);

struct LengthBucketRow {
  double lower = 0.0;                  // inclusive
  std::optional<double> upper;         // exclusive; absent for the last bucket
  std::size_t count = 0;
  std::size_t correct = 0;
  std::optional<double> accuracy;      // absent when the bucket is empty
};

/// Buckets examples by the mean of premise and hypothesis token counts over
/// the intervals [0, e1), [e1, e2), ..., [ek, inf) for ascending edges.
std::vector<LengthBucketRow> evaluate_by_length(
    const NliModel& model, std::span<const NLIExample> examples,
    std::span<const double> bucket_edges, std::size_t batch_size = 64);

void write_length_table_csv(const std::vector<LengthBucketRow>& rows,
                            const std::string& path);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double valid_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  double best_valid_accuracy = 0.0;
  std::size_t best_epoch = 0;
  std::string checkpoint_path;
  std::string metrics_path;
  std::size_t clamped_log_count = 0;  // gold probabilities that hit the floor
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Runs the full loop: shuffled batches, forward/backward/Adam, one
/// validation pass per epoch, checkpoint on improvement, and a metrics CSV
/// with header epoch,train_loss,train_acc,valid_acc,seconds in out_dir.
TrainResult train_loop(NliModel& model, std::span<const NLIExample> train_set,
                       std::span<const NLIExample> valid_set,
                       const TrainConfig& config, const std::string& out_dir,
                       const EpochCallback& on_epoch = {});

}  // namespace dsan
