#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mgembed/gcn.hpp"
#include "mgembed/mgda.hpp"
#include "mgembed/multigraph.hpp"
#include "mgembed/objective.hpp"
#include "mgembed/train_config.hpp"

namespace mgembed {

struct TrainLogRow {
  std::int64_t step = 0;
  int epoch = 0;
  std::vector<double> losses;
  std::vector<double> alphas;

  friend bool operator==(const TrainLogRow&, const TrainLogRow&) = default;
};

struct TrainLog {
  int n_domains = 0;
  std::vector<TrainLogRow> rows;
  double wall_time_seconds = 0.0;

  // Mean batch loss of each domain over the steps of `epoch` (1-based).
  std::vector<double> mean_epoch_losses(int epoch) const;
  // Mean weight of each domain over all logged steps.
  std::vector<double> mean_alphas() const;

  // `step,epoch,loss_1..loss_D,alpha_1..alpha_D`.
  void write_csv(std::ostream& os) const;
  // {final_losses, mean_alpha, wall_time_seconds, steps, epochs}.
  std::string summary_json() const;
};

// Snapshot passed to an observer after every step, before and after the
// parameter update.
struct StepTrace {
  std::int64_t step = 0;
  int epoch = 0;
  const ModelParams* before = nullptr;
  const ModelParams* after = nullptr;
  const std::vector<GradientBundle>* bundles = nullptr;
  const DomainWeights* weights = nullptr;
};

struct Checkpoint;

// Drives training: each step draws one batch per domain, runs a training
// forward pass, backpropagates every domain's loss, updates each Θ_d from its
// own gradient, solves the domain weights and updates Θ_s with the weighted
// shared gradient. An epoch is one pass over the positives of the largest
// domain; smaller domains cycle through reshuffled passes.
class Trainer {
 public:
  Trainer(const MultiGraph& g, TrainConfig cfg);
  Trainer(const MultiGraph& g, TrainConfig cfg, FeatureMatrix features);

  // Continues a run from a checkpoint taken on the same graph.
  static Trainer resume(const MultiGraph& g, const Checkpoint& ckpt);

  void run_epoch();
  // Runs the remaining epochs.
  void run();
  bool finished() const noexcept { return epoch_ >= cfg_.epochs; }

  int epochs_done() const noexcept { return epoch_; }
  std::int64_t steps_done() const noexcept { return step_; }
  std::size_t steps_per_epoch() const noexcept { return steps_per_epoch_; }

  const TrainConfig& config() const noexcept { return cfg_; }
  const ModelParams& params() const noexcept { return params_; }
  const TrainLog& log() const noexcept { return log_; }
  const OptimizerState& optimizer() const noexcept { return optimizer_; }

  // Evaluation-mode embeddings, tagged with the graph's domain digests.
  EmbeddingSet embeddings() const;

  Checkpoint checkpoint() const;

  void set_observer(std::function<void(const StepTrace&)> observer) { observer_ = std::move(observer); }

 private:
  void step(std::size_t count);

  const MultiGraph* graph_;
  TrainConfig cfg_;
  FeatureMatrix features_;
  GraphOperators ops_;
  ModelParams params_;
  OptimizerState optimizer_;
  std::vector<NegativeSampler> negative_samplers_;
  std::vector<PositiveSampler> positive_samplers_;
  std::vector<Rng> positive_rngs_;
  std::vector<Rng> negative_rngs_;
  Rng dropout_rng_;
  DomainWeights last_weights_;
  TrainLog log_;
  int epoch_ = 0;
  std::int64_t step_ = 0;
  std::size_t steps_per_epoch_ = 0;
  std::function<void(const StepTrace&)> observer_;
};

struct TrainResult {
  ModelParams params;
  EmbeddingSet embeddings;
  TrainLog log;
};

// Runs all epochs with identity node features.
TrainResult train(const MultiGraph& g, const TrainConfig& cfg);

// Everything needed to continue a run bit-for-bit.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  TrainConfig config;
  ModelParams params;
  OptimizerState optimizer;
  int epoch = 0;
  std::int64_t step = 0;
  std::vector<std::string> positive_rng_states;
  std::vector<std::string> negative_rng_states;
  std::string dropout_rng_state;
  std::vector<std::vector<std::size_t>> positive_orders;
  std::vector<std::size_t> positive_cursors;
  Vector last_alpha;
  TrainLog log;
  std::vector<std::uint64_t> graph_digests;
};

// JSON on disk, written to a temporary file and renamed into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws DataError on a truncated or corrupt file or a version mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

}  // namespace mgembed
