#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "mgembed/gcn.hpp"
#include "mgembed/mgda.hpp"
#include "mgembed/objective.hpp"

namespace mgembed {

enum class AlphaMode { kMgda, kFixed };

struct TrainConfig {
  int epochs = 10;
  std::size_t batch_size = 256;
  int negatives = 2;
  Index dim_shared = 64;
  Index dim_specific = 16;
  DropoutRates dropout{0.3, 0.1};
  OptimizerMethod optimizer = OptimizerMethod::kAdam;
  double learning_rate = 0.01;
  AlphaMode alpha_mode = AlphaMode::kMgda;
  double fixed_alpha = 0.5;
  NegativeDistribution neg_distribution = NegativeDistribution::kDegreePow075;
  SharedStep shared_step = SharedStep::kUnnormalized;
  int fw_iterations = 50;
  double fw_tolerance = 1e-8;
  std::uint64_t seed = 0;
  int threads = 1;

  // Throws std::invalid_argument on any out-of-range field.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// `mgda` or `fixed:<a>`.
std::string alpha_mode_string(const TrainConfig& cfg);
void set_alpha_mode(TrainConfig& cfg, std::string_view text);

// Sets one field from its textual `key = value` form. Unknown keys throw.
void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value);

// Flat `key = value` text, `#` comments, blank lines ignored.
void apply_config_text(TrainConfig& cfg, std::string_view text, const std::string& source = "<config>");
TrainConfig load_config_file(const std::string& path);

// Every field in `key = value` form; parses back to the same config.
std::string to_config_text(const TrainConfig& cfg);

}  // namespace mgembed
