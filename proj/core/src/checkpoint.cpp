#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "mgembed/error.hpp"
#include "mgembed/graph_io.hpp"
#include "mgembed/trainer.hpp"

namespace mgembed {

namespace {

using nlohmann::json;

constexpr const char* kFormatName = "mgembed-checkpoint";

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols) {
    throw DataError("checkpoint matrix has inconsistent size");
  }
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

json moments_to_json(const AdamMoments& m) {
  return json{{"first", matrix_to_json(m.first)}, {"second", matrix_to_json(m.second)}, {"steps", m.steps}};
}

AdamMoments moments_from_json(const json& j) {
  return AdamMoments{matrix_from_json(j.at("first")), matrix_from_json(j.at("second")), j.at("steps").get<std::int64_t>()};
}

json config_to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"negatives", c.negatives},
              {"dim_shared", c.dim_shared},
              {"dim_specific", c.dim_specific},
              {"dropout_shared", c.dropout.shared},
              {"dropout_specific", c.dropout.specific},
              {"optimizer", to_string(c.optimizer)},
              {"learning_rate", c.learning_rate},
              {"alpha_mode", c.alpha_mode == AlphaMode::kMgda ? "mgda" : "fixed"},
              {"fixed_alpha", c.fixed_alpha},
              {"neg_distribution", to_string(c.neg_distribution)},
              {"step_on_normalized", c.shared_step == SharedStep::kNormalized},
              {"fw_iterations", c.fw_iterations},
              {"fw_tolerance", c.fw_tolerance},
              {"seed", c.seed},
              {"threads", c.threads}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.negatives = j.at("negatives").get<int>();
  c.dim_shared = j.at("dim_shared").get<Index>();
  c.dim_specific = j.at("dim_specific").get<Index>();
  c.dropout.shared = j.at("dropout_shared").get<double>();
  c.dropout.specific = j.at("dropout_specific").get<double>();
  c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.learning_rate = j.at("learning_rate").get<double>();
  c.alpha_mode = j.at("alpha_mode").get<std::string>() == "mgda" ? AlphaMode::kMgda : AlphaMode::kFixed;
  c.fixed_alpha = j.at("fixed_alpha").get<double>();
  c.neg_distribution = parse_negative_distribution(j.at("neg_distribution").get<std::string>());
  c.shared_step = j.at("step_on_normalized").get<bool>() ? SharedStep::kNormalized : SharedStep::kUnnormalized;
  c.fw_iterations = j.at("fw_iterations").get<int>();
  c.fw_tolerance = j.at("fw_tolerance").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.threads = j.at("threads").get<int>();
  c.validate();
  return c;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  json j;
  j["format"] = kFormatName;
  j["version"] = Checkpoint::kFormatVersion;
  j["config"] = config_to_json(ckpt.config);
  j["theta_s"] = matrix_to_json(ckpt.params.theta_s);
  j["theta_d"] = json::array();
  for (const auto& t : ckpt.params.theta_d) j["theta_d"].push_back(matrix_to_json(t));
  j["optimizer"] = json{{"method", to_string(ckpt.optimizer.method)},
                        {"learning_rate", ckpt.optimizer.learning_rate},
                        {"beta1", ckpt.optimizer.beta1},
                        {"beta2", ckpt.optimizer.beta2},
                        {"epsilon", ckpt.optimizer.epsilon},
                        {"shared", moments_to_json(ckpt.optimizer.shared)},
                        {"domain", json::array()}};
  for (const auto& m : ckpt.optimizer.domain) j["optimizer"]["domain"].push_back(moments_to_json(m));
  j["epoch"] = ckpt.epoch;
  j["step"] = ckpt.step;
  j["positive_rng"] = ckpt.positive_rng_states;
  j["negative_rng"] = ckpt.negative_rng_states;
  j["dropout_rng"] = ckpt.dropout_rng_state;
  j["positive_orders"] = ckpt.positive_orders;
  j["positive_cursors"] = ckpt.positive_cursors;
  j["last_alpha"] = std::vector<double>(ckpt.last_alpha.data(), ckpt.last_alpha.data() + ckpt.last_alpha.size());
  j["graph_digests"] = ckpt.graph_digests;
  json rows = json::array();
  for (const auto& r : ckpt.log.rows) {
    rows.push_back(json{{"step", r.step}, {"epoch", r.epoch}, {"losses", r.losses}, {"alphas", r.alphas}});
  }
  j["log"] = json{{"n_domains", ckpt.log.n_domains}, {"wall_time_seconds", ckpt.log.wall_time_seconds}, {"rows", rows}};
  return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint parse error: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormatName) throw DataError("not an mgembed checkpoint");
    const int version = j.at("version").get<int>();
    if (version != Checkpoint::kFormatVersion) {
      throw DataError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(Checkpoint::kFormatVersion) + ")");
    }
    Checkpoint c;
    c.config = config_from_json(j.at("config"));
    c.params.theta_s = matrix_from_json(j.at("theta_s"));
    for (const auto& t : j.at("theta_d")) c.params.theta_d.push_back(matrix_from_json(t));
    const auto& o = j.at("optimizer");
    c.optimizer.method = parse_optimizer(o.at("method").get<std::string>());
    c.optimizer.learning_rate = o.at("learning_rate").get<double>();
    c.optimizer.beta1 = o.at("beta1").get<double>();
    c.optimizer.beta2 = o.at("beta2").get<double>();
    c.optimizer.epsilon = o.at("epsilon").get<double>();
    c.optimizer.shared = moments_from_json(o.at("shared"));
    for (const auto& m : o.at("domain")) c.optimizer.domain.push_back(moments_from_json(m));
    c.epoch = j.at("epoch").get<int>();
    c.step = j.at("step").get<std::int64_t>();
    c.positive_rng_states = j.at("positive_rng").get<std::vector<std::string>>();
    c.negative_rng_states = j.at("negative_rng").get<std::vector<std::string>>();
    c.dropout_rng_state = j.at("dropout_rng").get<std::string>();
    c.positive_orders = j.at("positive_orders").get<std::vector<std::vector<std::size_t>>>();
    c.positive_cursors = j.at("positive_cursors").get<std::vector<std::size_t>>();
    const auto alpha = j.at("last_alpha").get<std::vector<double>>();
    c.last_alpha = Eigen::Map<const Vector>(alpha.data(), static_cast<Index>(alpha.size()));
    c.graph_digests = j.at("graph_digests").get<std::vector<std::uint64_t>>();
    const auto& log = j.at("log");
    c.log.n_domains = log.at("n_domains").get<int>();
    c.log.wall_time_seconds = log.at("wall_time_seconds").get<double>();
    for (const auto& r : log.at("rows")) {
      c.log.rows.push_back(TrainLogRow{r.at("step").get<std::int64_t>(), r.at("epoch").get<int>(),
                                       r.at("losses").get<std::vector<double>>(),
                                       r.at("alphas").get<std::vector<double>>()});
    }
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint is missing or has malformed fields: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint has invalid values: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << checkpoint_to_json(ckpt);
    if (!out) throw DataError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_file(path)); }

}  // namespace mgembed
