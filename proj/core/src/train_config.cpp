#include "mgembed/train_config.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

#include "mgembed/error.hpp"
#include "mgembed/graph_io.hpp"

namespace mgembed {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  text = trim(text);
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("bad value '" + std::string(text) + "' for '" + std::string(key) + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument("bad boolean '" + std::string(text) + "' for '" + std::string(key) + "'");
}

std::pair<std::string_view, std::string_view> split_pair(std::string_view key, std::string_view text) {
  auto comma = text.find(',');
  if (comma == std::string_view::npos) {
    throw std::invalid_argument("'" + std::string(key) + "' expects two comma-separated values");
  }
  return {trim(text.substr(0, comma)), trim(text.substr(comma + 1))};
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (negatives < 1) throw std::invalid_argument("negatives must be at least 1");
  if (dim_shared < 1 || dim_specific < 1) throw std::invalid_argument("dimensions must be positive");
  if (!(dropout.shared >= 0.0 && dropout.shared < 1.0) || !(dropout.specific >= 0.0 && dropout.specific < 1.0)) {
    throw std::invalid_argument("dropout rates must lie in [0, 1)");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (alpha_mode == AlphaMode::kFixed && !(fixed_alpha >= 0.0 && fixed_alpha <= 1.0)) {
    throw std::invalid_argument("fixed alpha must lie in [0, 1]");
  }
  if (fw_iterations < 1 || !(fw_tolerance >= 0.0)) throw std::invalid_argument("bad Frank-Wolfe settings");
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
}

std::string alpha_mode_string(const TrainConfig& cfg) {
  if (cfg.alpha_mode == AlphaMode::kMgda) return "mgda";
  return "fixed:" + format_double(cfg.fixed_alpha);
}

void set_alpha_mode(TrainConfig& cfg, std::string_view text) {
  text = trim(text);
  if (text == "mgda") {
    cfg.alpha_mode = AlphaMode::kMgda;
    return;
  }
  if (text.starts_with("fixed:")) {
    const double a = parse_number<double>("alpha", text.substr(6));
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("fixed alpha must lie in [0, 1]");
    cfg.alpha_mode = AlphaMode::kFixed;
    cfg.fixed_alpha = a;
    return;
  }
  throw std::invalid_argument("alpha must be 'mgda' or 'fixed:<value>'");
}

void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (key == "epochs") {
    cfg.epochs = parse_number<int>(key, value);
  } else if (key == "batch_size") {
    cfg.batch_size = parse_number<std::size_t>(key, value);
  } else if (key == "negatives") {
    cfg.negatives = parse_number<int>(key, value);
  } else if (key == "dim_shared") {
    cfg.dim_shared = parse_number<Index>(key, value);
  } else if (key == "dim_specific") {
    cfg.dim_specific = parse_number<Index>(key, value);
  } else if (key == "dims") {
    auto [s, e] = split_pair(key, value);
    cfg.dim_shared = parse_number<Index>(key, s);
    cfg.dim_specific = parse_number<Index>(key, e);
  } else if (key == "dropout_shared") {
    cfg.dropout.shared = parse_number<double>(key, value);
  } else if (key == "dropout_specific") {
    cfg.dropout.specific = parse_number<double>(key, value);
  } else if (key == "dropout") {
    auto [s, p] = split_pair(key, value);
    cfg.dropout.shared = parse_number<double>(key, s);
    cfg.dropout.specific = parse_number<double>(key, p);
  } else if (key == "optimizer") {
    cfg.optimizer = parse_optimizer(std::string(value));
  } else if (key == "lr" || key == "learning_rate") {
    cfg.learning_rate = parse_number<double>(key, value);
  } else if (key == "alpha") {
    set_alpha_mode(cfg, value);
  } else if (key == "neg_distribution") {
    cfg.neg_distribution = parse_negative_distribution(std::string(value));
  } else if (key == "step_on_normalized") {
    cfg.shared_step = parse_bool(key, value) ? SharedStep::kNormalized : SharedStep::kUnnormalized;
  } else if (key == "fw_iterations") {
    cfg.fw_iterations = parse_number<int>(key, value);
  } else if (key == "fw_tolerance") {
    cfg.fw_tolerance = parse_number<double>(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "threads") {
    cfg.threads = parse_number<int>(key, value);
  } else {
    throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
  }
}

void apply_config_text(TrainConfig& cfg, std::string_view text, const std::string& source) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    auto line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected 'key = value'");
    try {
      set_config_value(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
}

TrainConfig load_config_file(const std::string& path) {
  TrainConfig cfg;
  apply_config_text(cfg, read_file(path), path);
  return cfg;
}

std::string to_config_text(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "epochs = " << cfg.epochs << '\n'
     << "batch_size = " << cfg.batch_size << '\n'
     << "negatives = " << cfg.negatives << '\n'
     << "dim_shared = " << cfg.dim_shared << '\n'
     << "dim_specific = " << cfg.dim_specific << '\n'
     << "dropout_shared = " << format_double(cfg.dropout.shared) << '\n'
     << "dropout_specific = " << format_double(cfg.dropout.specific) << '\n'
     << "optimizer = " << to_string(cfg.optimizer) << '\n'
     << "lr = " << format_double(cfg.learning_rate) << '\n'
     << "alpha = " << alpha_mode_string(cfg) << '\n'
     << "neg_distribution = " << to_string(cfg.neg_distribution) << '\n'
     << "step_on_normalized = " << (cfg.shared_step == SharedStep::kNormalized ? "true" : "false") << '\n'
     << "fw_iterations = " << cfg.fw_iterations << '\n'
     << "fw_tolerance = " << format_double(cfg.fw_tolerance) << '\n'
     << "seed = " << cfg.seed << '\n'
     << "threads = " << cfg.threads << '\n';
  return os.str();
}

}  // namespace mgembed
