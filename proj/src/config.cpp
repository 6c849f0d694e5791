#include <fstream>
#include <sstream>

#include "ducd/train.hpp"

namespace ducd {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(cat("config: bad numeric value '", v, "' for key ",
                          key));
  }
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError(cat("config: bad integer value '", v, "' for key ",
                          key));
  }
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

TrainConfig parse_train_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(cat("config line ", lineno,
                            ": expected 'key = value', got '", line, "'"));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "scales")
      cfg.model.scales = static_cast<int>(to_int(key, value));
    else if (key == "base_channels")
      cfg.model.base_channels = static_cast<int>(to_int(key, value));
    else if (key == "margin")
      cfg.model.margin = to_double(key, value);
    else if (key == "threshold")
      cfg.model.threshold = to_double(key, value);
    else if (key == "variant")
      cfg.model.variant = variant_from_string(value);
    else if (key == "attention_cap")
      cfg.model.attention_cap = to_int(key, value);
    else if (key == "lr")
      cfg.lr = to_double(key, value);
    else if (key == "epochs")
      cfg.epochs = static_cast<int>(to_int(key, value));
    else if (key == "batch_size")
      cfg.batch_size = static_cast<int>(to_int(key, value));
    else if (key == "seed")
      cfg.seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "data_root")
      cfg.data_root = value;
    else if (key == "out_dir")
      cfg.out_dir = value;
    else
      throw ConfigError(cat("config line ", lineno, ": unknown key '", key,
                            "'"));
  }
  cfg.validate();
  return cfg;
}

TrainConfig parse_train_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(cat("cannot open config file: ", path));
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_train_config_text(ss.str());
}

std::string serialize_train_config(const TrainConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "scales = " << cfg.model.scales << "\n";
  os << "base_channels = " << cfg.model.base_channels << "\n";
  os << "margin = " << cfg.model.margin << "\n";
  os << "threshold = " << cfg.model.threshold << "\n";
  os << "variant = " << to_string(cfg.model.variant) << "\n";
  os << "attention_cap = " << cfg.model.attention_cap << "\n";
  os << "lr = " << cfg.lr << "\n";
  os << "epochs = " << cfg.epochs << "\n";
  os << "batch_size = " << cfg.batch_size << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "data_root = " << cfg.data_root << "\n";
  os << "out_dir = " << cfg.out_dir << "\n";
  return os.str();
}

}  // namespace ducd
