#include "rainseg/cli/run_config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "rainseg/core/binary_io.hpp"
#include "rainseg/core/error.hpp"

namespace rainseg {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& v, const std::string& key) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("bad value for " + key + ": '" + v + "'");
  return out;
}

std::vector<std::size_t> parse_list(const std::string& v, const std::string& key) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<std::size_t>(trim(item), key));
  if (out.empty()) throw ConfigError("bad value for " + key + ": empty list");
  return out;
}

std::string fmt(double v) {
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::string(buf, end);
}

std::string fmt(float v) {
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::string(buf, end);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::filesystem::path&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  std::string name;
  Setter set;
  Getter get;
};

const std::vector<Key>& keys() {
  auto size_key = [](std::string name, auto member) {
    return Key{name,
               [=](RunConfig& c, const std::string& v, const auto&) { member(c) = parse_number<std::size_t>(v, name); },
               [=](const RunConfig& c) { return std::to_string(member(c)); }};
  };
  auto float_key = [](std::string name, auto member) {
    return Key{name, [=](RunConfig& c, const std::string& v, const auto&) { member(c) = parse_number<float>(v, name); },
               [=](const RunConfig& c) { return fmt(member(c)); }};
  };
  auto double_key = [](std::string name, auto member) {
    return Key{name, [=](RunConfig& c, const std::string& v, const auto&) { member(c) = parse_number<double>(v, name); },
               [=](const RunConfig& c) { return fmt(member(c)); }};
  };
  static const std::vector<Key> table{
      {"manifest", [](RunConfig& c, const std::string& v, const auto& base) { c.manifest = v.empty() ? "" : base / v; },
       [](const RunConfig& c) { return c.manifest.string(); }},
      {"splits", [](RunConfig& c, const std::string& v, const auto& base) { c.splits = v.empty() ? "" : base / v; },
       [](const RunConfig& c) { return c.splits.string(); }},
      {"seed", [](RunConfig& c, const std::string& v, const auto&) { c.seed = parse_number<std::uint64_t>(v, "seed"); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"threads", [](RunConfig& c, const std::string& v, const auto&) { c.threads = parse_number<int>(v, "threads"); },
       [](const RunConfig& c) { return std::to_string(c.threads); }},
      size_key("patch_size", [](auto& c) -> auto& { return c.model.patch_size; }),
      {"features",
       [](RunConfig& c, const std::string& v, const auto&) { c.model.encoder_features = parse_list(v, "features"); },
       [](const RunConfig& c) {
         std::string s;
         for (const auto f : c.model.encoder_features) s += (s.empty() ? "" : ",") + std::to_string(f);
         return s;
       }},
      double_key("dropout", [](auto& c) -> auto& { return c.model.dropout_p; }),
      float_key("learning_rate", [](auto& c) -> auto& { return c.train.learning_rate; }),
      float_key("weight_decay", [](auto& c) -> auto& { return c.train.weight_decay; }),
      size_key("batch_size", [](auto& c) -> auto& { return c.train.batch_size; }),
      size_key("max_epochs", [](auto& c) -> auto& { return c.train.max_epochs; }),
      size_key("patience", [](auto& c) -> auto& { return c.train.early_stop_patience; }),
      double_key("min_delta", [](auto& c) -> auto& { return c.train.min_delta; }),
      float_key("focal_alpha", [](auto& c) -> auto& { return c.train.loss.alpha; }),
      float_key("focal_gamma", [](auto& c) -> auto& { return c.train.loss.gamma; }),
      float_key("dice_epsilon", [](auto& c) -> auto& { return c.train.loss.epsilon; }),
      float_key("lambda_focal", [](auto& c) -> auto& { return c.train.loss.lambda_fl; }),
      float_key("lambda_dice", [](auto& c) -> auto& { return c.train.loss.lambda_dice; }),
      double_key("train_fraction", [](auto& c) -> auto& { return c.fractions[0]; }),
      double_key("val_fraction", [](auto& c) -> auto& { return c.fractions[1]; }),
      double_key("test_fraction", [](auto& c) -> auto& { return c.fractions[2]; }),
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  if (manifest.empty()) throw ConfigError("config: manifest is required");
  if (threads < 0) throw ConfigError("config: threads must be non-negative");
  double sum = 0.0;
  for (const double f : fractions) {
    if (!(f >= 0.0) || !std::isfinite(f)) throw ConfigError("config: split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("config: split fractions must sum to 1, got " + fmt(sum));
  train.validate();
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig config;
  std::map<std::string, std::size_t> seen;
  std::stringstream ss(text);
  std::string line;
  for (std::size_t n = 1; std::getline(ss, line); ++n) {
    const auto body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    const std::string where = "config line " + std::to_string(n) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const auto key = trim(body.substr(0, eq));
    const auto value = trim(body.substr(eq + 1));
    const auto& table = keys();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return k.name == key; });
    if (it == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (seen.count(key)) throw ConfigError(where + "duplicate key '" + key + "'");
    seen[key] = n;
    try {
      it->set(config, value, base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  config.train.seed = config.seed;
  return config;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  return parse_run_config(io::read_text(path), path.parent_path());
}

std::string run_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

}  // namespace rainseg
