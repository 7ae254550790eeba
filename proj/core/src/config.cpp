#include "hamnet/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "hamnet/data.hpp"
#include "hamnet/errors.hpp"
#include "hamnet/tensor.hpp"

namespace hamnet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Field {
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
Field size_field(T PipelineConfig::*member) {
  return {[member](PipelineConfig& c, const std::string& k, const std::string& v) {
            c.*member = static_cast<T>(parse_size(k, v));
          },
          [member](const PipelineConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(double PipelineConfig::*member) {
  return {[member](PipelineConfig& c, const std::string& k, const std::string& v) { c.*member = parse_double(k, v); },
          [member](const PipelineConfig& c) { return fmt_double(c.*member); }};
}

Field bool_field(bool PipelineConfig::*member) {
  return {[member](PipelineConfig& c, const std::string& k, const std::string& v) { c.*member = parse_bool(k, v); },
          [member](const PipelineConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field string_field(std::string PipelineConfig::*member) {
  return {[member](PipelineConfig& c, const std::string&, const std::string& v) { c.*member = v; },
          [member](const PipelineConfig& c) { return c.*member; }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"d", size_field(&PipelineConfig::d)},
      {"heads", size_field(&PipelineConfig::heads)},
      {"text_layers", size_field(&PipelineConfig::text_layers)},
      {"vit_layers", size_field(&PipelineConfig::vit_layers)},
      {"rgcn_layers", size_field(&PipelineConfig::rgcn_layers)},
      {"interaction_rounds", size_field(&PipelineConfig::interaction_rounds)},
      {"dropout", double_field(&PipelineConfig::dropout)},
      {"learning_rate", double_field(&PipelineConfig::learning_rate)},
      {"batch_train", size_field(&PipelineConfig::batch_train)},
      {"batch_eval", size_field(&PipelineConfig::batch_eval)},
      {"epochs", size_field(&PipelineConfig::epochs)},
      {"max_len", size_field(&PipelineConfig::max_len)},
      {"seed", size_field(&PipelineConfig::seed)},
      {"max_objects", size_field(&PipelineConfig::max_objects)},
      {"patience", size_field(&PipelineConfig::patience)},
      {"clip_norm", double_field(&PipelineConfig::clip_norm)},
      {"rgcn_activation", string_field(&PipelineConfig::rgcn_activation)},
      {"gate_activation", string_field(&PipelineConfig::gate_activation)},
      {"gate_variant", string_field(&PipelineConfig::gate_variant)},
      {"relevance_variant", string_field(&PipelineConfig::relevance_variant)},
      {"text_positions", bool_field(&PipelineConfig::text_positions)},
      {"bio_constraints", bool_field(&PipelineConfig::bio_constraints)},
      {"train", string_field(&PipelineConfig::train)},
      {"val", string_field(&PipelineConfig::val)},
      {"test", string_field(&PipelineConfig::test)},
      {"meta", string_field(&PipelineConfig::meta)},
      {"checkpoint", string_field(&PipelineConfig::checkpoint)},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [k, f] : fields())
    if (k == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return out;
}

void PipelineConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, key, trim(value)); }

std::map<std::string, std::string> PipelineConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, f] : fields()) out[k] = f.get(*this);
  return out;
}

void PipelineConfig::validate() const {
  if (d == 0) throw ConfigError("d must be positive");
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("heads (" + std::to_string(heads) + ") must divide d (" + std::to_string(d) + ")");
  }
  if (max_len == 0 || max_len > kMaxSentenceLength) throw ConfigError("max_len must be in [1, 128]");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_train == 0 || batch_eval == 0) throw ConfigError("batch sizes must be positive");
  if (max_objects > kMaxObjects) throw ConfigError("max_objects must not exceed 15");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be non-negative");
  parse_activation(rgcn_activation);
  parse_activation(gate_activation);
  if (gate_variant != "sigmoid" && gate_variant != "literal") throw ConfigError("gate_variant must be sigmoid or literal");
  if (relevance_variant != "vector" && relevance_variant != "scalar") {
    throw ConfigError("relevance_variant must be vector or scalar");
  }
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  PipelineConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  const auto base = path.parent_path();
  for (std::string* p : {&cfg.train, &cfg.val, &cfg.test, &cfg.meta, &cfg.checkpoint}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
  return cfg;
}

void PipelineConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& [k, f] : fields()) out << k << " = " << f.get(*this) << '\n';
}

}  // namespace hamnet
