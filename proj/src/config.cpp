#include "mtda/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mtda/errors.hpp"

namespace mtda {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const std::string t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("invalid value '" + text + "' for '" + key + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "on" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "off" || t == "no") return false;
  throw ConfigError("invalid boolean '" + text + "' for '" + key + "'");
}

BetaGranularity parse_granularity(const std::string& t) {
  if (t == "epoch") return BetaGranularity::epoch;
  if (t == "batch") return BetaGranularity::batch;
  throw ConfigError("unknown beta_granularity '" + t + "' (expected epoch or batch)");
}

std::string granularity_name(BetaGranularity g) { return g == BetaGranularity::epoch ? "epoch" : "batch"; }

KdConvention parse_convention(const std::string& t) {
  if (t == "student_unit_temperature") return KdConvention::student_unit_temperature;
  if (t == "both_tempered_scaled") return KdConvention::both_tempered_scaled;
  throw ConfigError("unknown kd_convention '" + t + "'");
}

std::string convention_name(KdConvention c) {
  return c == KdConvention::student_unit_temperature ? "student_unit_temperature" : "both_tempered_scaled";
}

Preset preset_value(const std::string& t) {
  try {
    return parse_preset(t);
  } catch (const Error&) {
    throw ConfigError("unknown preset '" + t + "'");
  }
}

// Ordered (key, printed value) pairs; the single source of field names.
std::vector<std::pair<std::string, std::string>> train_fields(const TrainConfig& c) {
  std::string order;
  for (std::size_t i = 0; i < c.target_order.size(); ++i) order += (i ? "," : "") + std::to_string(c.target_order[i]);
  return {
      {"mode", to_string(c.mode)},
      {"epochs", std::to_string(c.epochs)},
      {"batch_size", std::to_string(c.batch_size)},
      {"tau", format_double(c.weights.tau)},
      {"gamma", format_double(c.weights.gamma)},
      {"alpha", format_double(c.weights.alpha)},
      {"s", format_double(c.s)},
      {"f", format_double(c.f)},
      {"uda_learning_rate", format_double(c.uda_learning_rate)},
      {"kd_learning_rate", format_double(c.kd_learning_rate)},
      {"weight_decay", format_double(c.weight_decay)},
      {"momentum", format_double(c.momentum)},
      {"seed", std::to_string(c.seed)},
      {"k_splits", c.k_splits ? std::to_string(*c.k_splits) : "none"},
      {"target_order", order},
      {"consistency_enabled", c.consistency_enabled ? "true" : "false"},
      {"beta_granularity", granularity_name(c.beta_granularity)},
      {"distill_updates_teacher", c.distill_updates_teacher ? "true" : "false"},
      {"kd_convention", convention_name(c.kd_convention)},
      {"teacher_preset", to_string(c.teacher_preset)},
      {"student_preset", to_string(c.student_preset)},
      {"teacher_feature_dim", std::to_string(c.teacher_feature_dim)},
      {"student_feature_dim", std::to_string(c.student_feature_dim)},
  };
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void apply_train_key(TrainConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "mode") {
    try {
      c.mode = parse_train_mode(v);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "epochs") {
    c.epochs = parse_number<int>(key, v);
  } else if (key == "batch_size") {
    c.batch_size = parse_number<std::size_t>(key, v);
  } else if (key == "tau") {
    c.weights.tau = parse_number<double>(key, v);
  } else if (key == "gamma") {
    c.weights.gamma = parse_number<double>(key, v);
  } else if (key == "alpha") {
    c.weights.alpha = parse_number<double>(key, v);
  } else if (key == "s") {
    c.s = parse_number<double>(key, v);
  } else if (key == "f") {
    c.f = parse_number<double>(key, v);
  } else if (key == "uda_learning_rate") {
    c.uda_learning_rate = parse_number<double>(key, v);
  } else if (key == "kd_learning_rate") {
    c.kd_learning_rate = parse_number<double>(key, v);
  } else if (key == "weight_decay") {
    c.weight_decay = parse_number<double>(key, v);
  } else if (key == "momentum") {
    c.momentum = parse_number<double>(key, v);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, v);
  } else if (key == "k_splits") {
    if (v.empty() || v == "none" || v == "null")
      c.k_splits.reset();
    else
      c.k_splits = parse_number<std::size_t>(key, v);
  } else if (key == "target_order") {
    c.target_order.clear();
    for (const auto& item : split_list(v)) c.target_order.push_back(parse_number<std::size_t>(key, item));
  } else if (key == "consistency_enabled") {
    c.consistency_enabled = parse_bool(key, v);
  } else if (key == "beta_granularity") {
    c.beta_granularity = parse_granularity(v);
  } else if (key == "distill_updates_teacher") {
    c.distill_updates_teacher = parse_bool(key, v);
  } else if (key == "kd_convention") {
    c.kd_convention = parse_convention(v);
  } else if (key == "teacher_preset") {
    c.teacher_preset = preset_value(v);
  } else if (key == "student_preset") {
    c.student_preset = preset_value(v);
  } else if (key == "teacher_feature_dim") {
    c.teacher_feature_dim = parse_number<std::size_t>(key, v);
  } else if (key == "student_feature_dim") {
    c.student_feature_dim = parse_number<std::size_t>(key, v);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

nlohmann::json config_to_json(const TrainConfig& c) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [key, text] : train_fields(c)) doc[key] = text;
  // numeric fields keep their JSON types
  doc["epochs"] = c.epochs;
  doc["batch_size"] = c.batch_size;
  doc["seed"] = c.seed;
  for (const char* k : {"tau", "gamma", "alpha", "s", "f", "uda_learning_rate", "kd_learning_rate", "weight_decay",
                        "momentum"})
    doc[k] = parse_number<double>(k, doc[k].get<std::string>());
  doc["k_splits"] = c.k_splits ? nlohmann::json(*c.k_splits) : nlohmann::json(nullptr);
  doc["target_order"] = c.target_order;
  doc["consistency_enabled"] = c.consistency_enabled;
  doc["distill_updates_teacher"] = c.distill_updates_teacher;
  doc["teacher_feature_dim"] = c.teacher_feature_dim;
  doc["student_feature_dim"] = c.student_feature_dim;
  return doc;
}

TrainConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  TrainConfig c;
  for (const auto& [key, value] : doc.items()) {
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_null()) {
      text = "none";
    } else if (value.is_array()) {
      for (const auto& item : value) text += (text.empty() ? "" : ",") + item.dump();
    } else if (value.is_number_float()) {
      text = format_double(value.get<double>());
    } else {
      text = value.dump();
    }
    apply_train_key(c, key, text);
  }
  return c;
}

RunManifest parse_manifest(const std::string& ini_text, const std::filesystem::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunManifest m;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("config key '" + section + "' must sit inside a [train], [data] or [run] section");
    for (const auto& [key, node] : body) {
      const std::string value = node.get_value<std::string>();
      if (section == "train") {
        apply_train_key(m.config, key, value);
      } else if (section == "data") {
        if (key == "source") {
          m.source = resolve(base_dir, trim(value));
        } else if (key == "targets") {
          m.targets.clear();
          for (const auto& p : split_list(value)) m.targets.push_back(resolve(base_dir, p));
        } else if (key == "eval") {
          m.eval.clear();
          for (const auto& p : split_list(value)) m.eval.push_back(resolve(base_dir, p));
        } else {
          throw ConfigError("unknown config key 'data." + key + "'");
        }
      } else if (section == "run") {
        if (key == "output_dir")
          m.output_dir = resolve(base_dir, trim(value));
        else if (key == "replications")
          m.replications = parse_number<std::size_t>(key, value);
        else
          throw ConfigError("unknown config key 'run." + key + "'");
      } else {
        throw ConfigError("unknown config section '[" + section + "]'");
      }
    }
  }
  if (m.replications < 1) throw ConfigError("replications must be >= 1");
  if (!m.eval.empty() && m.eval.size() != m.targets.size())
    throw ConfigError("data.eval must list one path per target");
  return m;
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  RunManifest m = parse_manifest(ss.str(), path.parent_path());
  m.config_path = path;
  return m;
}

std::string manifest_to_ini(const RunManifest& m) {
  std::ostringstream out;
  out << "[train]\n";
  for (const auto& [key, value] : train_fields(m.config)) out << key << " = " << value << '\n';
  auto join = [](const std::vector<std::filesystem::path>& ps) {
    std::string s;
    for (std::size_t i = 0; i < ps.size(); ++i) s += (i ? "," : "") + ps[i].string();
    return s;
  };
  out << "\n[data]\n";
  out << "source = " << m.source.string() << '\n';
  out << "targets = " << join(m.targets) << '\n';
  if (!m.eval.empty()) out << "eval = " << join(m.eval) << '\n';
  out << "\n[run]\n";
  out << "output_dir = " << m.output_dir.string() << '\n';
  out << "replications = " << m.replications << '\n';
  return out.str();
}

}  // namespace mtda
