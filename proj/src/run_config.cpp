#include "gdsrec/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gdsrec/error.hpp"

namespace gdsrec {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoRelationCoeff: return "RC";
    case Variant::kNoSocial: return "SN";
    case Variant::kNoRatingDifference: return "RD";
    case Variant::kAverageAttention: return "avg";
    case Variant::kMaxAttention: return "max";
  }
  return "full";
}

Variant parse_variant(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (u == "full" || u == "none") return Variant::kFull;
  if (u == "rc") return Variant::kNoRelationCoeff;
  if (u == "sn") return Variant::kNoSocial;
  if (u == "rd") return Variant::kNoRatingDifference;
  if (u == "avg") return Variant::kAverageAttention;
  if (u == "max") return Variant::kMaxAttention;
  throw ConfigError("unknown variant '" + s + "' (expected full, RC, SN, RD, avg or max)");
}

void apply_variant(ModelConfig& config, Variant variant) {
  switch (variant) {
    case Variant::kFull: break;
    case Variant::kNoRelationCoeff: config.use_relationship_coeff = false; break;
    case Variant::kNoSocial: config.use_social = false; break;
    case Variant::kNoRatingDifference: config.use_rating_difference = false; break;
    case Variant::kAverageAttention: config.attention = AttentionMode::kAverage; break;
    case Variant::kMaxAttention: config.attention = AttentionMode::kMax; break;
  }
}

ModelConfig RunConfig::effective_model() const {
  ModelConfig m = model;
  apply_variant(m, variant);
  return m;
}

bool RunConfig::needs_trust() const { return effective_model().use_social; }

std::vector<int> k_grid(const std::string& dataset) {
  if (dataset == "ciao") return {5, 10, 15, 20};
  if (dataset == "epinions") return {15, 20, 25, 30};
  return {5, 10, 15, 20, 25, 30};
}

const std::vector<double>& alpha_grid() {
  static const std::vector<double> grid = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6};
  return grid;
}

namespace {

template <typename T>
bool in_grid(const std::vector<T>& grid, T value) {
  return std::any_of(grid.begin(), grid.end(), [&](T g) { return std::abs(static_cast<double>(g - value)) < 1e-12; });
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& value) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("config key '" + key + "' expects an integer, got '" + value + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("config key '" + key + "' expects true/false, got '" + value + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  mf.validate();
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0,1)");
  if (repeats <= 0) throw ConfigError("repeats must be positive");
  if (dataset != "ciao" && dataset != "epinions" && dataset != "custom")
    throw ConfigError("dataset must be ciao, epinions or custom");
  if (allow_off_grid) return;

  auto off_grid = [](const std::string& what) {
    return ConfigError(what + " is outside the experiment grid (pass --allow-off-grid to override)");
  };
  if (!in_grid<double>({0.6, 0.8}, train_fraction)) throw off_grid("train_fraction");
  if (!in_grid<int>({16, 32, 64, 128, 256, 512}, model.dim)) throw off_grid("dim");
  if (!in_grid<int>(k_grid(dataset), model.reservation)) throw off_grid("K");
  if (!in_grid<int>({0, 1, 2, 3}, model.delta)) throw off_grid("delta");
  if (!in_grid<double>(alpha_grid(), model.alpha)) throw off_grid("alpha");
  if (!in_grid<double>({1e-6, 1e-5, 1e-4, 5e-4}, train.learning_rate)) throw off_grid("learning_rate");
  if (!in_grid<int>({64, 128, 256}, train.batch_size)) throw off_grid("batch_size");
}

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = {
      "ratings", "trust", "dataset", "train_fraction", "seed", "repeats",
      "dim", "k", "social_k", "delta", "alpha", "social_weight", "attention", "activation",
      "use_social", "use_relationship_coeff", "use_rating_difference", "attention_hidden", "fusion_hidden",
      "embedding_init", "l2", "variant",
      "learning_rate", "batch_size", "max_epochs", "patience", "workers", "optimizer",
      "mf_dim", "mf_learning_rate", "mf_reg", "mf_max_epochs", "mf_init",
      "output_dir", "cache_dir", "allow_off_grid", "clip"};
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "ratings") ratings_path = value;
  else if (key == "trust") trust_path = value;
  else if (key == "dataset") dataset = value;
  else if (key == "train_fraction") train_fraction = to_double(key, value);
  else if (key == "seed") seed = static_cast<std::uint64_t>(to_int(key, value));
  else if (key == "repeats") repeats = static_cast<int>(to_int(key, value));
  else if (key == "dim") model.dim = static_cast<int>(to_int(key, value));
  else if (key == "k") model.reservation = static_cast<int>(to_int(key, value));
  else if (key == "social_k") model.social_reservation = static_cast<int>(to_int(key, value));
  else if (key == "delta") model.delta = static_cast<int>(to_int(key, value));
  else if (key == "alpha") model.alpha = to_double(key, value);
  else if (key == "social_weight") model.social_weight = to_double(key, value);
  else if (key == "attention") model.attention = parse_attention_mode(value);
  else if (key == "activation") model.activation = parse_activation(value);
  else if (key == "use_social") model.use_social = to_bool(key, value);
  else if (key == "use_relationship_coeff") model.use_relationship_coeff = to_bool(key, value);
  else if (key == "use_rating_difference") model.use_rating_difference = to_bool(key, value);
  else if (key == "attention_hidden") model.attention_hidden = static_cast<int>(to_int(key, value));
  else if (key == "fusion_hidden") model.fusion_hidden = static_cast<int>(to_int(key, value));
  else if (key == "embedding_init") model.embedding_init = to_double(key, value);
  else if (key == "l2") model.l2 = to_double(key, value);
  else if (key == "variant") variant = parse_variant(value);
  else if (key == "learning_rate") train.learning_rate = to_double(key, value);
  else if (key == "batch_size") train.batch_size = static_cast<int>(to_int(key, value));
  else if (key == "max_epochs") train.max_epochs = static_cast<int>(to_int(key, value));
  else if (key == "patience") {
    train.patience = static_cast<int>(to_int(key, value));
    mf.patience = train.patience;
  }
  else if (key == "workers") train.workers = static_cast<int>(to_int(key, value));
  else if (key == "optimizer") {
    if (value == "adam") train.optimizer = OptimizerKind::kAdam;
    else if (value == "sgd") train.optimizer = OptimizerKind::kSgd;
    else throw ConfigError("optimizer must be adam or sgd");
  }
  else if (key == "mf_dim") mf.dim = static_cast<int>(to_int(key, value));
  else if (key == "mf_learning_rate") mf.learning_rate = to_double(key, value);
  else if (key == "mf_reg") mf.reg = to_double(key, value);
  else if (key == "mf_max_epochs") mf.max_epochs = static_cast<int>(to_int(key, value));
  else if (key == "mf_init") mf.init_scale = to_double(key, value);
  else if (key == "output_dir") output_dir = value;
  else if (key == "cache_dir") cache_dir = value;
  else if (key == "allow_off_grid") allow_off_grid = to_bool(key, value);
  else if (key == "clip") clip = to_bool(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> m;
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  m["ratings"] = ratings_path;
  m["trust"] = trust_path;
  m["dataset"] = dataset;
  m["train_fraction"] = format_double(train_fraction);
  m["seed"] = std::to_string(seed);
  m["repeats"] = std::to_string(repeats);
  m["dim"] = std::to_string(model.dim);
  m["k"] = std::to_string(model.reservation);
  m["social_k"] = std::to_string(model.social_reservation);
  m["delta"] = std::to_string(model.delta);
  m["alpha"] = format_double(model.alpha);
  m["social_weight"] = format_double(model.social_weight);
  m["attention"] = to_string(model.attention);
  m["activation"] = to_string(model.activation);
  m["use_social"] = b(model.use_social);
  m["use_relationship_coeff"] = b(model.use_relationship_coeff);
  m["use_rating_difference"] = b(model.use_rating_difference);
  m["attention_hidden"] = std::to_string(model.attention_hidden);
  m["fusion_hidden"] = std::to_string(model.fusion_hidden);
  m["embedding_init"] = format_double(model.embedding_init);
  m["l2"] = format_double(model.l2);
  m["variant"] = to_string(variant);
  m["learning_rate"] = format_double(train.learning_rate);
  m["batch_size"] = std::to_string(train.batch_size);
  m["max_epochs"] = std::to_string(train.max_epochs);
  m["patience"] = std::to_string(train.patience);
  m["workers"] = std::to_string(train.workers);
  m["optimizer"] = train.optimizer == OptimizerKind::kAdam ? "adam" : "sgd";
  m["mf_dim"] = std::to_string(mf.dim);
  m["mf_learning_rate"] = format_double(mf.learning_rate);
  m["mf_reg"] = format_double(mf.reg);
  m["mf_max_epochs"] = std::to_string(mf.max_epochs);
  m["mf_init"] = format_double(mf.init_scale);
  m["output_dir"] = output_dir;
  m["cache_dir"] = cache_dir;
  m["allow_off_grid"] = b(allow_off_grid);
  m["clip"] = b(clip);
  return m;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : to_map()) j[k] = v;
  return j;
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (path.extension() == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid JSON config: ") + e.what());
    }
    const auto& obj = j.contains("config") ? j["config"] : j;
    RunConfig cfg;
    for (const auto& [k, v] : obj.items()) cfg.set(k, v.is_string() ? v.get<std::string>() : v.dump());
    return cfg;
  }
  return parse_run_config(ss.str());
}

}  // namespace gdsrec
