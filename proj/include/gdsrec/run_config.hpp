#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "gdsrec/baselines.hpp"
#include "gdsrec/model.hpp"
#include "gdsrec/train.hpp"

namespace gdsrec {

enum class Variant { kFull, kNoRelationCoeff, kNoSocial, kNoRatingDifference, kAverageAttention, kMaxAttention };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
// Applies the variant's substitution to an otherwise complete model config.
void apply_variant(ModelConfig& config, Variant variant);

// Everything a command needs, flattened into key = value pairs.
struct RunConfig {
  std::string ratings_path;
  std::string trust_path;
  std::string dataset = "custom";  // ciao | epinions | custom; selects the K grid
  double train_fraction = 0.6;
  std::uint64_t seed = 0;
  int repeats = 5;

  ModelConfig model;
  Variant variant = Variant::kFull;
  TrainConfig train;

  MfConfig mf;

  std::string output_dir = "out";
  std::string cache_dir = "cache";
  bool allow_off_grid = false;
  bool clip = false;

  // Model config with the variant applied.
  ModelConfig effective_model() const;
  bool needs_trust() const;

  // Checks values against the experiment grids unless allow_off_grid is set.
  void validate() const;

  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
  nlohmann::json to_json() const;
};

// Keys recognised by RunConfig::set, in a stable order.
const std::vector<std::string>& run_config_keys();

// Parses `key = value` lines (# comments, blank lines allowed), or the
// "config" object of a run manifest when the file ends in .json.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text);

std::vector<int> k_grid(const std::string& dataset);
const std::vector<double>& alpha_grid();

}  // namespace gdsrec
