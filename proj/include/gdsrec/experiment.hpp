#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gdsrec/baselines.hpp"
#include "gdsrec/graph.hpp"
#include "gdsrec/run_config.hpp"
#include "gdsrec/train.hpp"

namespace gdsrec {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 14695981039346656037ULL);
std::string hex64(std::uint64_t x);

enum class CacheMode {
  kBuild,    // reuse cached artifacts, build and store missing ones
  kRequire,  // fail with DataError when an artifact is missing
  kIgnore,   // build in memory, touch nothing on disk
};

// Everything derived from the input files that a run consumes.
struct PreparedData {
  RatingTable ratings;
  TrustEdges trust;
  bool trust_loaded = false;
  SplitDataset split;
  DecentralizedStats stats;
  InteractionGraph graph;
  SocialGraph social;
  // Cache keys (hex): split, stats, interaction, social.
  nlohmann::json keys = nlohmann::json::object();
  std::vector<std::string> cache_hits;
  std::vector<std::string> cache_writes;

  ModelContext context() const { return ModelContext{&graph, &social, &stats}; }
};

PreparedData prepare_data(const RunConfig& config, CacheMode mode);

struct RunResult {
  std::uint64_t seed = 0;
  MetricsReport validation;
  MetricsReport test;
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  bool stopped_early = false;
  bool diverged = false;
};

inline constexpr int kThresholds[] = {3, 4};

// One training run of the configured model with the given seed. When `out`
// is non-null the trained model is moved into it.
RunResult run_model(const RunConfig& config, const PreparedData& data, std::uint64_t seed,
                    std::optional<GdsRecModel>* out = nullptr);
RunResult run_baseline(const RunConfig& config, const PreparedData& data, MfKind kind, std::uint64_t seed,
                       MfParams* out = nullptr);

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};
Aggregate aggregate(const std::vector<double>& xs);

// Flat metric columns used by every report.
const std::vector<std::string>& metric_columns();
std::vector<double> metric_row(const RunResult& r);
nlohmann::json run_json(const RunResult& r);

// Writes metrics.json, metrics.csv and history.csv for a set of repeats.
void write_run_reports(const std::filesystem::path& dir, const std::vector<RunResult>& runs,
                       const nlohmann::json& extra = nlohmann::json::object());
void write_manifest(const std::filesystem::path& dir, const std::string& command, const RunConfig& config,
                    const nlohmann::json& extra = nlohmann::json::object());

// Command implementations. Each returns a process exit code and throws
// ConfigError / DataError for the caller to map.
int command_prepare(const RunConfig& config);
int command_train(const RunConfig& config);
int command_eval(const RunConfig& config, const std::filesystem::path& checkpoint);
int command_ablate(RunConfig config, Variant variant);
int command_sweep(RunConfig config, const std::string& param);
int command_baseline(const RunConfig& config, MfKind kind);
int command_score(const RunConfig& config, const std::filesystem::path& checkpoint,
                  const std::filesystem::path& pairs, const std::filesystem::path& out);

struct SweepRow {
  double value = 0.0;
  std::vector<RunResult> runs;
  double val_sum_mean = 0.0;
};
struct SweepResult {
  std::string param;
  std::vector<SweepRow> rows;
  std::size_t best = 0;  // index of the row with the lowest mean validation MAE+RMSE
};
std::vector<double> sweep_values(const std::string& param, const std::string& dataset);
SweepResult run_sweep(RunConfig config, const std::string& param);

// Loads a model checkpoint written by `train`, returning the stored config.
RunConfig checkpoint_config(const std::filesystem::path& checkpoint);

}  // namespace gdsrec
