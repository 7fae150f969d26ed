#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gdsrec/dataset.hpp"
#include "gdsrec/metrics.hpp"
#include "gdsrec/model.hpp"

namespace gdsrec {

enum class OptimizerKind { kAdam, kSgd };

struct TrainConfig {
  double learning_rate = 5e-4;
  int batch_size = 128;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 0;
  int workers = 1;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  bool verbose = false;

  void validate() const;
};

// Stops once the monitored value has failed to improve on its best for
// `patience` successive epochs.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  // Returns true when training should stop after this epoch.
  bool update(double value);
  bool improved() const { return improved_; }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }
  int bad_epochs() const { return bad_epochs_; }

 private:
  int patience_;
  int epoch_ = -1;
  int best_epoch_ = -1;
  int bad_epochs_ = 0;
  double best_ = 0.0;
  bool improved_ = false;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_mae = 0.0;
  double val_rmse = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val_sum = 0.0;
  bool stopped_early = false;
  bool diverged = false;
};

// Mini-batch training with validation-based early stopping. On return the
// model holds the parameters of the best validation epoch. A non-finite loss
// restores the last good parameters and sets `diverged`.
TrainResult train_model(GdsRecModel& model, const ModelContext& ctx, const SplitDataset& split,
                        const TrainConfig& config);

struct MetricsReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::map<int, RankingMetrics> ranking;  // keyed by positive threshold F
  std::size_t count = 0;
};

// Generic scorer: predictions for the given records.
using PredictFn = std::function<std::vector<double>(std::span<const RatingRecord>)>;

// Rating and ranking metrics for one table. `clip` bounds predictions to
// [1,5] before measuring.
MetricsReport evaluate(const PredictFn& predict, const RatingTable& table, bool clip = false,
                       std::span<const int> thresholds = std::span<const int>(), int k = 5);

// Neighborhood sample seed used for validation and test scoring of a run.
std::uint64_t eval_sample_seed(std::uint64_t train_seed);

PredictFn model_predictor(const GdsRecModel& model, const ModelContext& ctx, std::uint64_t sample_seed,
                          int workers = 1);

}  // namespace gdsrec
