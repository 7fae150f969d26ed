#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gdsrec/dataset.hpp"
#include "gdsrec/train.hpp"

namespace gdsrec {

enum class MfKind { kPmf, kFunkSvd };

std::string to_string(MfKind kind);
MfKind parse_mf_kind(const std::string& s);

struct MfConfig {
  int dim = 10;
  double learning_rate = 0.01;
  double reg = 0.05;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 0;
  double init_scale = 0.1;  // factors ~ U[-a, a]
  bool verbose = false;

  void validate() const;
};

// Factor model shared by both baselines. PMF predicts p_u.q_v; FunkSVD adds
// the global mean and per-user / per-item biases.
struct MfParams {
  MfKind kind = MfKind::kPmf;
  int dim = 0;
  std::vector<double> user_factors;  // n_users x dim
  std::vector<double> item_factors;  // n_items x dim
  double global_mean = 0.0;
  std::vector<double> user_bias;
  std::vector<double> item_bias;

  MfParams() = default;
  MfParams(MfKind kind, int dim, std::int32_t n_users, std::int32_t n_items);

  double predict(std::int32_t u, std::int32_t v) const;
  std::span<double> user(std::int32_t u) { return {user_factors.data() + u * dim, static_cast<std::size_t>(dim)}; }
  std::span<double> item(std::int32_t v) { return {item_factors.data() + v * dim, static_cast<std::size_t>(dim)}; }
  std::span<const double> user(std::int32_t u) const {
    return {user_factors.data() + u * dim, static_cast<std::size_t>(dim)};
  }
  std::span<const double> item(std::int32_t v) const {
    return {item_factors.data() + v * dim, static_cast<std::size_t>(dim)};
  }
};

// Per-sample objective 1/2 (r - rhat)^2 + reg/2 (|p_u|^2 + |q_v|^2 + b_u^2 + b_v^2).
double mf_sample_loss(const MfParams& params, const RatingRecord& r, double reg);

struct MfGradient {
  std::vector<double> user;
  std::vector<double> item;
  double user_bias = 0.0;
  double item_bias = 0.0;
};
MfGradient mf_sample_gradient(const MfParams& params, const RatingRecord& r, double reg);

// One stochastic gradient step on a single rating.
void mf_sgd_step(MfParams& params, const RatingRecord& r, double learning_rate, double reg);

struct MfTrainResult {
  MfParams params;
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  bool stopped_early = false;
  bool diverged = false;
};

MfTrainResult train_mf(MfKind kind, const SplitDataset& split, const MfConfig& config);
inline MfTrainResult train_pmf(const SplitDataset& split, const MfConfig& config) {
  return train_mf(MfKind::kPmf, split, config);
}
inline MfTrainResult train_funksvd(const SplitDataset& split, const MfConfig& config) {
  return train_mf(MfKind::kFunkSvd, split, config);
}

PredictFn mf_predictor(const MfParams& params);

}  // namespace gdsrec
