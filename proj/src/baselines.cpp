#include "gdsrec/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "gdsrec/error.hpp"

namespace gdsrec {

std::string to_string(MfKind kind) { return kind == MfKind::kPmf ? "pmf" : "funksvd"; }

MfKind parse_mf_kind(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "pmf") return MfKind::kPmf;
  if (l == "funksvd" || l == "svd") return MfKind::kFunkSvd;
  throw ConfigError("unknown baseline '" + s + "' (expected pmf or funksvd)");
}

void MfConfig::validate() const {
  if (dim <= 0) throw ConfigError("baseline dimension must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("baseline learning rate must be positive");
  if (!(reg >= 0.0)) throw ConfigError("baseline regularisation must be non-negative");
  if (max_epochs <= 0 || patience <= 0) throw ConfigError("baseline epochs and patience must be positive");
}

MfParams::MfParams(MfKind k, int d, std::int32_t n_users, std::int32_t n_items)
    : kind(k),
      dim(d),
      user_factors(static_cast<std::size_t>(n_users) * static_cast<std::size_t>(d), 0.0),
      item_factors(static_cast<std::size_t>(n_items) * static_cast<std::size_t>(d), 0.0),
      user_bias(static_cast<std::size_t>(n_users), 0.0),
      item_bias(static_cast<std::size_t>(n_items), 0.0) {}

double MfParams::predict(std::int32_t u, std::int32_t v) const {
  const auto p = user(u);
  const auto q = item(v);
  double dot = 0.0;
  for (int f = 0; f < dim; ++f) dot += p[static_cast<std::size_t>(f)] * q[static_cast<std::size_t>(f)];
  if (kind == MfKind::kPmf) return dot;
  return global_mean + user_bias[static_cast<std::size_t>(u)] + item_bias[static_cast<std::size_t>(v)] + dot;
}

double mf_sample_loss(const MfParams& params, const RatingRecord& r, double reg) {
  const double e = r.rating - params.predict(r.user, r.item);
  double norm = 0.0;
  for (double x : params.user(r.user)) norm += x * x;
  for (double x : params.item(r.item)) norm += x * x;
  if (params.kind == MfKind::kFunkSvd) {
    const double bu = params.user_bias[static_cast<std::size_t>(r.user)];
    const double bv = params.item_bias[static_cast<std::size_t>(r.item)];
    norm += bu * bu + bv * bv;
  }
  return 0.5 * e * e + 0.5 * reg * norm;
}

MfGradient mf_sample_gradient(const MfParams& params, const RatingRecord& r, double reg) {
  const double e = r.rating - params.predict(r.user, r.item);
  const auto p = params.user(r.user);
  const auto q = params.item(r.item);
  MfGradient g;
  g.user.resize(p.size());
  g.item.resize(q.size());
  for (std::size_t f = 0; f < p.size(); ++f) {
    g.user[f] = -e * q[f] + reg * p[f];
    g.item[f] = -e * p[f] + reg * q[f];
  }
  if (params.kind == MfKind::kFunkSvd) {
    g.user_bias = -e + reg * params.user_bias[static_cast<std::size_t>(r.user)];
    g.item_bias = -e + reg * params.item_bias[static_cast<std::size_t>(r.item)];
  }
  return g;
}

void mf_sgd_step(MfParams& params, const RatingRecord& r, double learning_rate, double reg) {
  const auto g = mf_sample_gradient(params, r, reg);
  auto p = params.user(r.user);
  auto q = params.item(r.item);
  for (std::size_t f = 0; f < p.size(); ++f) {
    p[f] -= learning_rate * g.user[f];
    q[f] -= learning_rate * g.item[f];
  }
  if (params.kind == MfKind::kFunkSvd) {
    params.user_bias[static_cast<std::size_t>(r.user)] -= learning_rate * g.user_bias;
    params.item_bias[static_cast<std::size_t>(r.item)] -= learning_rate * g.item_bias;
  }
}

PredictFn mf_predictor(const MfParams& params) {
  return [&params](std::span<const RatingRecord> records) {
    std::vector<double> out(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) out[i] = params.predict(records[i].user, records[i].item);
    return out;
  };
}

MfTrainResult train_mf(MfKind kind, const SplitDataset& split, const MfConfig& config) {
  config.validate();
  if (split.train.empty()) throw DataError("training split is empty");
  if (split.validation.empty()) throw DataError("validation split is empty");

  MfTrainResult result;
  auto& params = result.params;
  params = MfParams(kind, config.dim, split.train.n_users(), split.train.n_items());
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> init(-config.init_scale, config.init_scale);
  for (auto& x : params.user_factors) x = init(rng);
  for (auto& x : params.item_factors) x = init(rng);
  if (kind == MfKind::kFunkSvd) {
    double total = 0.0;
    for (const auto& r : split.train.records) total += r.rating;
    params.global_mean = total / static_cast<double>(split.train.size());
  }

  std::vector<RatingRecord> order = split.train.records;
  EarlyStopping stopper(config.patience);
  MfParams best = params;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    double loss = 0.0;
    for (const auto& r : order) {
      loss += mf_sample_loss(params, r, config.reg);
      mf_sgd_step(params, r, config.learning_rate, config.reg);
    }
    if (!std::isfinite(loss)) {
      result.diverged = true;
      break;
    }
    const auto val = evaluate(mf_predictor(params), split.validation);
    if (!std::isfinite(val.mae + val.rmse)) {
      result.diverged = true;
      break;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss / static_cast<double>(order.size());
    rec.val_mae = val.mae;
    rec.val_rmse = val.rmse;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);
    const bool stop = stopper.update(val.mae + val.rmse);
    if (stopper.improved()) best = params;
    if (config.verbose)
      std::fprintf(stderr, "[%s] epoch %3d  loss %.5f  val MAE %.4f RMSE %.4f%s\n", to_string(kind).c_str(), epoch,
                   rec.train_loss, val.mae, val.rmse, stopper.improved() ? " *" : "");
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  params = best;
  result.best_epoch = stopper.best_epoch();
  return result;
}

}  // namespace gdsrec
