#include "gdsrec/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <thread>

#include "gdsrec/error.hpp"

namespace gdsrec {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  if (max_epochs <= 0) throw ConfigError("max_epochs must be positive");
  if (patience <= 0) throw ConfigError("patience must be positive");
  if (workers <= 0) throw ConfigError("workers must be positive");
}

bool EarlyStopping::update(double value) {
  ++epoch_;
  improved_ = best_epoch_ < 0 || value < best_;
  if (improved_) {
    best_ = value;
    best_epoch_ = epoch_;
    bad_epochs_ = 0;
    return false;
  }
  ++bad_epochs_;
  return bad_epochs_ >= patience_;
}

std::uint64_t eval_sample_seed(std::uint64_t train_seed) { return mix_seed(train_seed, 0x73616d70); }

PredictFn model_predictor(const GdsRecModel& model, const ModelContext& ctx, std::uint64_t sample_seed,
                          int workers) {
  return [&model, ctx, sample_seed, workers](std::span<const RatingRecord> records) {
    return predict_pairs(model, ctx, records, sample_seed, workers);
  };
}

MetricsReport evaluate(const PredictFn& predict, const RatingTable& table, bool clip,
                       std::span<const int> thresholds, int k) {
  if (table.empty()) throw DataError("cannot evaluate an empty table");
  auto predictions = predict(table.records);
  if (clip)
    for (auto& p : predictions) p = std::clamp(p, static_cast<double>(kMinRating), static_cast<double>(kMaxRating));
  std::vector<double> truth(table.size());
  std::vector<ScoredEntry> entries(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& r = table.records[i];
    truth[i] = r.rating;
    entries[i] = {r.user, r.item, static_cast<double>(r.rating), predictions[i]};
  }
  MetricsReport report;
  const auto rating = evaluate_rating(predictions, truth);
  report.mae = rating.mae;
  report.rmse = rating.rmse;
  report.count = table.size();
  for (int f : thresholds) report.ranking[f] = evaluate_ranking(entries, f, k);
  return report;
}

namespace {

bool all_finite(const ad::ParamStore& params) {
  for (ad::ParamId i = 0; i < params.size(); ++i)
    for (double x : params[i].value)
      if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

TrainResult train_model(GdsRecModel& model, const ModelContext& ctx, const SplitDataset& split,
                        const TrainConfig& config) {
  config.validate();
  if (split.train.empty()) throw DataError("training split is empty");
  if (split.validation.empty()) throw DataError("validation split is empty");

  auto& params = model.params();
  ad::Adam adam(params, {config.learning_rate});
  ad::Sgd sgd(config.learning_rate);
  std::vector<ad::GradientSet> worker_grads;
  for (int w = 1; w < config.workers; ++w) worker_grads.emplace_back(params);

  const std::uint64_t sample_seed = eval_sample_seed(config.seed);
  std::vector<RatingRecord> order = split.train.records;
  EarlyStopping stopper(config.patience);
  TrainResult result;
  auto best = params.snapshot();

  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch) + 1));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);

    // Training epochs are numbered from 1 so the evaluation sample (epoch 0)
    // is never a training draw.
    const auto sample_epoch = static_cast<std::uint64_t>(epoch) + 1;
    double loss_sum = 0.0;
    bool diverged = false;
    for (std::size_t begin = 0; begin < order.size() && !diverged; begin += batch) {
      const auto end = std::min(order.size(), begin + batch);
      const std::span<const RatingRecord> records(order.data() + begin, end - begin);
      const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.workers), records.size());
      std::vector<double> losses(workers, 0.0);
      std::vector<std::exception_ptr> errors(workers);

      // Worker w handles a contiguous slice; its loss is weighted by the
      // slice's share of the batch so the reduced gradient is the batch mean.
      auto run = [&](std::size_t w) {
        try {
          const auto lo = records.size() * w / workers;
          const auto hi = records.size() * (w + 1) / workers;
          const auto part = records.subspan(lo, hi - lo);
          auto& grads = w == 0 ? params.grads() : worker_grads[w - 1];
          ad::Tape tape(&params);
          Scorer scorer(model, ctx, tape, sample_seed, sample_epoch);
          auto loss = scorer.batch_loss(part);
          loss = tape.scale(loss, static_cast<double>(part.size()) / static_cast<double>(records.size()));
          losses[w] = loss.item();
          tape.backward(loss, grads);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      };
      if (workers == 1) {
        run(0);
      } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& t : pool) t.join();
      }
      for (auto& e : errors) {
        if (!e) continue;
        try {
          std::rethrow_exception(e);
        } catch (const DivergenceError&) {
          diverged = true;
        }
      }
      double batch_loss = 0.0;
      for (double l : losses) batch_loss += l;
      if (diverged || !std::isfinite(batch_loss)) {
        diverged = true;
        break;
      }
      for (std::size_t w = 1; w < workers; ++w) {
        params.grads().accumulate(worker_grads[w - 1]);
        worker_grads[w - 1].zero();
      }
      if (config.optimizer == OptimizerKind::kAdam) {
        adam.step(params, params.grads());
      } else {
        sgd.step(params, params.grads());
      }
      params.grads().zero();
      loss_sum += batch_loss * static_cast<double>(records.size());
    }
    if (diverged || !all_finite(params)) {
      params.restore(best);
      result.diverged = true;
      break;
    }

    const auto val = evaluate(model_predictor(model, ctx, sample_seed, config.workers), split.validation);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_mae = val.mae;
    rec.val_rmse = val.rmse;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);

    const bool stop = stopper.update(val.mae + val.rmse);
    if (stopper.improved()) best = params.snapshot();
    if (config.verbose) {
      std::fprintf(stderr, "epoch %3d  loss %.5f  val MAE %.4f RMSE %.4f  (%.1fs)%s\n", epoch, rec.train_loss,
                   val.mae, val.rmse, rec.seconds, stopper.improved() ? " *" : "");
    }
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  if (!result.diverged) params.restore(best);
  result.best_epoch = stopper.best_epoch();
  result.best_val_sum = stopper.best();
  return result;
}

}  // namespace gdsrec
