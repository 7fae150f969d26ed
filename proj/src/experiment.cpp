#include "gdsrec/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gdsrec/checkpoint.hpp"
#include "gdsrec/error.hpp"

namespace gdsrec {

namespace fs = std::filesystem;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::uint64_t key_of(std::uint64_t parent, const std::string& tag) {
  return fnv1a(tag, fnv1a(hex64(parent)));
}

bool cached(const fs::path& stem) {
  return fs::exists(stem.string() + ".json") && fs::exists(stem.string() + ".bin");
}

[[noreturn]] void missing_cache(const fs::path& stem) {
  throw DataError("no cached artifact " + stem.string() +
                  ".json; run `gdsrec prepare` with the same data, split and delta first");
}

std::vector<double> as_doubles(const std::vector<RatingRecord>& records) {
  std::vector<double> out;
  out.reserve(records.size() * 3);
  for (const auto& r : records) {
    out.push_back(r.user);
    out.push_back(r.item);
    out.push_back(r.rating);
  }
  return out;
}

std::vector<RatingRecord> as_records(const NamedArray& a, const RatingTable& table) {
  if (a.values.size() % 3 != 0) throw DataError("corrupt cached split array " + a.name);
  std::vector<RatingRecord> out;
  out.reserve(a.values.size() / 3);
  for (std::size_t i = 0; i < a.values.size(); i += 3) {
    RatingRecord r{static_cast<std::int32_t>(a.values[i]), static_cast<std::int32_t>(a.values[i + 1]),
                   static_cast<std::int32_t>(a.values[i + 2])};
    if (r.user < 0 || r.user >= table.n_users() || r.item < 0 || r.item >= table.n_items())
      throw DataError("cached split does not match the rating file; delete the cache directory");
    out.push_back(r);
  }
  return out;
}

NamedArray vec_array(const std::string& name, std::vector<double> values) {
  const std::size_t n = values.size();
  return NamedArray{name, {n}, std::move(values)};
}

template <typename Adj, typename Fn>
void flatten(const Adj& adj, std::vector<double>& offsets, Fn&& emit) {
  offsets.push_back(0);
  for (const auto& list : adj) {
    for (const auto& e : list) emit(e);
    offsets.push_back(offsets.back() + static_cast<double>(list.size()));
  }
}

std::vector<std::vector<InteractionEdge>> unflatten_edges(const NamedArray& off, const NamedArray& ids,
                                                          const NamedArray& levels, std::size_t expect) {
  if (off.values.size() != expect + 1 || ids.values.size() != levels.values.size())
    throw DataError("cached interaction graph does not match the vocabulary; delete the cache directory");
  std::vector<std::vector<InteractionEdge>> adj(expect);
  for (std::size_t n = 0; n < expect; ++n)
    for (auto i = static_cast<std::size_t>(off.values[n]); i < static_cast<std::size_t>(off.values[n + 1]); ++i)
      adj[n].push_back({static_cast<std::int32_t>(ids.values[i]), static_cast<std::int32_t>(levels.values[i])});
  return adj;
}

}  // namespace

PreparedData prepare_data(const RunConfig& config, CacheMode mode) {
  if (config.ratings_path.empty()) throw ConfigError("no ratings file given (set `ratings` or pass --ratings)");
  PreparedData d;
  const auto ratings_bytes = read_file(config.ratings_path);
  d.ratings = parse_ratings(ratings_bytes);

  std::uint64_t trust_hash = 0;
  const auto model_cfg = config.effective_model();
  // The social ablation never reads the trust file, so its vocabulary is the
  // rating users alone.
  if (model_cfg.use_social) {
    if (config.trust_path.empty()) throw ConfigError("no trust file given (set `trust`, or use variant SN)");
    const auto trust_bytes = read_file(config.trust_path);
    d.trust = parse_trust(trust_bytes, *d.ratings.vocab);
    d.trust_loaded = true;
    trust_hash = fnv1a(trust_bytes);
  }

  const auto ratings_hash = fnv1a(ratings_bytes);
  const auto split_key = key_of(ratings_hash, "split:" + fmt("%.17g", config.train_fraction) + ":" +
                                                  std::to_string(config.seed));
  const auto stats_key = key_of(split_key, "stats:" + (d.trust_loaded ? hex64(trust_hash) : std::string("none")));
  const auto graph_key =
      key_of(stats_key, std::string("interaction:") + (model_cfg.use_rating_difference ? "difference" : "rating"));
  const auto social_key = key_of(stats_key, "social:" + std::to_string(model_cfg.delta) + ":" +
                                                (model_cfg.use_relationship_coeff ? "coeff" : "uniform"));
  d.keys = {{"ratings", hex64(ratings_hash)}, {"split", hex64(split_key)}, {"stats", hex64(stats_key)},
            {"interaction", hex64(graph_key)}};
  if (d.trust_loaded) {
    d.keys["trust"] = hex64(trust_hash);
    d.keys["social"] = hex64(social_key);
  }

  const fs::path dir = config.cache_dir;
  const bool use_disk = mode != CacheMode::kIgnore;
  auto stem = [&](const char* kind, std::uint64_t key) { return dir / (std::string(kind) + "-" + hex64(key)); };

  // split
  const auto split_stem = stem("split", split_key);
  if (use_disk && cached(split_stem)) {
    const auto a = load_arrays(split_stem);
    d.split.train = d.ratings.view(as_records(a.get("train"), d.ratings));
    d.split.validation = d.ratings.view(as_records(a.get("validation"), d.ratings));
    d.split.test = d.ratings.view(as_records(a.get("test"), d.ratings));
    d.split.split_seed = config.seed;
    d.split.train_fraction = config.train_fraction;
    d.cache_hits.push_back(split_stem.filename().string());
  } else {
    if (mode == CacheMode::kRequire) missing_cache(split_stem);
    d.split = split_dataset(d.ratings, config.train_fraction, config.seed);
    if (use_disk) {
      save_arrays(split_stem,
                  {NamedArray{"train", {d.split.train.size(), 3}, as_doubles(d.split.train.records)},
                   NamedArray{"validation", {d.split.validation.size(), 3}, as_doubles(d.split.validation.records)},
                   NamedArray{"test", {d.split.test.size(), 3}, as_doubles(d.split.test.records)}},
                  {{"train_fraction", config.train_fraction}, {"seed", config.seed}});
      d.cache_writes.push_back(split_stem.filename().string());
    }
  }
  if (d.split.train.empty()) throw DataError("the split leaves no training ratings");
  if (d.split.validation.empty() || d.split.test.empty())
    throw DataError("the split leaves an empty validation or test set; more ratings are needed");

  // stats
  const auto stats_stem = stem("stats", stats_key);
  if (use_disk && cached(stats_stem)) {
    const auto a = load_arrays(stats_stem);
    d.stats.user_avg = a.get("user_avg").values;
    d.stats.item_avg = a.get("item_avg").values;
    d.stats.global_avg = a.get("global_avg").values.at(0);
    if (d.stats.user_avg.size() != static_cast<std::size_t>(d.ratings.n_users()) ||
        d.stats.item_avg.size() != static_cast<std::size_t>(d.ratings.n_items()))
      throw DataError("cached stats do not match the vocabulary; delete the cache directory");
    d.cache_hits.push_back(stats_stem.filename().string());
  } else {
    if (mode == CacheMode::kRequire) missing_cache(stats_stem);
    d.stats = compute_stats(d.split.train);
    if (use_disk) {
      save_arrays(stats_stem, {vec_array("user_avg", d.stats.user_avg), vec_array("item_avg", d.stats.item_avg),
                               vec_array("global_avg", {d.stats.global_avg})});
      d.cache_writes.push_back(stats_stem.filename().string());
    }
  }

  // interaction graph
  const auto graph_stem = stem("interaction", graph_key);
  if (use_disk && cached(graph_stem)) {
    const auto a = load_arrays(graph_stem);
    d.graph.label = model_cfg.edge_label();
    d.graph.user_adj = unflatten_edges(a.get("user_offsets"), a.get("user_ids"), a.get("user_levels"),
                                       static_cast<std::size_t>(d.ratings.n_users()));
    d.graph.item_adj = unflatten_edges(a.get("item_offsets"), a.get("item_ids"), a.get("item_levels"),
                                       static_cast<std::size_t>(d.ratings.n_items()));
    d.cache_hits.push_back(graph_stem.filename().string());
  } else {
    if (mode == CacheMode::kRequire) missing_cache(graph_stem);
    d.graph = build_interaction_graph(d.split.train, d.stats, model_cfg.edge_label());
    if (use_disk) {
      std::vector<double> uo, ui, ul, io, ii, il;
      flatten(d.graph.user_adj, uo, [&](const InteractionEdge& e) { ui.push_back(e.id); ul.push_back(e.level); });
      flatten(d.graph.item_adj, io, [&](const InteractionEdge& e) { ii.push_back(e.id); il.push_back(e.level); });
      save_arrays(graph_stem,
                  {vec_array("user_offsets", uo), vec_array("user_ids", ui), vec_array("user_levels", ul),
                   vec_array("item_offsets", io), vec_array("item_ids", ii), vec_array("item_levels", il)},
                  {{"label", model_cfg.use_rating_difference ? "difference" : "rating"}});
      d.cache_writes.push_back(graph_stem.filename().string());
    }
  }

  // social graph
  if (d.trust_loaded) {
    const auto social_stem = stem("social", social_key);
    if (use_disk && cached(social_stem)) {
      const auto a = load_arrays(social_stem);
      const auto& off = a.get("offsets").values;
      const auto& ids = a.get("ids").values;
      const auto& strength = a.get("strength").values;
      const auto& lambda = a.get("lambda").values;
      const auto n = static_cast<std::size_t>(d.ratings.n_users());
      if (off.size() != n + 1 || ids.size() != lambda.size() || ids.size() != strength.size())
        throw DataError("cached social graph does not match the vocabulary; delete the cache directory");
      d.social.neighbors.resize(n);
      for (std::size_t u = 0; u < n; ++u)
        for (auto i = static_cast<std::size_t>(off[u]); i < static_cast<std::size_t>(off[u + 1]); ++i)
          d.social.neighbors[u].push_back(
              {static_cast<std::int32_t>(ids[i]), static_cast<std::int32_t>(strength[i]), lambda[i]});
      d.cache_hits.push_back(social_stem.filename().string());
    } else {
      if (mode == CacheMode::kRequire) missing_cache(social_stem);
      d.social = compute_relationship_coefficients(d.split.train, d.trust, model_cfg.delta,
                                                   !model_cfg.use_relationship_coeff);
      if (use_disk) {
        std::vector<double> off, ids, strength, lambda;
        flatten(d.social.neighbors, off, [&](const SocialNeighbor& s) {
          ids.push_back(s.id);
          strength.push_back(s.strength);
          lambda.push_back(s.lambda);
        });
        save_arrays(social_stem, {vec_array("offsets", off), vec_array("ids", ids),
                                  vec_array("strength", strength), vec_array("lambda", lambda)},
                    {{"delta", model_cfg.delta}, {"uniform", !model_cfg.use_relationship_coeff}});
        d.cache_writes.push_back(social_stem.filename().string());
      }
    }
  }
  return d;
}

namespace {

void check_report(const MetricsReport& r) {
  if (r.mae > r.rmse + 1e-12) throw std::logic_error("report violates MAE <= RMSE");
  for (const auto& [f, m] : r.ranking)
    if (m.recall < 0.0 || m.recall > 1.0 || m.ndcg < 0.0 || m.ndcg > 1.0 + 1e-12)
      throw std::logic_error("ranking metric outside [0,1]");
}

void evaluate_into(RunResult& r, const PredictFn& predict, const PreparedData& data, bool clip) {
  r.validation = evaluate(predict, data.split.validation, clip, kThresholds);
  r.test = evaluate(predict, data.split.test, clip, kThresholds);
  check_report(r.validation);
  check_report(r.test);
}

}  // namespace

RunResult run_model(const RunConfig& config, const PreparedData& data, std::uint64_t seed,
                    std::optional<GdsRecModel>* out) {
  GdsRecModel model(config.effective_model(), data.ratings.n_users(), data.ratings.n_items(), seed);
  TrainConfig tc = config.train;
  tc.seed = seed;
  const auto ctx = data.context();
  const auto tr = train_model(model, ctx, data.split, tc);
  RunResult r;
  r.seed = seed;
  r.history = tr.history;
  r.best_epoch = tr.best_epoch;
  r.stopped_early = tr.stopped_early;
  r.diverged = tr.diverged;
  evaluate_into(r, model_predictor(model, ctx, eval_sample_seed(seed), tc.workers), data, config.clip);
  if (out) out->emplace(std::move(model));
  return r;
}

RunResult run_baseline(const RunConfig& config, const PreparedData& data, MfKind kind, std::uint64_t seed,
                       MfParams* out) {
  MfConfig mc = config.mf;
  mc.seed = seed;
  mc.verbose = config.train.verbose;
  auto tr = train_mf(kind, data.split, mc);
  RunResult r;
  r.seed = seed;
  r.history = tr.history;
  r.best_epoch = tr.best_epoch;
  r.stopped_early = tr.stopped_early;
  r.diverged = tr.diverged;
  evaluate_into(r, mf_predictor(tr.params), data, config.clip);
  if (out) *out = std::move(tr.params);
  return r;
}

Aggregate aggregate(const std::vector<double>& xs) {
  Aggregate a;
  if (xs.empty()) return a;
  for (double x : xs) a.mean += x;
  a.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - a.mean) * (x - a.mean);
  a.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return a;
}

const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols = {"mae",      "rmse",      "recall5_f3", "ndcg5_f3",
                                                "recall5_f4", "ndcg5_f4", "val_mae",    "val_rmse"};
  return cols;
}

std::vector<double> metric_row(const RunResult& r) {
  auto rank = [&](int f) {
    const auto it = r.test.ranking.find(f);
    return it == r.test.ranking.end() ? RankingMetrics{} : it->second;
  };
  return {r.test.mae, r.test.rmse, rank(3).recall, rank(3).ndcg, rank(4).recall, rank(4).ndcg,
          r.validation.mae, r.validation.rmse};
}

namespace {

nlohmann::json report_json(const MetricsReport& m) {
  nlohmann::json j = {{"mae", m.mae}, {"rmse", m.rmse}, {"count", m.count}};
  j["ranking"] = nlohmann::json::object();
  for (const auto& [f, r] : m.ranking)
    j["ranking"][std::to_string(f)] = {{"recall_at_5", r.recall}, {"ndcg_at_5", r.ndcg}, {"users", r.users}};
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace

nlohmann::json run_json(const RunResult& r) {
  return {{"seed", r.seed},
          {"test", report_json(r.test)},
          {"validation", report_json(r.validation)},
          {"best_epoch", r.best_epoch},
          {"epochs", r.history.size()},
          {"stopped_early", r.stopped_early},
          {"diverged", r.diverged}};
}

void write_run_reports(const fs::path& dir, const std::vector<RunResult>& runs, const nlohmann::json& extra) {
  fs::create_directories(dir);
  const auto& cols = metric_columns();
  std::vector<std::vector<double>> rows;
  for (const auto& r : runs) rows.push_back(metric_row(r));

  nlohmann::json j = extra.is_object() ? extra : nlohmann::json::object();
  j["runs"] = nlohmann::json::array();
  for (const auto& r : runs) j["runs"].push_back(run_json(r));
  nlohmann::json mean = nlohmann::json::object(), stdev = nlohmann::json::object();
  std::vector<Aggregate> aggs;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    std::vector<double> xs;
    for (const auto& row : rows) xs.push_back(row[c]);
    aggs.push_back(aggregate(xs));
    mean[cols[c]] = aggs.back().mean;
    stdev[cols[c]] = aggs.back().std;
  }
  j["mean"] = mean;
  j["std"] = stdev;
  write_text(dir / "metrics.json", j.dump(2) + "\n");

  std::ostringstream csv;
  csv << "run,seed";
  for (const auto& c : cols) csv << ',' << c;
  csv << ",best_epoch\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    csv << i << ',' << runs[i].seed;
    for (double x : rows[i]) csv << ',' << fmt("%.4f", x);
    csv << ',' << runs[i].best_epoch << '\n';
  }
  for (const char* label : {"mean", "std"}) {
    csv << label << ',';
    for (const auto& a : aggs) csv << ',' << fmt("%.4f", std::string(label) == "mean" ? a.mean : a.std);
    csv << ",\n";
  }
  write_text(dir / "metrics.csv", csv.str());

  std::ostringstream hist;
  hist << "run,epoch,train_loss,val_mae,val_rmse\n";
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (const auto& e : runs[i].history)
      hist << i << ',' << e.epoch << ',' << fmt("%.10g", e.train_loss) << ',' << fmt("%.10g", e.val_mae) << ','
           << fmt("%.10g", e.val_rmse) << '\n';
  write_text(dir / "history.csv", hist.str());
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& config,
                    const nlohmann::json& extra) {
  fs::create_directories(dir);
  nlohmann::json j;
  j["tool"] = "gdsrec";
  j["version"] = "0.1.0";
  j["command"] = command;
  j["seed"] = config.seed;
  j["config"] = config.to_json();
  nlohmann::json inputs = nlohmann::json::object();
  for (const auto& [name, path] : {std::pair{"ratings", config.ratings_path}, std::pair{"trust", config.trust_path}})
    if (!path.empty() && fs::exists(path)) inputs[name] = {{"path", path}, {"fnv1a", hex64(fnv1a(read_file(path)))}};
  j["inputs"] = inputs;
  for (const auto& [k, v] : extra.items()) j[k] = v;
  write_text(dir / "manifest.json", j.dump(2) + "\n");
}

namespace {

fs::path checkpoint_stem(const fs::path& p) {
  if (p.extension() == ".json" || p.extension() == ".bin") return fs::path(p).replace_extension();
  return p;
}

void print_summary(const std::string& title, const std::vector<RunResult>& runs) {
  std::vector<double> mae, rmse;
  for (const auto& r : runs) {
    mae.push_back(r.test.mae);
    rmse.push_back(r.test.rmse);
  }
  const auto a = aggregate(mae), b = aggregate(rmse);
  std::printf("%s: test MAE %.4f (+-%.4f)  RMSE %.4f (+-%.4f) over %zu run(s)\n", title.c_str(), a.mean, a.std,
              b.mean, b.std, runs.size());
}

int divergence_exit(const std::vector<RunResult>& runs) {
  for (const auto& r : runs)
    if (r.diverged) {
      std::fprintf(stderr, "error: training diverged (non-finite loss) for seed %llu; best finite parameters kept\n",
                   static_cast<unsigned long long>(r.seed));
      return kExitDivergence;
    }
  return kExitOk;
}

std::vector<RunResult> repeat_model(const RunConfig& config, const PreparedData& data) {
  std::vector<RunResult> runs;
  for (int i = 0; i < config.repeats; ++i) {
    runs.push_back(run_model(config, data, config.seed + static_cast<std::uint64_t>(i)));
    if (config.train.verbose)
      std::fprintf(stderr, "  seed %llu: test MAE %.4f RMSE %.4f\n",
                   static_cast<unsigned long long>(runs.back().seed), runs.back().test.mae, runs.back().test.rmse);
  }
  return runs;
}

}  // namespace

int command_prepare(const RunConfig& config) {
  config.validate();
  const auto d = prepare_data(config, CacheMode::kBuild);
  nlohmann::json summary = {{"users", d.ratings.n_users()},
                            {"items", d.ratings.n_items()},
                            {"ratings", d.ratings.size()},
                            {"train", d.split.train.size()},
                            {"validation", d.split.validation.size()},
                            {"test", d.split.test.size()},
                            {"trust_edges", d.trust.edges.size()},
                            {"keys", d.keys},
                            {"cache_hits", d.cache_hits},
                            {"cache_writes", d.cache_writes}};
  fs::create_directories(config.output_dir);
  write_text(fs::path(config.output_dir) / "vocabulary.json", vocabulary_json(*d.ratings.vocab));
  write_manifest(config.output_dir, "prepare", config, {{"prepared", summary}});
  std::printf("%s\n", summary.dump(2).c_str());
  return kExitOk;
}

int command_train(const RunConfig& config) {
  config.validate();
  const auto d = prepare_data(config, CacheMode::kBuild);
  std::optional<GdsRecModel> model;
  const auto r = run_model(config, d, config.seed, &model);
  const fs::path dir = config.output_dir;
  write_run_reports(dir, {r});
  save_params(dir / "model", model->params(),
              {{"kind", "gdsrec"},
               {"config", config.to_json()},
               {"n_users", d.ratings.n_users()},
               {"n_items", d.ratings.n_items()},
               {"best_epoch", r.best_epoch}});
  write_text(dir / "vocabulary.json", vocabulary_json(*d.ratings.vocab));
  write_manifest(dir, "train", config, {{"cache_keys", d.keys}, {"checkpoint", "model.json"}});
  print_summary("train", {r});
  return divergence_exit({r});
}

RunConfig checkpoint_config(const fs::path& checkpoint) {
  const auto stem = checkpoint_stem(checkpoint);
  std::ifstream in(stem.string() + ".json");
  if (!in) throw DataError("missing checkpoint manifest " + stem.string() + ".json; run `gdsrec train` first");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt checkpoint manifest: ") + e.what());
  }
  if (!j.contains("meta") || !j["meta"].contains("config"))
    throw DataError("checkpoint manifest carries no run config");
  RunConfig cfg;
  for (const auto& [k, v] : j["meta"]["config"].items()) cfg.set(k, v.get<std::string>());
  return cfg;
}

namespace {

// Restores the trained model behind a checkpoint together with the data it
// was trained on, reading graphs from the cache only.
struct LoadedModel {
  RunConfig config;
  PreparedData data;
  std::optional<GdsRecModel> model;
  nlohmann::json meta;
};

LoadedModel load_checkpoint_model(const RunConfig& overrides, const fs::path& checkpoint) {
  LoadedModel lm;
  lm.config = checkpoint_config(checkpoint);
  lm.config.cache_dir = overrides.cache_dir;
  lm.config.output_dir = overrides.output_dir;
  lm.config.train.workers = overrides.train.workers;
  lm.config.clip = overrides.clip;
  lm.data = prepare_data(lm.config, CacheMode::kRequire);
  lm.model.emplace(lm.config.effective_model(), lm.data.ratings.n_users(), lm.data.ratings.n_items(),
                   lm.config.seed);
  lm.meta = load_params(checkpoint_stem(checkpoint), lm.model->params());
  return lm;
}

}  // namespace

int command_eval(const RunConfig& config, const fs::path& checkpoint) {
  auto lm = load_checkpoint_model(config, checkpoint);
  RunResult r;
  r.seed = lm.config.seed;
  r.best_epoch = lm.meta.value("best_epoch", -1);
  evaluate_into(r,
                model_predictor(*lm.model, lm.data.context(), eval_sample_seed(lm.config.seed),
                                lm.config.train.workers),
                lm.data, lm.config.clip);
  write_run_reports(config.output_dir, {r});
  write_manifest(config.output_dir, "eval", lm.config, {{"checkpoint", checkpoint_stem(checkpoint).string()}});
  print_summary("eval", {r});
  return kExitOk;
}

int command_ablate(RunConfig config, Variant variant) {
  config.variant = variant;
  config.validate();
  const auto d = prepare_data(config, CacheMode::kBuild);
  const auto runs = repeat_model(config, d);
  write_run_reports(config.output_dir, runs, {{"variant", to_string(variant)}});
  write_manifest(config.output_dir, "ablate", config, {{"variant", to_string(variant)}, {"cache_keys", d.keys}});
  print_summary("ablate " + to_string(variant), runs);
  return divergence_exit(runs);
}

std::vector<double> sweep_values(const std::string& param, const std::string& dataset) {
  if (param == "delta") return {0, 1, 2, 3};
  if (param == "k") {
    std::vector<double> out;
    for (int k : k_grid(dataset)) out.push_back(k);
    return out;
  }
  if (param == "alpha") return alpha_grid();
  throw ConfigError("unknown sweep parameter '" + param + "' (expected delta, k or alpha)");
}

SweepResult run_sweep(RunConfig config, const std::string& param) {
  SweepResult s;
  s.param = param;
  for (double value : sweep_values(param, config.dataset)) {
    if (param == "delta") config.model.delta = static_cast<int>(value);
    else if (param == "k") config.model.reservation = static_cast<int>(value);
    else config.model.alpha = value;
    config.validate();
    const auto d = prepare_data(config, CacheMode::kBuild);
    SweepRow row;
    row.value = value;
    row.runs = repeat_model(config, d);
    std::vector<double> sums;
    for (const auto& r : row.runs) sums.push_back(r.validation.mae + r.validation.rmse);
    row.val_sum_mean = aggregate(sums).mean;
    if (config.train.verbose)
      std::fprintf(stderr, "%s=%g: mean validation MAE+RMSE %.4f\n", param.c_str(), value, row.val_sum_mean);
    s.rows.push_back(std::move(row));
  }
  for (std::size_t i = 1; i < s.rows.size(); ++i)
    if (s.rows[i].val_sum_mean < s.rows[s.best].val_sum_mean) s.best = i;
  return s;
}

int command_sweep(RunConfig config, const std::string& param) {
  config.validate();
  const auto s = run_sweep(config, param);
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);

  const auto& cols = metric_columns();
  std::ostringstream csv;
  csv << param;
  for (const auto& c : cols) csv << ',' << c << "_mean," << c << "_std";
  csv << ",val_sum_mean\n";
  nlohmann::json j = {{"param", param}, {"rows", nlohmann::json::array()}};
  for (const auto& row : s.rows) {
    csv << fmt("%g", row.value);
    nlohmann::json jr = {{"value", row.value}, {"val_sum_mean", row.val_sum_mean}, {"runs", nlohmann::json::array()}};
    for (std::size_t c = 0; c < cols.size(); ++c) {
      std::vector<double> xs;
      for (const auto& r : row.runs) xs.push_back(metric_row(r)[c]);
      const auto a = aggregate(xs);
      csv << ',' << fmt("%.4f", a.mean) << ',' << fmt("%.4f", a.std);
      jr["mean"][cols[c]] = a.mean;
      jr["std"][cols[c]] = a.std;
    }
    for (const auto& r : row.runs) jr["runs"].push_back(run_json(r));
    csv << ',' << fmt("%.4f", row.val_sum_mean) << '\n';
    j["rows"].push_back(jr);
  }
  const double best = s.rows[s.best].value;
  j["best"] = best;
  write_text(dir / "sweep.csv", csv.str());
  write_text(dir / "sweep.json", j.dump(2) + "\n");
  write_run_reports(dir, s.rows[s.best].runs, {{"sweep_param", param}, {"best_value", best}});
  write_manifest(dir, "sweep", config, {{"sweep_param", param}, {"best_value", best}});
  std::printf("sweep %s: best %g (mean validation MAE+RMSE %.4f)\n", param.c_str(), best,
              s.rows[s.best].val_sum_mean);
  std::vector<RunResult> all;
  for (const auto& row : s.rows) all.insert(all.end(), row.runs.begin(), row.runs.end());
  return divergence_exit(all);
}

int command_baseline(const RunConfig& config, MfKind kind) {
  config.validate();
  // Baselines use ratings only; the trust file is irrelevant to them.
  RunConfig data_cfg = config;
  data_cfg.variant = Variant::kNoSocial;
  const auto d = prepare_data(data_cfg, CacheMode::kBuild);
  std::vector<RunResult> runs;
  MfParams last;
  for (int i = 0; i < config.repeats; ++i)
    runs.push_back(run_baseline(config, d, kind, config.seed + static_cast<std::uint64_t>(i), &last));
  const fs::path dir = config.output_dir;
  write_run_reports(dir, runs, {{"baseline", to_string(kind)}});
  std::vector<NamedArray> arrays = {
      {"user_factors", {static_cast<std::size_t>(d.ratings.n_users()), static_cast<std::size_t>(last.dim)},
       last.user_factors},
      {"item_factors", {static_cast<std::size_t>(d.ratings.n_items()), static_cast<std::size_t>(last.dim)},
       last.item_factors}};
  if (kind == MfKind::kFunkSvd) {
    arrays.push_back(vec_array("user_bias", last.user_bias));
    arrays.push_back(vec_array("item_bias", last.item_bias));
    arrays.push_back(vec_array("global_mean", {last.global_mean}));
  }
  save_arrays(dir / "model", arrays, {{"kind", to_string(kind)}, {"config", config.to_json()},
                                      {"seed", runs.back().seed}});
  write_manifest(dir, "baseline", config, {{"baseline", to_string(kind)}, {"checkpoint", "model.json"}});
  print_summary("baseline " + to_string(kind), runs);
  return divergence_exit(runs);
}

int command_score(const RunConfig& config, const fs::path& checkpoint, const fs::path& pairs,
                  const fs::path& out) {
  auto lm = load_checkpoint_model(config, checkpoint);
  const auto& vocab = *lm.data.ratings.vocab;
  std::istringstream in(read_file(pairs));
  std::vector<RatingRecord> records;
  std::vector<std::pair<long long, long long>> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.find_first_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ") != std::string::npos)
      continue;
    long long u = 0, v = 0;
    char comma = 0;
    std::istringstream ls(line);
    if (!(ls >> u >> comma >> v) || comma != ',')
      throw DataError(pairs.string() + ":" + std::to_string(line_no) + ": expected `user,item`");
    raw.emplace_back(u, v);
    // Unknown ids score as cold nodes.
    records.push_back({vocab.users.find(u), vocab.items.find(v), 0});
  }
  auto preds = predict_pairs(*lm.model, lm.data.context(), records, eval_sample_seed(lm.config.seed),
                             lm.config.train.workers);
  std::ostringstream csv;
  csv << "user,item,prediction\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double p = preds[i];
    if (lm.config.clip) p = std::clamp(p, static_cast<double>(kMinRating), static_cast<double>(kMaxRating));
    csv << raw[i].first << ',' << raw[i].second << ',' << fmt("%.17g", p) << '\n';
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_text(out, csv.str());
  std::printf("scored %zu pair(s) -> %s\n", preds.size(), out.string().c_str());
  return kExitOk;
}

}  // namespace gdsrec
