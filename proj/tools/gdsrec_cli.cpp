#include <cstdio>
#include <exception>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gdsrec/error.hpp"
#include "gdsrec/experiment.hpp"

using namespace gdsrec;

namespace {

// Flag -> config key for the options every subcommand accepts.
const std::vector<std::pair<std::string, std::string>> kFlagKeys = {
    {"--ratings", "ratings"},
    {"--trust", "trust"},
    {"--dataset", "dataset"},
    {"--train-fraction", "train_fraction"},
    {"--seed", "seed"},
    {"--repeats", "repeats"},
    {"--dim", "dim"},
    {"--k", "k"},
    {"--delta", "delta"},
    {"--alpha", "alpha"},
    {"--attention", "attention"},
    {"--variant", "variant"},
    {"--lr", "learning_rate"},
    {"--batch-size", "batch_size"},
    {"--max-epochs", "max_epochs"},
    {"--patience", "patience"},
    {"--workers", "workers"},
    {"--output", "output_dir"},
    {"--cache", "cache_dir"},
};

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
  bool allow_off_grid = false;
  bool clip = false;
  bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_file, "key = value config file, or a run manifest.json");
  cmd->add_option("--set", c.sets, "override any config key (key=value), repeatable");
  for (const auto& [flag, key] : kFlagKeys) cmd->add_option(flag, c.flags[key], "config key " + key);
  cmd->add_flag("--allow-off-grid", c.allow_off_grid, "accept hyper-parameters outside the experiment grids");
  cmd->add_flag("--clip", c.clip, "clip reported predictions to [1,5]");
  cmd->add_flag("-v,--verbose", c.verbose, "per-epoch progress on stderr");
}

RunConfig resolve(CLI::App* cmd, const Common& c) {
  RunConfig cfg = c.config_file.empty() ? RunConfig{} : load_run_config(c.config_file);
  for (const auto& [flag, key] : kFlagKeys)
    if (cmd->count(flag) > 0) cfg.set(key, c.flags.at(key));
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (c.allow_off_grid) cfg.allow_off_grid = true;
  if (c.clip) cfg.clip = true;
  cfg.train.verbose = c.verbose;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GDSRec social recommendation: training, evaluation and experiment runner"};
  app.require_subcommand(1);

  Common common;
  std::string checkpoint = "out/model";
  std::string variant_name, sweep_param, baseline_name, pairs_path, scores_path = "predictions.csv";

  auto* prepare = app.add_subcommand("prepare", "split the data and cache statistics and graphs");
  auto* train = app.add_subcommand("train", "train one model, write checkpoint, metrics and history");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the cached split");
  auto* ablate = app.add_subcommand("ablate", "train and evaluate one ablation variant over repeated seeds");
  auto* sweep = app.add_subcommand("sweep", "sweep delta, k or alpha over their grids");
  auto* baseline = app.add_subcommand("baseline", "train and evaluate PMF or FunkSVD");
  auto* score = app.add_subcommand("score", "predict ratings for user,item pairs from a checkpoint");
  for (auto* cmd : {prepare, train, eval, ablate, sweep, baseline, score}) add_common(cmd, common);

  eval->add_option("--checkpoint", checkpoint, "checkpoint stem written by train")->capture_default_str();
  score->add_option("--checkpoint", checkpoint, "checkpoint stem written by train")->capture_default_str();
  ablate->add_option("variant_name", variant_name, "RC | SN | RD | avg | max")->required();
  sweep->add_option("--param", sweep_param, "delta | k | alpha")->required();
  baseline->add_option("model", baseline_name, "pmf | funksvd")->required();
  score->add_option("--pairs", pairs_path, "CSV of user,item raw ids")->required();
  score->add_option("--out", scores_path, "output CSV")->capture_default_str();

  if (argc > 1 && argv[1][0] != '-') {
    const std::string name = argv[1];
    bool known = false;
    for (auto* cmd : app.get_subcommands({})) known = known || cmd->get_name() == name;
    if (!known) {
      std::fprintf(stderr, "config error: unknown command '%s' (expected prepare, train, eval, ablate, sweep, baseline or score)\n",
                   name.c_str());
      return kExitConfig;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    auto* cmd = app.get_subcommands().front();
    const RunConfig cfg = resolve(cmd, common);
    if (cmd == prepare) return command_prepare(cfg);
    if (cmd == train) return command_train(cfg);
    if (cmd == eval) return command_eval(cfg, checkpoint);
    if (cmd == ablate) {
      const auto v = parse_variant(variant_name);
      if (v == Variant::kFull) throw ConfigError("ablate needs one of RC, SN, RD, avg, max (use train for the full model)");
      return command_ablate(cfg, v);
    }
    if (cmd == sweep) return command_sweep(cfg, sweep_param);
    if (cmd == baseline) return command_baseline(cfg, parse_mf_kind(baseline_name));
    if (cmd == score) return command_score(cfg, checkpoint, pairs_path, scores_path);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitConfig;
}
