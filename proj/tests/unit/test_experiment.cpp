#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "gdsrec/error.hpp"
#include "gdsrec/experiment.hpp"
#include "gdsrec/synthetic.hpp"

using namespace gdsrec;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path root;
  fs::path ratings, trust, other_trust;

  explicit Workspace(const std::string& name) {
    root = fs::temp_directory_path() / ("gdsrec_exp_" + name);
    fs::remove_all(root);
    fs::create_directories(root);
    SyntheticConfig sc;
    sc.n_users = 40;
    sc.n_items = 30;
    sc.ratings_per_user = 10;
    sc.trust_per_user = 3;
    sc.seed = 2;
    const auto d = generate_synthetic(sc);
    ratings = root / "ratings.csv";
    trust = root / "trust.csv";
    other_trust = root / "trust2.csv";
    std::ofstream r(ratings), t(trust), t2(other_trust);
    r << "userid,productid,rating\n";
    for (const auto& x : d.ratings.records)
      r << d.ratings.vocab->users.raw(x.user) << ',' << d.ratings.vocab->items.raw(x.item) << ',' << x.rating << '\n';
    for (const auto& e : d.trust.edges)
      t << d.ratings.vocab->users.raw(e.trustor) << ',' << d.ratings.vocab->users.raw(e.trustee) << '\n';
    // a different graph, including users that never rated
    for (int u = 1; u <= 40; ++u) t2 << u << ',' << (u % 40) + 1 << '\n' << u << ',' << 900 + u << '\n';
  }

  RunConfig config(const std::string& out) const {
    RunConfig c;
    c.ratings_path = ratings.string();
    c.trust_path = trust.string();
    c.output_dir = (root / out).string();
    c.cache_dir = (root / "cache").string();
    c.model.dim = 16;
    c.model.reservation = 5;
    c.train.max_epochs = 3;
    c.train.learning_rate = 5e-4;
    c.repeats = 2;
    return c;
  }
};

}  // namespace

TEST(Hash, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a(""), 14695981039346656037ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(255), "00000000000000ff");
}

TEST(Prepare, CacheIsReusedAndDeltaInvalidatesOnlySocial) {
  Workspace w("cache");
  auto c = w.config("p");
  const auto first = prepare_data(c, CacheMode::kBuild);
  EXPECT_EQ(first.cache_writes.size(), 4u);
  const auto again = prepare_data(c, CacheMode::kBuild);
  EXPECT_EQ(again.cache_hits.size(), 4u);
  EXPECT_TRUE(again.cache_writes.empty());
  EXPECT_EQ(again.split.train.records, first.split.train.records);
  EXPECT_EQ(again.stats.user_avg, first.stats.user_avg);
  ASSERT_EQ(again.social.neighbors.size(), first.social.neighbors.size());
  for (std::size_t u = 0; u < first.social.neighbors.size(); ++u)
    for (std::size_t j = 0; j < first.social.neighbors[u].size(); ++j)
      EXPECT_EQ(again.social.neighbors[u][j].lambda, first.social.neighbors[u][j].lambda);

  c.model.delta = 2;
  const auto other = prepare_data(c, CacheMode::kBuild);
  EXPECT_EQ(other.keys["interaction"], first.keys["interaction"]);
  EXPECT_NE(other.keys["social"], first.keys["social"]);
  ASSERT_EQ(other.cache_writes.size(), 1u);
  EXPECT_EQ(other.cache_writes[0].rfind("social-", 0), 0u);
}

TEST(Prepare, RequireModeReportsMissingCache) {
  Workspace w("require");
  auto c = w.config("p");
  EXPECT_THROW(prepare_data(c, CacheMode::kRequire), DataError);
  EXPECT_THROW(
      [&] {
        auto bad = c;
        bad.ratings_path.clear();
        prepare_data(bad, CacheMode::kIgnore);
      }(),
      ConfigError);
}

TEST(Prepare, NoSocialVariantNeverReadsTrust) {
  Workspace w("sn");
  auto c = w.config("p");
  c.variant = Variant::kNoSocial;
  c.trust_path = (w.root / "does_not_exist.csv").string();
  const auto d = prepare_data(c, CacheMode::kIgnore);
  EXPECT_FALSE(d.trust_loaded);
  EXPECT_EQ(d.ratings.n_users(), 40);
}

TEST(Commands, TrainTwiceGivesIdenticalFiles) {
  Workspace w("det");
  auto a = w.config("a");
  auto b = w.config("b");
  ASSERT_EQ(command_train(a), kExitOk);
  ASSERT_EQ(command_train(b), kExitOk);
  for (const char* f : {"metrics.json", "metrics.csv", "history.csv", "model.bin"})
    EXPECT_EQ(slurp(fs::path(a.output_dir) / f), slurp(fs::path(b.output_dir) / f)) << f;
  const auto m = nlohmann::json::parse(slurp(fs::path(a.output_dir) / "manifest.json"));
  EXPECT_EQ(m["command"], "train");
  EXPECT_EQ(m["config"]["k"], "5");
  EXPECT_EQ(m["seed"], 0);
  const auto ck = nlohmann::json::parse(slurp(fs::path(a.output_dir) / "model.json"));
  EXPECT_EQ(ck["version"], 1);
}

TEST(Commands, ManifestRerunReproducesOutputs) {
  Workspace w("manifest");
  auto a = w.config("a");
  ASSERT_EQ(command_train(a), kExitOk);
  auto again = load_run_config(fs::path(a.output_dir) / "manifest.json");
  again.output_dir = (w.root / "again").string();
  ASSERT_EQ(command_train(again), kExitOk);
  for (const char* f : {"metrics.json", "metrics.csv", "history.csv", "model.bin"})
    EXPECT_EQ(slurp(fs::path(a.output_dir) / f), slurp(fs::path(again.output_dir) / f)) << f;
}

TEST(Commands, EvalAndScoreFromCheckpoint) {
  Workspace w("eval");
  auto a = w.config("a");
  ASSERT_EQ(command_train(a), kExitOk);
  auto e = w.config("e");
  ASSERT_EQ(command_eval(e, fs::path(a.output_dir) / "model"), kExitOk);
  const auto trained = nlohmann::json::parse(slurp(fs::path(a.output_dir) / "metrics.json"));
  const auto evaluated = nlohmann::json::parse(slurp(fs::path(e.output_dir) / "metrics.json"));
  EXPECT_EQ(trained["runs"][0]["test"], evaluated["runs"][0]["test"]);
  EXPECT_EQ(trained["runs"][0]["best_epoch"], evaluated["runs"][0]["best_epoch"]);

  std::ofstream(w.root / "pairs.csv") << "user,item\n1,1\n2,3\n12345,1\n";
  ASSERT_EQ(command_score(e, fs::path(a.output_dir) / "model.json", w.root / "pairs.csv", w.root / "s.csv"), kExitOk);
  std::istringstream lines(slurp(w.root / "s.csv"));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) ++n;
  EXPECT_EQ(n, 4);

  auto nocache = e;
  nocache.cache_dir = (w.root / "empty_cache").string();
  EXPECT_THROW(command_eval(nocache, fs::path(a.output_dir) / "model"), DataError);
}

TEST(Commands, MetricsCsvUsesFourDecimals) {
  Workspace w("csv");
  auto a = w.config("a");
  a.repeats = 2;
  ASSERT_EQ(command_ablate(a, Variant::kAverageAttention), kExitOk);
  std::istringstream csv(slurp(fs::path(a.output_dir) / "metrics.csv"));
  std::string header, row;
  std::getline(csv, header);
  EXPECT_EQ(header.rfind("run,seed,mae,rmse,recall5_f3,ndcg5_f3,recall5_f4,ndcg5_f4", 0), 0u);
  int rows = 0;
  while (std::getline(csv, row)) {
    ++rows;
    std::istringstream cells(row);
    std::string cell;
    std::getline(cells, cell, ',');
    std::getline(cells, cell, ',');
    std::getline(cells, cell, ',');
    ASSERT_NE(cell.find('.'), std::string::npos);
    EXPECT_EQ(cell.size() - cell.find('.') - 1, 4u) << cell;
  }
  EXPECT_EQ(rows, 4);  // 2 runs, mean, std
  const auto j = nlohmann::json::parse(slurp(fs::path(a.output_dir) / "metrics.json"));
  EXPECT_EQ(j["variant"], "avg");
  EXPECT_EQ(j["runs"][1]["seed"], 1);
  for (const auto& run : j["runs"]) EXPECT_LE(run["test"]["mae"].get<double>(), run["test"]["rmse"].get<double>());
}

TEST(Commands, NoSocialAblationIgnoresTrustFileEndToEnd) {
  Workspace w("sn_e2e");
  auto a = w.config("a");
  auto b = w.config("b");
  b.trust_path = w.other_trust.string();
  ASSERT_EQ(command_ablate(a, Variant::kNoSocial), kExitOk);
  ASSERT_EQ(command_ablate(b, Variant::kNoSocial), kExitOk);
  EXPECT_EQ(slurp(fs::path(a.output_dir) / "metrics.json"), slurp(fs::path(b.output_dir) / "metrics.json"));
}

TEST(Commands, SweepWritesOneRowPerValue) {
  Workspace w("sweep");
  auto c = w.config("s");
  c.repeats = 1;
  c.train.max_epochs = 1;
  ASSERT_EQ(command_sweep(c, "delta"), kExitOk);
  std::istringstream csv(slurp(fs::path(c.output_dir) / "sweep.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 4);
  const auto j = nlohmann::json::parse(slurp(fs::path(c.output_dir) / "sweep.json"));
  EXPECT_EQ(j["rows"].size(), 4u);
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "metrics.json"));
  EXPECT_THROW(command_sweep(c, "gamma"), ConfigError);
  EXPECT_EQ(sweep_values("k", "ciao"), (std::vector<double>{5, 10, 15, 20}));
  EXPECT_EQ(sweep_values("k", "epinions"), (std::vector<double>{15, 20, 25, 30}));
  EXPECT_EQ(sweep_values("alpha", "ciao").size(), 9u);
}

TEST(Commands, BaselineWritesReports) {
  Workspace w("baseline");
  auto c = w.config("b");
  c.mf.max_epochs = 5;
  ASSERT_EQ(command_baseline(c, MfKind::kFunkSvd), kExitOk);
  const auto j = nlohmann::json::parse(slurp(fs::path(c.output_dir) / "metrics.json"));
  EXPECT_EQ(j["baseline"], "funksvd");
  EXPECT_EQ(j["runs"].size(), 2u);
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "model.bin"));
}

TEST(Aggregate, MeanAndPopulationStd) {
  const auto a = aggregate({1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(a.mean, 2.5);
  EXPECT_DOUBLE_EQ(a.std, std::sqrt(1.25));
}

#ifdef GDSREC_CLI_PATH
namespace {
int run_cli(const std::string& args) {
  const int status = std::system((std::string(GDSREC_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
}  // namespace

TEST(Cli, ExitCodes) {
  Workspace w("cli");
  const std::string data = "--ratings " + w.ratings.string() + " --trust " + w.trust.string() + " --cache " +
                           (w.root / "cache").string();
  EXPECT_EQ(run_cli("frobnicate"), kExitConfig);
  EXPECT_EQ(run_cli("train --no-such-flag"), kExitConfig);
  EXPECT_EQ(run_cli("train " + data + " --dim 17"), kExitConfig);
  EXPECT_EQ(run_cli("train --ratings /nonexistent.csv --trust /nonexistent.csv"), kExitData);
  EXPECT_EQ(run_cli("eval --checkpoint " + (w.root / "nothing").string()), kExitData);
  EXPECT_EQ(run_cli("train " + data + " --dim 16 --k 5 --max-epochs 1 --output " + (w.root / "o").string()), kExitOk);
  EXPECT_EQ(run_cli("eval --cache " + (w.root / "cache").string() + " --checkpoint " + (w.root / "o" / "model").string() +
                    " --output " + (w.root / "e").string()),
            kExitOk);
  EXPECT_EQ(run_cli("ablate XX " + data), kExitConfig);
  EXPECT_EQ(run_cli("train " + data + " --dim 16 --k 5 --max-epochs 2 --set optimizer=sgd --set learning_rate=1e12 "
                                      "--allow-off-grid --output " + (w.root / "div").string()),
            kExitDivergence);
}
#endif
