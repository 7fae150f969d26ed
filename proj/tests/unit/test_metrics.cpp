#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "gdsrec/metrics.hpp"

using namespace gdsrec;

namespace {

// Brute-force ranking oracle: repeatedly pick the best remaining item.
RankingMetrics brute_ranking(const std::vector<ScoredEntry>& entries, double threshold, int k) {
  std::map<int, std::vector<ScoredEntry>> by_user;
  for (const auto& e : entries) by_user[e.user].push_back(e);
  double recall = 0, ndcg = 0;
  std::size_t users = 0;
  for (auto& [u, list] : by_user) {
    int positives = 0;
    for (const auto& e : list) positives += e.truth >= threshold;
    if (positives == 0) continue;
    ++users;
    std::vector<bool> used(list.size(), false);
    double dcg = 0;
    int hits = 0;
    for (int pos = 1; pos <= k && pos <= static_cast<int>(list.size()); ++pos) {
      int best = -1;
      for (int i = 0; i < static_cast<int>(list.size()); ++i) {
        if (used[static_cast<std::size_t>(i)]) continue;
        const auto& c = list[static_cast<std::size_t>(i)];
        if (best < 0) {
          best = i;
          continue;
        }
        const auto& b = list[static_cast<std::size_t>(best)];
        if (c.score > b.score || (c.score == b.score && c.item < b.item)) best = i;
      }
      used[static_cast<std::size_t>(best)] = true;
      if (list[static_cast<std::size_t>(best)].truth >= threshold) {
        ++hits;
        dcg += 1.0 / std::log2(pos + 1.0);
      }
    }
    double idcg = 0;
    for (int pos = 1; pos <= std::min(k, positives); ++pos) idcg += 1.0 / std::log2(pos + 1.0);
    recall += static_cast<double>(hits) / positives;
    ndcg += dcg / idcg;
  }
  if (users == 0) return {};
  return {recall / static_cast<double>(users), ndcg / static_cast<double>(users), users};
}

std::vector<ScoredEntry> random_instance(std::mt19937_64& rng) {
  const int n_users = 1 + static_cast<int>(rng() % 10);
  const int n_items = 1 + static_cast<int>(rng() % 10);
  std::vector<ScoredEntry> out;
  for (int u = 0; u < n_users; ++u)
    for (int v = 0; v < n_items; ++v)
      if (rng() % 3 != 0) {
        // coarse scores so ties are common
        const double score = static_cast<double>(rng() % 7) * 0.5 + (rng() % 2 ? 0.0 : 0.123);
        out.push_back({u, v, static_cast<double>(1 + rng() % 5), score});
      }
  return out;
}

}  // namespace

TEST(RatingMetrics, Examples) {
  const std::vector<double> p = {3, 4}, t = {4, 4};
  const auto m = evaluate_rating(p, t);
  EXPECT_DOUBLE_EQ(m.mae, 0.5);
  EXPECT_NEAR(m.rmse, std::sqrt(0.5), 1e-15);
  const auto perfect = evaluate_rating(t, t);
  EXPECT_EQ(perfect.mae, 0.0);
  EXPECT_EQ(perfect.rmse, 0.0);
  EXPECT_THROW(evaluate_rating({}, {}), std::invalid_argument);
  EXPECT_THROW(evaluate_rating(p, std::vector<double>{1}), std::invalid_argument);
}

TEST(RankingMetrics, NdcgHandExample) {
  const int rel[] = {1, 0, 1};
  const double dcg = dcg_at_k(rel, 5);
  EXPECT_NEAR(dcg, 1.5, 1e-15);
  const int ideal[] = {1, 1, 0};
  EXPECT_NEAR(dcg_at_k(ideal, 5), 1.0 + 1.0 / std::log2(3.0), 1e-15);
  EXPECT_NEAR(dcg / dcg_at_k(ideal, 5), 0.91972, 5e-6);

  // same pattern through the per-user path
  const std::vector<ScoredEntry> e = {{0, 0, 5, 0.9}, {0, 1, 1, 0.5}, {0, 2, 4, 0.1}};
  const auto m = evaluate_ranking(e, 3, 5);
  EXPECT_NEAR(m.ndcg, 1.5 / (1.0 + 1.0 / std::log2(3.0)), 1e-15);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
}

TEST(RankingMetrics, AllPositiveShortListIsPerfect) {
  const std::vector<ScoredEntry> e = {{0, 0, 5, 0.1}, {0, 1, 4, 0.7}, {0, 2, 3, 0.3}};
  const auto m = evaluate_ranking(e, 3, 5);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_DOUBLE_EQ(m.ndcg, 1.0);
  EXPECT_EQ(m.users, 1u);
}

TEST(RankingMetrics, TiesFallBackToItemOrder) {
  std::vector<ScoredEntry> e;
  for (int v = 0; v < 8; ++v) e.push_back({0, 7 - v, v >= 6 ? 5.0 : 1.0, 2.0});
  // items 0 and 1 are positive and win every tie
  const auto m = evaluate_ranking(e, 4, 5);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_DOUBLE_EQ(m.ndcg, 1.0);
  EXPECT_EQ(evaluate_ranking(e, 4, 5).ndcg, m.ndcg);
}

TEST(RankingMetrics, UsersWithoutPositivesSkipped) {
  const std::vector<ScoredEntry> e = {{0, 0, 1, 0.9}, {1, 0, 5, 0.1}};
  const auto m = evaluate_ranking(e, 3, 5);
  EXPECT_EQ(m.users, 1u);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_EQ(evaluate_ranking(std::vector<ScoredEntry>{{0, 0, 1, 0.9}}, 3, 5).users, 0u);
}

TEST(MetricOracle, HundredRandomInstances) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto e = random_instance(rng);
    if (e.empty()) continue;
    std::vector<double> p, t;
    double abs_sum = 0, sq_sum = 0;
    for (const auto& x : e) {
      p.push_back(x.score);
      t.push_back(x.truth);
      abs_sum += std::abs(x.score - x.truth);
      sq_sum += (x.score - x.truth) * (x.score - x.truth);
    }
    const auto r = evaluate_rating(p, t);
    EXPECT_NEAR(r.mae, abs_sum / static_cast<double>(e.size()), 1e-12);
    EXPECT_NEAR(r.rmse, std::sqrt(sq_sum / static_cast<double>(e.size())), 1e-12);
    EXPECT_LE(r.mae, r.rmse + 1e-15);
    for (double f : {3.0, 4.0}) {
      const auto a = evaluate_ranking(e, f, 5);
      const auto b = brute_ranking(e, f, 5);
      EXPECT_NEAR(a.recall, b.recall, 1e-12);
      EXPECT_NEAR(a.ndcg, b.ndcg, 1e-12);
      EXPECT_EQ(a.users, b.users);
      EXPECT_GE(a.recall, 0.0);
      EXPECT_LE(a.recall, 1.0);
      EXPECT_GE(a.ndcg, 0.0);
      EXPECT_LE(a.ndcg, 1.0 + 1e-12);
    }
  }
}

TEST(MetricOracle, MonotoneTransformInvariance) {
  std::mt19937_64 rng(78);
  for (int trial = 0; trial < 100; ++trial) {
    auto e = random_instance(rng);
    if (e.empty()) continue;
    auto g = e;
    for (auto& x : g) x.score = std::exp(3.0 * x.score) - 7.0;
    for (double f : {3.0, 4.0}) {
      const auto a = evaluate_ranking(e, f, 5);
      const auto b = evaluate_ranking(g, f, 5);
      EXPECT_EQ(a.recall, b.recall);
      EXPECT_EQ(a.ndcg, b.ndcg);
    }
  }
}
