#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "gdsrec/error.hpp"
#include "gdsrec/graph.hpp"

using namespace gdsrec;

namespace {

RatingTable random_table(std::uint64_t seed, int n_users, int n_items, double density) {
  std::mt19937_64 rng(seed);
  RatingTable t;
  for (int u = 0; u < n_users; ++u) t.vocab->users.intern(u);
  for (int v = 0; v < n_items; ++v) t.vocab->items.intern(v);
  for (int u = 0; u < n_users; ++u)
    for (int v = 0; v < n_items; ++v)
      if (std::uniform_real_distribution<double>(0, 1)(rng) < density)
        t.records.push_back({u, v, static_cast<std::int32_t>(1 + rng() % 5)});
  return t;
}

TrustEdges random_trust(std::uint64_t seed, int n_users, int per_user) {
  std::mt19937_64 rng(seed);
  TrustEdges e;
  for (int u = 0; u < n_users; ++u) {
    std::set<int> seen;
    for (int i = 0; i < per_user; ++i) {
      const int k = static_cast<int>(rng() % static_cast<std::uint64_t>(n_users));
      if (k != u && seen.insert(k).second) e.edges.push_back({u, k});
    }
  }
  return e;
}

// t_ik by scanning every pair of records.
int brute_strength(const RatingTable& t, int i, int k, int delta) {
  int count = 0;
  for (const auto& a : t.records)
    for (const auto& b : t.records)
      if (a.user == i && b.user == k && a.item == b.item && std::abs(a.rating - b.rating) <= delta) ++count;
  return count;
}

// u1 {a:5,b:3,c:4}; u2 {a:4,b:1}; u3 {c:4}; u1 trusts u2 and u3
struct ThreeUsers {
  RatingTable table;
  TrustEdges trust;
  ThreeUsers() {
    for (int u = 1; u <= 3; ++u) table.vocab->users.intern(u);
    for (int v = 0; v < 3; ++v) table.vocab->items.intern(v);
    table.records = {{0, 0, 5}, {0, 1, 3}, {0, 2, 4}, {1, 0, 4}, {1, 1, 1}, {2, 2, 4}};
    trust.edges = {{0, 1}, {0, 2}};
  }
};

}  // namespace

TEST(InteractionGraph, IdentityLevels) {
  RatingTable t;
  t.vocab->users.intern(1);
  t.vocab->items.intern(1);
  t.records = {{0, 0, 5}};
  const auto g = build_interaction_graph(t, compute_stats(t));
  ASSERT_EQ(g.user_adj[0].size(), 1u);
  EXPECT_EQ(g.user_adj[0][0].level, 0);
  EXPECT_EQ(g.item_adj[0][0].level, 0);
}

TEST(InteractionGraph, EachSideDiffersAgainstTheOppositeAverage) {
  RatingTable t;
  t.vocab->users.intern(1);
  t.vocab->items.intern(1);
  t.records = {{0, 0, 5}};
  DecentralizedStats s;
  s.user_avg = {2.0};
  s.item_avg = {3.4};
  s.global_avg = 3.0;
  const auto g = build_interaction_graph(t, s);
  EXPECT_EQ(g.user_adj[0][0].level, 1);  // 5 - ceil(3.4)
  EXPECT_EQ(g.item_adj[0][0].level, 3);  // 5 - ceil(2.0)
  EXPECT_EQ(g.embedding_row(g.user_adj[0][0].level), 5);
  EXPECT_EQ(g.vocabulary_size(), 9);
}

TEST(InteractionGraph, RawRatingLabelsForRdVariant) {
  RatingTable t;
  t.vocab->users.intern(1);
  t.vocab->items.intern(1);
  t.records = {{0, 0, 4}};
  const auto g = build_interaction_graph(t, compute_stats(t), EdgeLabel::kRawRating);
  EXPECT_EQ(g.user_adj[0][0].level, 4);
  EXPECT_EQ(g.embedding_row(4), 3);
  EXPECT_EQ(g.vocabulary_size(), 5);
}

TEST(InteractionGraph, SidesMirrorEachOther) {
  const auto t = random_table(3, 40, 30, 0.2);
  const auto g = build_interaction_graph(t, compute_stats(t));
  std::size_t user_edges = 0, item_edges = 0;
  for (const auto& l : g.user_adj) user_edges += l.size();
  for (const auto& l : g.item_adj) item_edges += l.size();
  EXPECT_EQ(user_edges, t.size());
  EXPECT_EQ(item_edges, t.size());
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto& r = t.records[rng() % t.size()];
    const auto& ul = g.user_adj[static_cast<std::size_t>(r.user)];
    const auto& il = g.item_adj[static_cast<std::size_t>(r.item)];
    EXPECT_TRUE(std::any_of(ul.begin(), ul.end(), [&](const InteractionEdge& e) { return e.id == r.item; }));
    EXPECT_TRUE(std::any_of(il.begin(), il.end(), [&](const InteractionEdge& e) { return e.id == r.user; }));
    for (std::size_t j = 1; j < ul.size(); ++j) EXPECT_LT(ul[j - 1].id, ul[j].id);
  }
}

TEST(RelationshipCoefficients, DeltaOneGivesEqualWeights) {
  ThreeUsers d;
  const auto s = compute_relationship_coefficients(d.table, d.trust, 1, false);
  ASSERT_EQ(s.neighbors[0].size(), 2u);
  EXPECT_EQ(s.neighbors[0][0].strength, 1);
  EXPECT_EQ(s.neighbors[0][1].strength, 1);
  EXPECT_DOUBLE_EQ(s.neighbors[0][0].lambda, 0.5);
  EXPECT_DOUBLE_EQ(s.neighbors[0][1].lambda, 0.5);
}

TEST(RelationshipCoefficients, DeltaZero) {
  ThreeUsers d;
  const auto s = compute_relationship_coefficients(d.table, d.trust, 0, false);
  std::map<int, double> lambda;
  for (const auto& n : s.neighbors[0]) lambda[n.id] = n.lambda;
  EXPECT_DOUBLE_EQ(lambda[1], 0.0);
  EXPECT_DOUBLE_EQ(lambda[2], 1.0);
}

TEST(RelationshipCoefficients, UniformFlag) {
  RatingTable t;
  for (int u = 0; u < 5; ++u) t.vocab->users.intern(u);
  t.vocab->items.intern(0);
  t.records = {{0, 0, 5}, {1, 0, 5}};
  TrustEdges e;
  for (int k = 1; k < 5; ++k) e.edges.push_back({0, k});
  const auto s = compute_relationship_coefficients(t, e, 1, true);
  ASSERT_EQ(s.neighbors[0].size(), 4u);
  for (const auto& n : s.neighbors[0]) EXPECT_DOUBLE_EQ(n.lambda, 0.25);
}

TEST(RelationshipCoefficients, ZeroOverlapFallsBackToUniform) {
  RatingTable t;
  for (int u = 0; u < 3; ++u) t.vocab->users.intern(u);
  for (int v = 0; v < 3; ++v) t.vocab->items.intern(v);
  t.records = {{0, 0, 5}, {1, 1, 5}, {2, 2, 5}};
  TrustEdges e;
  e.edges = {{0, 1}, {0, 2}};
  const auto s = compute_relationship_coefficients(t, e, 3, false);
  for (const auto& n : s.neighbors[0]) EXPECT_DOUBLE_EQ(n.lambda, 0.5);
}

TEST(RelationshipCoefficients, NormalisedAndMonotoneAgainstBruteForce) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const auto t = random_table(seed, 10, 8, 0.5);
    const auto e = random_trust(seed + 100, 10, 3);
    std::vector<SocialGraph> by_delta;
    for (int delta = 0; delta <= 3; ++delta) {
      by_delta.push_back(compute_relationship_coefficients(t, e, delta, false));
      for (bool uniform : {false, true}) {
        const auto s = compute_relationship_coefficients(t, e, delta, uniform);
        for (std::size_t u = 0; u < s.neighbors.size(); ++u) {
          if (s.neighbors[u].empty()) continue;
          double sum = 0.0;
          for (const auto& n : s.neighbors[u]) {
            sum += n.lambda;
            EXPECT_GE(n.lambda, 0.0);
            EXPECT_EQ(n.strength, brute_strength(t, static_cast<int>(u), n.id, delta));
          }
          EXPECT_NEAR(sum, 1.0, 1e-9);
        }
      }
    }
    for (int delta = 1; delta <= 3; ++delta)
      for (std::size_t u = 0; u < by_delta[0].neighbors.size(); ++u)
        for (std::size_t j = 0; j < by_delta[0].neighbors[u].size(); ++j)
          EXPECT_GE(by_delta[static_cast<std::size_t>(delta)].neighbors[u][j].strength,
                    by_delta[static_cast<std::size_t>(delta) - 1].neighbors[u][j].strength);
  }
}

TEST(RelationshipCoefficients, SocialCsvRoundTrip) {
  const auto t = random_table(9, 12, 10, 0.4);
  const auto e = random_trust(10, 12, 4);
  const auto s = compute_relationship_coefficients(t, e, 1, false);
  std::stringstream ss;
  write_social_csv(ss, s, t.vocab->users);
  const auto back = read_social_csv(ss, t.vocab->users);
  ASSERT_EQ(back.neighbors.size(), s.neighbors.size());
  for (std::size_t u = 0; u < s.neighbors.size(); ++u) {
    ASSERT_EQ(back.neighbors[u].size(), s.neighbors[u].size());
    for (std::size_t j = 0; j < s.neighbors[u].size(); ++j) {
      EXPECT_EQ(back.neighbors[u][j].id, s.neighbors[u][j].id);
      EXPECT_EQ(back.neighbors[u][j].lambda, s.neighbors[u][j].lambda);
    }
  }
}

TEST(SampleNeighbors, Examples) {
  const auto small = sample_neighbors(3, 10, 1, 1, 0);
  EXPECT_EQ(small.kept, (std::vector<std::int32_t>{0, 1, 2}));
  const auto big = sample_neighbors(40, 10, 1, 1, 0);
  EXPECT_EQ(big.kept.size(), 10u);
  EXPECT_EQ(std::set<std::int32_t>(big.kept.begin(), big.kept.end()).size(), 10u);
  EXPECT_TRUE(std::is_sorted(big.kept.begin(), big.kept.end()));
  EXPECT_EQ(sample_neighbors(40, 10, 1, 1, 0).kept, big.kept);
  EXPECT_NE(sample_neighbors(40, 10, 1, 2, 0).kept, big.kept);
  EXPECT_NE(sample_neighbors(40, 10, 1, 1, 1).kept, big.kept);
  EXPECT_THROW(sample_neighbors(5, 0, 1, 1, 0), ConfigError);
}

TEST(SampleNeighbors, InclusionFrequencyIsUniform) {
  const std::size_t n = 25;
  const int k = 10;
  const int epochs = 4000;
  std::vector<int> hits(n, 0);
  for (int e = 1; e <= epochs; ++e)
    for (auto pos : sample_neighbors(n, k, 42, static_cast<std::uint64_t>(e), 3).kept) ++hits[static_cast<std::size_t>(pos)];
  const double p = static_cast<double>(k) / static_cast<double>(n);
  const double se = std::sqrt(p * (1 - p) / epochs);
  for (auto h : hits) EXPECT_NEAR(static_cast<double>(h) / epochs, p, 3.0 * se);
}
