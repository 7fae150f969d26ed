#include "gdsrec/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include "gdsrec/error.hpp"

namespace gdsrec {

InteractionGraph build_interaction_graph(const RatingTable& train, const DecentralizedStats& stats,
                                         EdgeLabel label) {
  InteractionGraph g;
  g.label = label;
  g.user_adj.resize(static_cast<std::size_t>(train.n_users()));
  g.item_adj.resize(static_cast<std::size_t>(train.n_items()));
  for (const auto& r : train.records) {
    int user_side = r.rating;
    int item_side = r.rating;
    if (label == EdgeLabel::kDifference) {
      user_side = difference_level(r.rating, stats.item(r.item));
      item_side = difference_level(r.rating, stats.user(r.user));
    }
    g.user_adj[static_cast<std::size_t>(r.user)].push_back({r.item, user_side});
    g.item_adj[static_cast<std::size_t>(r.item)].push_back({r.user, item_side});
  }
  for (auto& adj : g.user_adj)
    std::sort(adj.begin(), adj.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (auto& adj : g.item_adj)
    std::sort(adj.begin(), adj.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return g;
}

std::int32_t co_rating_strength(const std::vector<std::pair<std::int32_t, std::int32_t>>& a,
                                const std::vector<std::pair<std::int32_t, std::int32_t>>& b, int delta) {
  std::int32_t count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      if (std::abs(ia->second - ib->second) <= delta) ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

SocialGraph compute_relationship_coefficients(const RatingTable& train, const TrustEdges& trust, int delta,
                                              bool uniform) {
  if (delta < 0) throw ConfigError("delta must be non-negative");
  const auto nu = static_cast<std::size_t>(train.n_users());
  // (item, rating) per user, sorted by item
  std::vector<std::vector<std::pair<std::int32_t, std::int32_t>>> rated(nu);
  for (const auto& r : train.records) rated[static_cast<std::size_t>(r.user)].emplace_back(r.item, r.rating);
  for (auto& list : rated) std::sort(list.begin(), list.end());

  SocialGraph g;
  g.neighbors.resize(nu);
  for (const auto& e : trust.edges) {
    if (e.trustor < 0 || static_cast<std::size_t>(e.trustor) >= nu || e.trustee < 0 ||
        static_cast<std::size_t>(e.trustee) >= nu)
      throw DataError("trust edge references a user outside the vocabulary");
    const auto strength = co_rating_strength(rated[static_cast<std::size_t>(e.trustor)],
                                             rated[static_cast<std::size_t>(e.trustee)], delta);
    g.neighbors[static_cast<std::size_t>(e.trustor)].push_back({e.trustee, strength, 0.0});
  }
  for (auto& list : g.neighbors) {
    if (list.empty()) continue;
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    const double total = std::accumulate(list.begin(), list.end(), 0.0,
                                         [](double s, const SocialNeighbor& n) { return s + n.strength; });
    const double uniform_weight = 1.0 / static_cast<double>(list.size());
    for (auto& n : list) n.lambda = (uniform || total == 0.0) ? uniform_weight : n.strength / total;
  }
  return g;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finaliser over a combined word
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

NeighborSample sample_neighbors(std::size_t list_size, int k, std::uint64_t seed, std::uint64_t epoch,
                                std::int32_t node_id) {
  if (k <= 0) throw ConfigError("neighbor reservation K must be positive, got " + std::to_string(k));
  NeighborSample s;
  s.node_id = node_id;
  s.epoch = epoch;
  s.seed = seed;
  s.kept.resize(list_size);
  std::iota(s.kept.begin(), s.kept.end(), 0);
  const auto keep = static_cast<std::size_t>(k);
  if (list_size <= keep) return s;

  std::mt19937_64 rng(mix_seed(mix_seed(seed, epoch), static_cast<std::uint64_t>(node_id)));
  // partial Fisher-Yates: the first `keep` slots end up a uniform subset
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (list_size - i));
    std::swap(s.kept[i], s.kept[j]);
  }
  s.kept.resize(keep);
  std::sort(s.kept.begin(), s.kept.end());
  return s;
}

void write_social_csv(std::ostream& out, const SocialGraph& graph, const IdMap& users) {
  out << "user,neighbor,lambda\n";
  char buf[64];
  for (std::size_t u = 0; u < graph.neighbors.size(); ++u) {
    for (const auto& n : graph.neighbors[u]) {
      std::snprintf(buf, sizeof buf, "%.17g", n.lambda);
      out << users.raw(static_cast<std::int32_t>(u)) << ',' << users.raw(n.id) << ',' << buf << '\n';
    }
  }
}

SocialGraph read_social_csv(std::istream& in, const IdMap& users) {
  SocialGraph g;
  g.neighbors.resize(static_cast<std::size_t>(users.size()));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    long long a = 0, b = 0;
    double lambda = 0.0;
    if (std::sscanf(line.c_str(), "%lld,%lld,%lf", &a, &b, &lambda) != 3)
      throw DataError("social csv line " + std::to_string(line_no) + " malformed");
    const auto u = users.find(a);
    const auto k = users.find(b);
    if (u < 0 || k < 0) throw DataError("social csv line " + std::to_string(line_no) + " has an unknown user");
    g.neighbors[static_cast<std::size_t>(u)].push_back({k, 0, lambda});
  }
  return g;
}

}  // namespace gdsrec
