#include "gdsrec/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "gdsrec/error.hpp"

namespace gdsrec {

SyntheticData generate_synthetic(const SyntheticConfig& config) {
  if (config.n_users < 2 || config.n_items < 1) throw ConfigError("synthetic data needs >= 2 users and >= 1 item");
  if (config.ratings_per_user < 1 || config.ratings_per_user > config.n_items)
    throw ConfigError("ratings_per_user must lie in [1, n_items]");
  if (config.trust_per_user < 0 || config.trust_per_user >= config.n_users)
    throw ConfigError("trust_per_user must lie in [0, n_users)");

  std::mt19937_64 rng(config.seed);
  SyntheticData out;
  out.user_type.resize(static_cast<std::size_t>(config.n_users));
  out.item_level.resize(static_cast<std::size_t>(config.n_items));
  for (auto& t : out.user_type) t = static_cast<int>(rng() % 3);
  for (auto& s : out.item_level) s = 1 + static_cast<int>(rng() % 3);

  auto& vocab = *out.ratings.vocab;
  for (int u = 0; u < config.n_users; ++u) vocab.users.intern(u + 1);
  for (int v = 0; v < config.n_items; ++v) vocab.items.intern(v + 1);

  std::vector<std::int32_t> items(static_cast<std::size_t>(config.n_items));
  std::iota(items.begin(), items.end(), 0);
  for (int u = 0; u < config.n_users; ++u) {
    for (int i = 0; i < config.ratings_per_user; ++i) {
      const auto j = static_cast<std::size_t>(i) + static_cast<std::size_t>(rng() % (items.size() - static_cast<std::size_t>(i)));
      std::swap(items[static_cast<std::size_t>(i)], items[j]);
      const auto v = items[static_cast<std::size_t>(i)];
      out.ratings.records.push_back(
          {u, v, out.user_type[static_cast<std::size_t>(u)] + out.item_level[static_cast<std::size_t>(v)]});
    }
  }

  std::vector<std::vector<std::int32_t>> by_type(3);
  for (int u = 0; u < config.n_users; ++u) by_type[static_cast<std::size_t>(out.user_type[static_cast<std::size_t>(u)])].push_back(u);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int u = 0; u < config.n_users; ++u) {
    std::vector<std::int32_t> chosen;
    int attempts = 0;
    while (static_cast<int>(chosen.size()) < config.trust_per_user && attempts++ < 100 * config.n_users) {
      const auto& pool = coin(rng) < config.same_type_trust
                             ? by_type[static_cast<std::size_t>(out.user_type[static_cast<std::size_t>(u)])]
                             : by_type[rng() % 3];
      if (pool.empty()) continue;
      const auto k = pool[rng() % pool.size()];
      if (k == u || std::find(chosen.begin(), chosen.end(), k) != chosen.end()) continue;
      chosen.push_back(k);
    }
    std::sort(chosen.begin(), chosen.end());
    for (auto k : chosen) out.trust.edges.push_back({u, k});
  }
  return out;
}

}  // namespace gdsrec
