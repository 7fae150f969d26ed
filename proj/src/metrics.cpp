#include "gdsrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace gdsrec {

RatingMetrics evaluate_rating(std::span<const double> predictions, std::span<const double> truth) {
  if (predictions.size() != truth.size()) throw std::invalid_argument("prediction/truth length mismatch");
  if (predictions.empty()) throw std::invalid_argument("cannot evaluate an empty test set");
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double e = predictions[i] - truth[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const auto n = static_cast<double>(predictions.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

double dcg_at_k(std::span<const int> relevance, int k) {
  double dcg = 0.0;
  const auto limit = std::min<std::size_t>(relevance.size(), static_cast<std::size_t>(std::max(k, 0)));
  for (std::size_t pos = 0; pos < limit; ++pos)
    if (relevance[pos]) dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
  return dcg;
}

RankingMetrics evaluate_ranking(std::span<const ScoredEntry> entries, double threshold, int k) {
  if (k <= 0) throw std::invalid_argument("ranking cutoff must be positive");
  std::unordered_map<std::int32_t, std::vector<const ScoredEntry*>> by_user;
  for (const auto& e : entries) by_user[e.user].push_back(&e);

  std::vector<std::int32_t> users;
  users.reserve(by_user.size());
  for (const auto& [u, list] : by_user) users.push_back(u);
  std::sort(users.begin(), users.end());

  RankingMetrics out;
  std::vector<int> relevance;
  for (auto u : users) {
    auto& list = by_user[u];
    std::sort(list.begin(), list.end(), [](const ScoredEntry* a, const ScoredEntry* b) {
      if (a->score != b->score) return a->score > b->score;
      return a->item < b->item;
    });
    relevance.clear();
    int positives = 0;
    for (const auto* e : list) {
      const int rel = e->truth >= threshold ? 1 : 0;
      relevance.push_back(rel);
      positives += rel;
    }
    if (positives == 0) continue;
    int hits = 0;
    for (std::size_t i = 0; i < relevance.size() && i < static_cast<std::size_t>(k); ++i) hits += relevance[i];
    std::vector<int> ideal(static_cast<std::size_t>(positives), 1);
    out.recall += static_cast<double>(hits) / positives;
    out.ndcg += dcg_at_k(relevance, k) / dcg_at_k(ideal, k);
    ++out.users;
  }
  if (out.users) {
    out.recall /= static_cast<double>(out.users);
    out.ndcg /= static_cast<double>(out.users);
  }
  return out;
}

}  // namespace gdsrec
