#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gdsrec {

struct RatingMetrics {
  double mae = 0.0;
  double rmse = 0.0;
};

// MAE and RMSE over paired predictions and ground truth.
RatingMetrics evaluate_rating(std::span<const double> predictions, std::span<const double> truth);

struct ScoredEntry {
  std::int32_t user = 0;
  std::int32_t item = 0;
  double truth = 0.0;
  double score = 0.0;
};

struct RankingMetrics {
  double recall = 0.0;
  double ndcg = 0.0;
  std::size_t users = 0;  // users with at least one positive
};

// Per user, ranks that user's observed test items by score (descending, ties
// by item id) and measures how many positives (truth >= threshold) land in
// the top k. Recall and binary-gain NDCG are averaged over users with at
// least one positive.
RankingMetrics evaluate_ranking(std::span<const ScoredEntry> entries, double threshold, int k = 5);

// DCG of a ranked 0/1 relevance list truncated at k, discount 1/log2(pos+1).
double dcg_at_k(std::span<const int> relevance, int k);

}  // namespace gdsrec
