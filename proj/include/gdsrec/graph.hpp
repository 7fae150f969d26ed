#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "gdsrec/dataset.hpp"

namespace gdsrec {

// What an interaction edge carries into the aggregation.
//   kDifference: signed level r - ceil(avg of the opposite endpoint), -4..4
//   kRawRating:  the rating itself, 1..5 (the rating-difference ablation)
enum class EdgeLabel { kDifference, kRawRating };

struct InteractionEdge {
  std::int32_t id = 0;     // item for user_adj, user for item_adj
  std::int32_t level = 0;  // meaning depends on InteractionGraph::label
};

struct InteractionGraph {
  EdgeLabel label = EdgeLabel::kDifference;
  std::vector<std::vector<InteractionEdge>> user_adj;  // R(u)
  std::vector<std::vector<InteractionEdge>> item_adj;  // R(v)

  // Row of the label embedding table for an edge level.
  int embedding_row(int level) const {
    return label == EdgeLabel::kDifference ? level + kLevelOffset : level - kMinRating;
  }
  int vocabulary_size() const { return label == EdgeLabel::kDifference ? kLevelCount : kMaxRating; }
};

InteractionGraph build_interaction_graph(const RatingTable& train, const DecentralizedStats& stats,
                                         EdgeLabel label = EdgeLabel::kDifference);

struct SocialNeighbor {
  std::int32_t id = 0;
  std::int32_t strength = 0;  // co-rated items with |r_iv - r_kv| <= delta
  double lambda = 0.0;
};

struct SocialGraph {
  std::vector<std::vector<SocialNeighbor>> neighbors;  // N(u), trustor -> trustees
};

// Relationship coefficients: lambda_ik proportional to the number of items both
// users rated within `delta` of each other, normalised over N(u_i). Falls back
// to 1/|N(u_i)| when every strength is zero or `uniform` is set.
SocialGraph compute_relationship_coefficients(const RatingTable& train, const TrustEdges& trust, int delta,
                                              bool uniform);

// Strength for one ordered pair, by merging the two users' rating lists.
std::int32_t co_rating_strength(const std::vector<std::pair<std::int32_t, std::int32_t>>& a,
                                const std::vector<std::pair<std::int32_t, std::int32_t>>& b, int delta);

struct NeighborSample {
  std::int32_t node_id = 0;
  std::vector<std::int32_t> kept;  // ascending positions into the full neighbor list
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;
};

// Keeps at most `k` positions out of `list_size`, uniformly without
// replacement. The draw is a pure function of (seed, epoch, node_id).
NeighborSample sample_neighbors(std::size_t list_size, int k, std::uint64_t seed, std::uint64_t epoch,
                                std::int32_t node_id);

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// CSV `user,neighbor,lambda` using raw ids.
void write_social_csv(std::ostream& out, const SocialGraph& graph, const IdMap& users);
SocialGraph read_social_csv(std::istream& in, const IdMap& users);

}  // namespace gdsrec
