#pragma once

#include <cstdint>

#include "gdsrec/dataset.hpp"

namespace gdsrec {

// Synthetic ratings with a decentralised structure: every user has an offset
// type t_u in {0,1,2}, every item a level s_v in {1,2,3}, and r_uv = t_u + s_v
// (always inside [1,5]). Trust links join users, preferring users of the same
// type. Raw ids are 1-based so files round-trip through the loaders.
struct SyntheticConfig {
  int n_users = 200;
  int n_items = 200;
  int ratings_per_user = 25;
  int trust_per_user = 5;
  double same_type_trust = 0.8;  // probability a trust link stays within the user's type
  std::uint64_t seed = 0;
};

struct SyntheticData {
  RatingTable ratings;
  TrustEdges trust;
  std::vector<int> user_type;
  std::vector<int> item_level;
};

SyntheticData generate_synthetic(const SyntheticConfig& config);

}  // namespace gdsrec
