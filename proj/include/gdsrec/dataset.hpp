#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace gdsrec {

inline constexpr int kMinRating = 1;
inline constexpr int kMaxRating = 5;

// Maps raw integer ids from the input files onto contiguous indices.
class IdMap {
 public:
  // Returns the contiguous index for `raw`, inserting it if unseen.
  std::int32_t intern(std::int64_t raw);
  // Returns -1 when `raw` has never been interned.
  std::int32_t find(std::int64_t raw) const;
  std::int64_t raw(std::int32_t index) const { return raw_ids_.at(static_cast<std::size_t>(index)); }
  std::int32_t size() const { return static_cast<std::int32_t>(raw_ids_.size()); }
  const std::vector<std::int64_t>& raw_ids() const { return raw_ids_; }

 private:
  std::unordered_map<std::int64_t, std::int32_t> index_;
  std::vector<std::int64_t> raw_ids_;
};

struct Vocabulary {
  IdMap users;
  IdMap items;
};

struct RatingRecord {
  std::int32_t user = 0;
  std::int32_t item = 0;
  std::int32_t rating = 0;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

// The observed ratings over a shared vocabulary. Splits share the vocabulary
// of the table they were cut from.
struct RatingTable {
  std::shared_ptr<Vocabulary> vocab = std::make_shared<Vocabulary>();
  std::vector<RatingRecord> records;

  std::int32_t n_users() const { return vocab->users.size(); }
  std::int32_t n_items() const { return vocab->items.size(); }
  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  // Same vocabulary, different record subset.
  RatingTable view(std::vector<RatingRecord> subset) const { return RatingTable{vocab, std::move(subset)}; }
};

struct TrustEdge {
  std::int32_t trustor = 0;
  std::int32_t trustee = 0;

  friend bool operator==(const TrustEdge&, const TrustEdge&) = default;
};

struct TrustEdges {
  std::vector<TrustEdge> edges;
  std::size_t self_loops_dropped = 0;
  std::size_t duplicates_dropped = 0;
};

struct SplitDataset {
  RatingTable train;
  RatingTable validation;
  RatingTable test;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.0;
};

struct DecentralizedStats {
  std::vector<double> user_avg;
  std::vector<double> item_avg;
  double global_avg = 0.0;

  double user(std::int32_t u) const;
  double item(std::int32_t v) const;
};

struct LoadReport {
  std::size_t lines = 0;
  std::size_t duplicates_replaced = 0;
  bool header_skipped = false;
};

// Reads `user,item,rating` lines (header optional, LF or CRLF). Duplicate
// (user,item) pairs keep the last occurrence. Throws DataError with the line
// number on malformed input or out-of-range ratings.
RatingTable load_ratings(const std::filesystem::path& path, LoadReport* report = nullptr);
RatingTable parse_ratings(const std::string& text, LoadReport* report = nullptr);

// Reads `trustor,trustee` lines. Users that have no ratings are added to the
// user vocabulary of `vocab`.
TrustEdges load_trust(const std::filesystem::path& path, Vocabulary& vocab);
TrustEdges parse_trust(const std::string& text, Vocabulary& vocab);

SplitDataset split_dataset(const RatingTable& table, double train_fraction, std::uint64_t seed);

DecentralizedStats compute_stats(const RatingTable& train);

// Signed deviation of a rating from the ceiling of an average, clamped to
// [-4, 4].
int difference_level(int rating, double avg);

inline constexpr int kLevelCount = 9;
inline constexpr int kLevelOffset = 4;

// JSON export of the raw-id maps.
std::string vocabulary_json(const Vocabulary& vocab);

}  // namespace gdsrec
