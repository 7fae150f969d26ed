#include "gdsrec/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string_view>

#include "json.hpp"

#include "gdsrec/error.hpp"

namespace gdsrec {

std::int32_t IdMap::intern(std::int64_t raw) {
  auto [it, inserted] = index_.try_emplace(raw, static_cast<std::int32_t>(raw_ids_.size()));
  if (inserted) raw_ids_.push_back(raw);
  return it->second;
}

std::int32_t IdMap::find(std::int64_t raw) const {
  auto it = index_.find(raw);
  return it == index_.end() ? -1 : it->second;
}

double DecentralizedStats::user(std::int32_t u) const {
  if (u < 0 || static_cast<std::size_t>(u) >= user_avg.size()) return global_avg;
  return user_avg[static_cast<std::size_t>(u)];
}

double DecentralizedStats::item(std::int32_t v) const {
  if (v < 0 || static_cast<std::size_t>(v) >= item_avg.size()) return global_avg;
  return item_avg[static_cast<std::size_t>(v)];
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits on commas and parses every field as an integer. Returns false when
// the field count differs or a field is not an integer.
bool parse_fields(std::string_view line, std::size_t expected, std::int64_t* out) {
  std::size_t field = 0;
  while (true) {
    const auto comma = line.find(',');
    const auto token = trim(line.substr(0, comma));
    if (field >= expected || token.empty()) return false;
    std::int64_t value = 0;
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return false;
    out[field++] = value;
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return field == expected;
}

bool looks_like_header(std::string_view line) {
  return std::any_of(line.begin(), line.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
}

// Visits non-blank lines as (1-based line number, content).
template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    auto line = trim(std::string_view(text).substr(start, end - start));
    if (line_no == 1 && line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
    if (!line.empty()) fn(line_no, line);
    start = end + 1;
  }
}

}  // namespace

RatingTable parse_ratings(const std::string& text, LoadReport* report) {
  RatingTable table;
  LoadReport local;
  std::unordered_map<std::uint64_t, std::size_t> slot;  // (user,item) -> record index
  bool first = true;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    std::int64_t f[3];
    const bool ok = parse_fields(line, 3, f);
    if (!ok) {
      if (first && looks_like_header(line)) {
        local.header_skipped = true;
        first = false;
        return;
      }
      throw DataError("ratings line " + std::to_string(line_no) + ": expected user,item,rating: '" +
                      std::string(line) + "'");
    }
    first = false;
    if (f[2] < kMinRating || f[2] > kMaxRating)
      throw DataError("ratings line " + std::to_string(line_no) + ": rating " + std::to_string(f[2]) +
                      " outside [1,5]");
    ++local.lines;
    RatingRecord rec{table.vocab->users.intern(f[0]), table.vocab->items.intern(f[1]),
                     static_cast<std::int32_t>(f[2])};
    const auto key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(rec.user)) << 32) |
                     static_cast<std::uint32_t>(rec.item);
    auto [it, inserted] = slot.try_emplace(key, table.records.size());
    if (inserted) {
      table.records.push_back(rec);
    } else {
      table.records[it->second].rating = rec.rating;
      ++local.duplicates_replaced;
    }
  });
  if (table.records.empty()) throw DataError("ratings file contains no records");
  if (report) *report = local;
  return table;
}

RatingTable load_ratings(const std::filesystem::path& path, LoadReport* report) {
  return parse_ratings(read_file(path), report);
}

TrustEdges parse_trust(const std::string& text, Vocabulary& vocab) {
  TrustEdges out;
  std::unordered_map<std::uint64_t, bool> seen;
  bool first = true;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    std::int64_t f[2];
    if (!parse_fields(line, 2, f)) {
      if (first && looks_like_header(line)) {
        first = false;
        return;
      }
      throw DataError("trust line " + std::to_string(line_no) + ": expected trustor,trustee: '" +
                      std::string(line) + "'");
    }
    first = false;
    if (f[0] == f[1]) {
      ++out.self_loops_dropped;
      return;
    }
    TrustEdge e{vocab.users.intern(f[0]), vocab.users.intern(f[1])};
    const auto key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e.trustor)) << 32) |
                     static_cast<std::uint32_t>(e.trustee);
    if (!seen.emplace(key, true).second) {
      ++out.duplicates_dropped;
      return;
    }
    out.edges.push_back(e);
  });
  return out;
}

TrustEdges load_trust(const std::filesystem::path& path, Vocabulary& vocab) {
  return parse_trust(read_file(path), vocab);
}

SplitDataset split_dataset(const RatingTable& table, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0,1), got " + std::to_string(train_fraction));
  if (table.empty()) throw DataError("cannot split an empty rating table");

  std::vector<RatingRecord> shuffled = table.records;
  std::mt19937_64 rng(seed);
  // Explicit Fisher-Yates so the permutation does not depend on the standard
  // library's shuffle implementation.
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(shuffled[i - 1], shuffled[j]);
  }

  const auto n = shuffled.size();
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
  const auto n_val = (n - n_train) / 2;

  SplitDataset split;
  split.split_seed = seed;
  split.train_fraction = train_fraction;
  const auto begin = shuffled.begin();
  split.train = table.view({begin, begin + static_cast<std::ptrdiff_t>(n_train)});
  split.validation = table.view({begin + static_cast<std::ptrdiff_t>(n_train),
                                 begin + static_cast<std::ptrdiff_t>(n_train + n_val)});
  split.test = table.view({begin + static_cast<std::ptrdiff_t>(n_train + n_val), shuffled.end()});
  return split;
}

DecentralizedStats compute_stats(const RatingTable& train) {
  if (train.empty()) throw DataError("statistics need a non-empty training table");
  const auto nu = static_cast<std::size_t>(train.n_users());
  const auto nv = static_cast<std::size_t>(train.n_items());
  std::vector<double> user_sum(nu, 0.0), item_sum(nv, 0.0);
  std::vector<std::size_t> user_n(nu, 0), item_n(nv, 0);
  double total = 0.0;
  for (const auto& r : train.records) {
    user_sum[static_cast<std::size_t>(r.user)] += r.rating;
    item_sum[static_cast<std::size_t>(r.item)] += r.rating;
    ++user_n[static_cast<std::size_t>(r.user)];
    ++item_n[static_cast<std::size_t>(r.item)];
    total += r.rating;
  }
  DecentralizedStats stats;
  stats.global_avg = total / static_cast<double>(train.size());
  stats.user_avg.resize(nu);
  stats.item_avg.resize(nv);
  for (std::size_t u = 0; u < nu; ++u)
    stats.user_avg[u] = user_n[u] ? user_sum[u] / static_cast<double>(user_n[u]) : stats.global_avg;
  for (std::size_t v = 0; v < nv; ++v)
    stats.item_avg[v] = item_n[v] ? item_sum[v] / static_cast<double>(item_n[v]) : stats.global_avg;
  return stats;
}

int difference_level(int rating, double avg) {
  const int d = rating - static_cast<int>(std::ceil(avg));
  return std::clamp(d, -kLevelOffset, kLevelOffset);
}

std::string vocabulary_json(const Vocabulary& vocab) {
  nlohmann::json j;
  j["users"] = vocab.users.raw_ids();
  j["items"] = vocab.items.raw_ids();
  return j.dump();
}

}  // namespace gdsrec
