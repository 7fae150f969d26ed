#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "gdsrec/autodiff.hpp"

namespace gdsrec {

inline constexpr int kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

// Writes `<stem>.bin` (little-endian float64, concatenated) and `<stem>.json`
// (version, per-array name/shape/offset, plus caller metadata under "meta").
void save_arrays(const std::filesystem::path& stem, const std::vector<NamedArray>& arrays,
                 const nlohmann::json& meta = nlohmann::json::object());

struct LoadedArrays {
  std::vector<NamedArray> arrays;
  nlohmann::json meta;

  const NamedArray& get(const std::string& name) const;
};

LoadedArrays load_arrays(const std::filesystem::path& stem);

void save_params(const std::filesystem::path& stem, const ad::ParamStore& params,
                 const nlohmann::json& meta = nlohmann::json::object());
// Loads values into an existing store; names and shapes must match.
nlohmann::json load_params(const std::filesystem::path& stem, ad::ParamStore& params);

}  // namespace gdsrec
