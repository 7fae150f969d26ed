#include "gdsrec/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "gdsrec/error.hpp"

namespace gdsrec {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are written little-endian");

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

}  // namespace

void save_arrays(const std::filesystem::path& stem, const std::vector<NamedArray>& arrays,
                 const nlohmann::json& meta) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::ofstream blob(with_suffix(stem, ".bin"), std::ios::binary);
  if (!blob) throw DataError("cannot write " + with_suffix(stem, ".bin").string());

  nlohmann::json manifest;
  manifest["format"] = "gdsrec-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["dtype"] = "float64-le";
  manifest["arrays"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& a : arrays) {
    std::size_t count = 1;
    for (auto d : a.shape) count *= d;
    if (count != a.values.size()) throw std::invalid_argument("array " + a.name + " does not match its shape");
    blob.write(reinterpret_cast<const char*>(a.values.data()),
               static_cast<std::streamsize>(a.values.size() * sizeof(double)));
    manifest["arrays"].push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}, {"count", count}});
    offset += count;
  }
  manifest["total"] = offset;
  manifest["meta"] = meta;
  std::ofstream json(with_suffix(stem, ".json"));
  json << manifest.dump(2) << '\n';
  if (!blob || !json) throw DataError("failed writing checkpoint " + stem.string());
}

const NamedArray& LoadedArrays::get(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  throw DataError("checkpoint has no array named " + name);
}

LoadedArrays load_arrays(const std::filesystem::path& stem) {
  std::ifstream json(with_suffix(stem, ".json"));
  if (!json) throw DataError("missing checkpoint manifest " + with_suffix(stem, ".json").string());
  nlohmann::json manifest;
  try {
    json >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt checkpoint manifest: ") + e.what());
  }
  if (!manifest.contains("version")) throw DataError("checkpoint manifest has no version field");
  if (manifest["version"].get<int>() != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + manifest["version"].dump());

  std::ifstream blob(with_suffix(stem, ".bin"), std::ios::binary);
  if (!blob) throw DataError("missing checkpoint blob " + with_suffix(stem, ".bin").string());
  const auto total = manifest.at("total").get<std::size_t>();
  std::vector<double> data(total);
  blob.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(total * sizeof(double)));
  if (static_cast<std::size_t>(blob.gcount()) != total * sizeof(double)) throw DataError("checkpoint blob truncated");

  LoadedArrays out;
  out.meta = manifest.value("meta", nlohmann::json::object());
  for (const auto& entry : manifest.at("arrays")) {
    NamedArray a;
    a.name = entry.at("name").get<std::string>();
    a.shape = entry.at("shape").get<std::vector<std::size_t>>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto count = entry.at("count").get<std::size_t>();
    if (offset + count > total) throw DataError("checkpoint array " + a.name + " out of range");
    a.values.assign(data.begin() + static_cast<std::ptrdiff_t>(offset),
                    data.begin() + static_cast<std::ptrdiff_t>(offset + count));
    out.arrays.push_back(std::move(a));
  }
  return out;
}

void save_params(const std::filesystem::path& stem, const ad::ParamStore& params, const nlohmann::json& meta) {
  std::vector<NamedArray> arrays;
  arrays.reserve(params.size());
  for (ad::ParamId i = 0; i < params.size(); ++i) arrays.push_back({params[i].name, params[i].shape(), params[i].value});
  save_arrays(stem, arrays, meta);
}

nlohmann::json load_params(const std::filesystem::path& stem, ad::ParamStore& params) {
  auto loaded = load_arrays(stem);
  if (loaded.arrays.size() != params.size())
    throw DataError("checkpoint holds " + std::to_string(loaded.arrays.size()) + " arrays, model expects " +
                    std::to_string(params.size()));
  for (ad::ParamId i = 0; i < params.size(); ++i) {
    const auto& a = loaded.get(params[i].name);
    if (a.shape != params[i].shape()) throw DataError("checkpoint shape mismatch for " + params[i].name);
    params[i].value = a.values;
  }
  return loaded.meta;
}

}  // namespace gdsrec
