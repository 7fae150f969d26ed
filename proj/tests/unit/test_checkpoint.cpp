#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "gdsrec/checkpoint.hpp"
#include "gdsrec/error.hpp"
#include "gdsrec/model.hpp"

using namespace gdsrec;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gdsrec_ckpt_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Checkpoint, ArraysRoundTripWithVersion) {
  const auto dir = temp_dir("arrays");
  save_arrays(dir / "a", {{"x", {2, 3}, {1, 2, 3, 4, 5, 6}}, {"y", {1}, {0.1}}}, {{"note", "hi"}});
  std::ifstream in(dir / "a.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["version"], kCheckpointVersion);
  EXPECT_EQ(j["arrays"][1]["offset"], 6);
  const auto back = load_arrays(dir / "a");
  EXPECT_EQ(back.get("x").values, (std::vector<double>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(back.get("y").values[0], 0.1);
  EXPECT_EQ(back.meta["note"], "hi");
  EXPECT_THROW(back.get("z"), DataError);
}

TEST(Checkpoint, ModelParamsRoundTripBitExact) {
  const auto dir = temp_dir("model");
  ModelConfig c;
  c.dim = 5;
  GdsRecModel a(c, 7, 4, 1), b(c, 7, 4, 2);
  save_params(dir / "m", a.params());
  load_params(dir / "m", b.params());
  EXPECT_EQ(a.params().snapshot(), b.params().snapshot());
}

TEST(Checkpoint, ShapeMismatchAndCorruptionDetected) {
  const auto dir = temp_dir("bad");
  ModelConfig c;
  c.dim = 5;
  GdsRecModel a(c, 7, 4, 1), wider(c, 8, 4, 1);
  save_params(dir / "m", a.params());
  EXPECT_THROW(load_params(dir / "m", wider.params()), DataError);

  fs::resize_file(dir / "m.bin", 16);
  EXPECT_THROW(load_arrays(dir / "m"), DataError);

  save_params(dir / "v", a.params());
  std::ifstream in(dir / "v.json");
  auto j = nlohmann::json::parse(in);
  in.close();
  j["version"] = 99;
  std::ofstream(dir / "v.json") << j.dump();
  EXPECT_THROW(load_arrays(dir / "v"), DataError);
  j.erase("version");
  std::ofstream(dir / "v.json") << j.dump();
  EXPECT_THROW(load_arrays(dir / "v"), DataError);
  EXPECT_THROW(load_arrays(dir / "missing"), DataError);
}
