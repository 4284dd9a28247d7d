#include "doctest.h"

#include <bit>
#include <filesystem>
#include <fstream>
#include <limits>
#include <unistd.h>

#include "distpre/coordinator.hpp"
#include "distpre/error.hpp"
#include "distpre/rng.hpp"
#include "distpre/serialize.hpp"

using namespace distpre;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("distpre_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::shared_ptr<const LstmModel> model(int layers, int units, std::uint64_t seed) {
  auto m = init_model({0.03, layers, units, 100}, 6, 70, seed);
  CounterRng rng(seed);
  for (auto& w : m.params.out_w) w = rng.uniform(-1, 1);
  m.params.out_b = rng.uniform(-0.1, 0.1);
  return std::make_shared<const LstmModel>(m);
}

std::vector<ModelAssignment> sample_assignments() {
  std::vector<ModelAssignment> a(4);
  a[0] = {"d0", AssignmentKind::owned, std::nullopt, std::nullopt, model(1, 2, 1)};
  a[1] = {"d1", AssignmentKind::owned, std::nullopt, std::nullopt, model(2, 4, 2)};
  a[2] = {"d2", AssignmentKind::shared, "d0", 0.0123456789, a[0].model};
  a[3] = {"d3", AssignmentKind::shared, "d1", 0.05, a[1].model};
  return a;
}

bool bit_equal(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

}  // namespace

TEST_CASE("model JSON round trip is bit-exact") {
  auto m = *model(2, 4, 5);
  m.params.layers[0].w_in[0] = 0.1;
  m.params.layers[0].w_in[1] = std::numeric_limits<double>::denorm_min();
  m.params.layers[0].w_in[2] = -0.0;
  m.params.layers[0].w_in[3] = 1.0 / 3.0;
  auto back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
  CHECK(back == m);
  CHECK(bit_equal(back.params.layers[0].w_in[2], -0.0));
}

TEST_CASE("model JSON errors") {
  auto j = model_to_json(*model(1, 2, 1));
  auto wrong = j;
  wrong["format_version"] = 99;
  CHECK_THROWS_AS(model_from_json(wrong), FormatError);
  auto broken = j;
  broken.erase("output");
  CHECK_THROWS_AS(model_from_json(broken), FormatError);
}

TEST_CASE("registry save/load round trip preserves predictions") {
  TempDir dir("roundtrip");
  const auto a = sample_assignments();
  registry_save(a, dir.path, {{"note", "test"}});
  CHECK(fs::exists(dir.path / "manifest.json"));
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir.path / "models")) files += e.is_regular_file();
  CHECK(files == 2);

  const auto back = registry_load(dir.path);
  REQUIRE(back.size() == a.size());
  const std::vector<double> probe = {0.8, 0.82, 0.79, 0.6, 0.5, 0.55};
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(same_assignment(a[i], back[i]));
    CHECK(bit_equal(forward(*a[i].model, probe), forward(*back[i].model, probe)));
  }
  CHECK(back[2].model == back[0].model);
}

TEST_CASE("registry: missing model file is an integrity error") {
  TempDir dir("missing");
  registry_save(sample_assignments(), dir.path);
  fs::remove(dir.path / "models" / "d1.json");
  CHECK_THROWS_AS(registry_load(dir.path), IntegrityError);
}

TEST_CASE("registry: dangling donor is an integrity error") {
  TempDir dir("dangling");
  auto a = sample_assignments();
  a[3].donor_id = "nobody";
  registry_save(a, dir.path);
  CHECK_THROWS_AS(registry_load(dir.path), IntegrityError);
}

TEST_CASE("registry: format errors") {
  TempDir dir("format");
  registry_save(sample_assignments(), dir.path);
  auto manifest = nlohmann::json::parse(std::ifstream(dir.path / "manifest.json"));
  manifest["format_version"] = 2;
  std::ofstream(dir.path / "manifest.json") << manifest.dump();
  CHECK_THROWS_AS(registry_load(dir.path), FormatError);

  std::ofstream(dir.path / "manifest.json") << "{ not json";
  CHECK_THROWS_AS(registry_load(dir.path), FormatError);

  fs::remove(dir.path / "manifest.json");
  CHECK_THROWS_AS(registry_load(dir.path), IntegrityError);
}

TEST_CASE("registry: unsafe detector ids are rejected") {
  TempDir dir("ids");
  auto a = sample_assignments();
  a[0].detector_id = "../escape";
  CHECK_THROWS_AS(registry_save(a, dir.path), IntegrityError);
}
