#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "distpre/coordinator.hpp"
#include "distpre/serialize.hpp"

using namespace distpre;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / ("distpre_cli_" + std::to_string(::getpid()));

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
  ~Workspace() { fs::remove_all(kWork); }
};

// Runs the CLI with `args`, stdout to `out` (relative to the workspace).
int cli(const std::string& args, const std::string& out = "stdout.txt") {
  const std::string cmd = "cd '" + kWork.string() + "' && DISTPRE_LOG=off '" DISTPRE_CLI "' " + args +
                          " > " + out + " 2> stderr.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> v;
  for (std::string line; std::getline(in, line);) v.push_back(line);
  return v;
}

std::size_t count_fields(const std::string& line) {
  return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

}  // namespace

TEST_CASE("synth writes the default dataset") {
  Workspace ws;
  REQUIRE(cli("synth --out d.csv") == 0);
  const auto rows = lines(kWork / "d.csv");
  CHECK(rows.front() == "detector_id,timestamp,speed_mph");
  CHECK(rows.size() == 1 + 110 * 6 * 288);
}

TEST_CASE("synth rejects more patterns than detectors") {
  Workspace ws;
  CHECK(cli("synth --detectors 3 --patterns 5 --out d.csv") == 2);
  CHECK_FALSE(fs::exists(kWork / "d.csv"));
}

TEST_CASE("bad arguments and bad data map to exit codes") {
  Workspace ws;
  CHECK(cli("run --data") == 2);
  CHECK(cli("run --data d.csv --out r --sharing maybe") == 2);
  std::ofstream(kWork / "bad.csv") << "detector_id,timestamp,speed_mph\nd,not-a-time,50\n";
  CHECK(cli("ingest --data bad.csv") == 3);
  CHECK(cli("run --data bad.csv --out r --grid-profile test") == 3);
  CHECK(cli("predict --registry nowhere --data bad.csv --out -") == 5);
}

TEST_CASE("run, report and predict on a small dataset") {
  Workspace ws;
  REQUIRE(cli("synth --detectors 4 --patterns 2 --out d.csv") == 0);
  REQUIRE(cli("ingest --data d.csv") == 0);
  REQUIRE(cli("run --data d.csv --out r --grid-profile test --workers 2", "run.txt") == 0);
  CHECK(fs::exists(kWork / "r" / "manifest.json"));
  CHECK(fs::exists(kWork / "r" / "run_report.json"));

  const auto run_out = lines(kWork / "run.txt");
  CHECK(std::any_of(run_out.begin(), run_out.end(),
                    [](const std::string& l) { return l == "models customized: 2/4"; }));

  REQUIRE(cli("report --run r --format json", "report.json") == 0);
  const auto report = nlohmann::json::parse(std::ifstream(kWork / "report.json"));
  CHECK(report.at("models_customized") == 2);
  CHECK(report.at("detectors").size() == 4);
  CHECK(report.at("model_count_curve").size() == 4);

  REQUIRE(cli("report --run r --format csv", "report.csv") == 0);
  const auto csv = lines(kWork / "report.csv");
  REQUIRE(csv.size() == 1 + 1 + 4);
  CHECK(csv[0] == "row,detector_id,kind,donor_id,converged,aare,aae,rmse");
  CHECK(csv[1].rfind("aggregate,", 0) == 0);
  for (const auto& row : csv) CHECK(count_fields(row) == 8);

  REQUIRE(cli("predict --registry r --data d.csv --out p.csv") == 0);
  const auto pred = lines(kWork / "p.csv");
  CHECK(pred[0] == "detector_id,timestamp,forecast_mph,actual_mph");
  // One test day per detector, minus the first window.
  CHECK(pred.size() == 1 + 4 * (288 - 12));
}

TEST_CASE("predict with an all-zero model yields the bias forecast") {
  Workspace ws;
  REQUIRE(cli("synth --detectors 2 --patterns 1 --out d.csv") == 0);
  auto m = init_model({0.01, 1, 2, 100}, 12, 70.0, 1);
  for (auto& l : m.params.layers) {
    std::fill(l.w_in.begin(), l.w_in.end(), 0.0);
    std::fill(l.w_rec.begin(), l.w_rec.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  std::fill(m.params.out_w.begin(), m.params.out_w.end(), 0.0);
  m.params.out_b = 0.5;
  auto model = std::make_shared<const LstmModel>(m);
  std::vector<ModelAssignment> a = {
      {"det0", AssignmentKind::owned, std::nullopt, std::nullopt, model},
      {"det1", AssignmentKind::shared, "det0", 0.0, model},
  };
  registry_save(a, kWork / "reg", {{"run", RunConfig::test_profile()}});
  REQUIRE(cli("predict --registry reg --data d.csv --out p.csv") == 0);
  const auto pred = lines(kWork / "p.csv");
  REQUIRE(pred.size() > 1);
  for (std::size_t i = 1; i < pred.size(); ++i) {
    std::stringstream row(pred[i]);
    std::string id, ts, forecast;
    std::getline(row, id, ',');
    std::getline(row, ts, ',');
    std::getline(row, forecast, ',');
    CHECK(std::stod(forecast) == doctest::Approx(35.0));
  }
}
