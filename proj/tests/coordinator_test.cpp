#include "doctest.h"

#include <set>

#include "distpre/coordinator.hpp"
#include "distpre/error.hpp"
#include "distpre/serialize.hpp"

using namespace distpre;

namespace {

RunConfig small_config() {
  RunConfig c = RunConfig::test_profile();
  c.nmm.max_evaluations = 3;
  return c;
}

std::vector<SpeedSeries> small_dataset(std::size_t z = 6, std::size_t k = 2) {
  SyntheticSpec spec;
  spec.detectors = z;
  spec.patterns = k;
  spec.noise_amplitude = 0.5;
  return generate_synthetic(spec);
}

void check_same_run(const RunReport& a, const RunReport& b) {
  REQUIRE(a.assignments.size() == b.assignments.size());
  for (std::size_t i = 0; i < a.assignments.size(); ++i) {
    CHECK(same_assignment(a.assignments[i], b.assignments[i]));
    CHECK(a.detectors[i].test == b.detectors[i].test);
    CHECK(a.detectors[i].setting == b.detectors[i].setting);
  }
  CHECK(a.aggregate.average_aare == b.aggregate.average_aare);
  CHECK(a.aggregate.average_aae == b.aggregate.average_aae);
  CHECK(a.aggregate.average_rmse == b.aggregate.average_rmse);
}

}  // namespace

TEST_CASE("process_detector: empty registry customizes") {
  DetectorRegistry g;
  RunConfig c;
  std::vector<double> p = {0.5, 0.6};
  auto d = process_detector("a", p, g, c);
  CHECK_FALSE(d.share);
  CHECK(g.size() == 1);
  CHECK(g.members()[0].detector_id == "a");
}

TEST_CASE("process_detector: identical series shares with AARD 0") {
  DetectorRegistry g;
  RunConfig c;
  std::vector<double> p = {0.5, 0.6};
  process_detector("a", p, g, c);
  auto d = process_detector("b", p, g, c);
  CHECK(d.share);
  CHECK(d.donor_id == "a");
  CHECK(d.aard == 0.0);
  CHECK(g.size() == 1);
}

TEST_CASE("process_detector: first match wins over a closer later member") {
  DetectorRegistry g;
  RunConfig c;
  g.append("d1", {0.95, 0.95});
  g.append("d2", {0.99, 0.99});
  std::vector<double> x = {1.0, 1.0};
  auto d = process_detector("x", x, g, c);
  CHECK(d.share);
  CHECK(d.donor_id == "d1");
  CHECK(d.aard == doctest::Approx(0.05));
}

TEST_CASE("process_detector: sharing off or threshold 0 never shares") {
  std::vector<double> p = {0.5, 0.6};
  RunConfig off;
  off.sharing_enabled = false;
  DetectorRegistry g;
  process_detector("a", p, g, off);
  CHECK_FALSE(process_detector("b", p, g, off).share);
  CHECK(g.size() == 2);

  RunConfig zero;
  zero.thd_aard = 0.0;
  DetectorRegistry h;
  process_detector("a", p, h, zero);
  CHECK_FALSE(process_detector("b", p, h, zero).share);
}

TEST_CASE("model_count_curve") {
  std::vector<ModelAssignment> a(3);
  a[0].kind = AssignmentKind::owned;
  a[1].kind = AssignmentKind::shared;
  a[2].kind = AssignmentKind::owned;
  CHECK(model_count_curve(a) == ModelCountCurve{{1, 1}, {2, 1}, {3, 2}});
  for (auto& x : a) x.kind = AssignmentKind::shared;
  a[0].kind = AssignmentKind::owned;
  CHECK(model_count_curve(a).back() == std::pair<std::size_t, std::size_t>{3, 1});
}

TEST_CASE("prepare_detectors") {
  const auto c = small_config();
  auto data = small_dataset(3, 3);
  auto d = prepare_detectors(data, c);
  REQUIRE(d.size() == 3);
  CHECK(d[0].pattern.size() == 5 * kPointsPerDay);
  CHECK(d[0].split.test.size() == kPointsPerDay);

  data[1].values.pop_back();
  CHECK_THROWS_AS(prepare_detectors(data, c), DataError);
  data = small_dataset(2, 2);
  data[1].detector_id = data[0].detector_id;
  CHECK_THROWS_AS(prepare_detectors(data, c), DataError);
}

TEST_CASE("run: sharing on customizes one model per cluster") {
  const auto c = small_config();
  const auto inputs = prepare_detectors(small_dataset(), c);
  auto r = run(inputs, c);
  CHECK(r.models_customized() == 2);
  CHECK(r.customizations.size() == 2);
  CHECK(r.model_count_curve.back() == std::pair<std::size_t, std::size_t>{6, 2});
  for (std::size_t i = 0; i < r.assignments.size(); ++i) {
    const auto& a = r.assignments[i];
    REQUIRE(a.model);
    if (a.kind == AssignmentKind::shared) {
      REQUIRE(a.donor_id);
      CHECK(*a.donor_id == r.assignments[i % 2].detector_id);
      CHECK(a.model == r.assignments[i % 2].model);
      CHECK(*a.matched_aard < c.thd_aard);
    }
    CHECK(r.detectors[i].test == evaluate(*a.model, inputs[i].split.test.values));
  }
  CHECK(r.aggregate.detectors == 6);
  CHECK(r.makespan_seconds > 0.0);
}

TEST_CASE("run: sharing off gives the identity curve") {
  auto c = small_config();
  c.sharing_enabled = false;
  const auto inputs = prepare_detectors(small_dataset(4, 2), c);
  auto r = run(inputs, c);
  CHECK(r.models_customized() == 4);
  for (std::size_t k = 0; k < r.model_count_curve.size(); ++k) {
    CHECK(r.model_count_curve[k] == std::pair<std::size_t, std::size_t>{k + 1, k + 1});
  }
}

TEST_CASE("run: results do not depend on the number of workers") {
  auto c = small_config();
  c.sharing_enabled = false;
  const auto inputs = prepare_detectors(small_dataset(4, 2), c);
  c.workers = 1;
  auto one = run(inputs, c);
  c.workers = 3;
  auto three = run(inputs, c);
  check_same_run(one, three);
}

TEST_CASE("run: registry members stay pairwise distinct") {
  const auto c = small_config();
  const auto inputs = prepare_detectors(small_dataset(), c);
  DetectorRegistry g;
  for (const auto& d : inputs) process_detector(d.detector_id, d.pattern, g, c);
  CHECK(g.size() == 2);
  CHECK(g.pairwise_distinct(c.thd_aard));
}

TEST_CASE("run: job errors abort the run") {
  auto c = small_config();
  const auto inputs = prepare_detectors(small_dataset(2, 2), c);
  c.window_length = 400;
  CHECK_THROWS_AS(run(inputs, c), Error);
}

TEST_CASE("RunConfig JSON round trip and validation") {
  RunConfig c = RunConfig::test_profile();
  c.sharing_enabled = false;
  c.workers = 8;
  c.run_seed = 99;
  c.mode = RunMode::distributed;
  nlohmann::json j = c;
  RunConfig back = j.get<RunConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.grid == c.grid);
  CHECK(back.nmm == c.nmm);

  RunConfig bad;
  bad.workers = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = RunConfig{};
  bad.thd_aare = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("report JSON carries the summary fields") {
  const auto c = small_config();
  const auto inputs = prepare_detectors(small_dataset(4, 2), c);
  auto r = run(inputs, c);
  auto j = report_to_json(r);
  CHECK(j.at("models_customized") == 2);
  CHECK(j.at("detectors_processed") == 4);
  CHECK(j.at("detectors").size() == 4);
  CHECK(j.at("model_count_curve").size() == 4);
  CHECK(j.at("traces").size() == 2);
  CHECK(j.at("aggregate").at("average_aare").get<double>() == r.aggregate.average_aare);
}
