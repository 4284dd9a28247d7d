#include "distpre/coordinator.hpp"

#include <chrono>
#include <map>

#include "distpre/error.hpp"
#include "distpre/serialize.hpp"

namespace distpre {

RunConfig RunConfig::test_profile() {
  RunConfig c;
  c.grid = GridSpec::test_profile();
  c.nmm.max_evaluations = 10;
  return c;
}

void RunConfig::validate() const {
  if (workers < 1) throw ConfigError("worker count must be >= 1");
  if (!(thd_aard >= 0.0)) throw ConfigError("thd_aard must be >= 0");
  if (!(thd_aare > 0.0)) throw ConfigError("thd_aare must be > 0");
  if (!(f > 0.0)) throw ConfigError("normalization constant f must be > 0");
  if (window_length < 1) throw ConfigError("window length must be >= 1");
  grid.validate();
  nmm.validate();
  training.validate();
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"sharing_enabled", c.sharing_enabled},
                     {"workers", c.workers},
                     {"thd_aard", c.thd_aard},
                     {"thd_aare", c.thd_aare},
                     {"f", c.f},
                     {"window_length", c.window_length},
                     {"train_days", c.train_days},
                     {"test_days", c.test_days},
                     {"validation_fraction", c.validation_fraction},
                     {"grid", c.grid},
                     {"nmm", c.nmm},
                     {"training", c.training},
                     {"run_seed", c.run_seed},
                     {"mode", c.mode == RunMode::local ? "local" : "distributed"}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  c.sharing_enabled = j.at("sharing_enabled").get<bool>();
  c.workers = j.at("workers").get<std::size_t>();
  c.thd_aard = j.at("thd_aard").get<double>();
  c.thd_aare = j.at("thd_aare").get<double>();
  c.f = j.at("f").get<double>();
  c.window_length = j.at("window_length").get<std::size_t>();
  c.train_days = j.at("train_days").get<std::size_t>();
  c.test_days = j.at("test_days").get<std::size_t>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.grid = j.at("grid").get<GridSpec>();
  c.nmm = j.at("nmm").get<NmmConfig>();
  c.training = j.at("training").get<TrainingConfig>();
  c.run_seed = j.at("run_seed").get<std::uint64_t>();
  c.mode = j.at("mode").get<std::string>() == "distributed" ? RunMode::distributed : RunMode::local;
}

std::vector<DetectorInput> prepare_detectors(std::span<const SpeedSeries> series,
                                             const RunConfig& config) {
  config.validate();
  std::vector<DetectorInput> out;
  out.reserve(series.size());
  std::map<std::string, bool> seen;
  for (const auto& s : series) {
    if (!seen.emplace(s.detector_id, true).second) {
      throw DataError("duplicate detector id '" + s.detector_id + "'");
    }
    if (!out.empty() && s.size() != series.front().size()) {
      throw DataError("detector '" + s.detector_id + "' has " + std::to_string(s.size()) +
                      " points; all detectors must share the length " +
                      std::to_string(series.front().size()));
    }
    validate(s, config.window_length);
    const NormalizedSeries n = normalize(s, config.f);
    DetectorInput d;
    d.detector_id = s.detector_id;
    d.split = split(n, config.train_days, config.test_days, config.validation_fraction);
    d.pattern = d.split.train.values;
    d.pattern.insert(d.pattern.end(), d.split.validation.values.begin(),
                     d.split.validation.values.end());
    out.push_back(std::move(d));
  }
  return out;
}

std::optional<DetectorRegistry::Match> DetectorRegistry::first_match(
    std::span<const double> pattern, double thd) const {
  for (std::size_t j = 0; j < members_.size(); ++j) {
    const double v = aard(pattern, members_[j].pattern);
    if (v < thd) return Match{j, v};
  }
  return std::nullopt;
}

void DetectorRegistry::append(std::string detector_id, std::vector<double> pattern) {
  if (!members_.empty() && pattern.size() != members_.front().pattern.size()) {
    throw DataError("detector '" + detector_id + "': comparison span length mismatch");
  }
  members_.push_back({std::move(detector_id), std::move(pattern)});
}

bool DetectorRegistry::pairwise_distinct(double thd) const {
  for (std::size_t later = 1; later < members_.size(); ++later) {
    for (std::size_t earlier = 0; earlier < later; ++earlier) {
      if (aard(members_[later].pattern, members_[earlier].pattern) < thd) return false;
    }
  }
  return true;
}

Decision process_detector(const std::string& detector_id, std::span<const double> pattern,
                          DetectorRegistry& registry, const RunConfig& config) {
  if (config.sharing_enabled) {
    if (auto m = registry.first_match(pattern, config.thd_aard)) {
      return {true, registry.members()[m->index].detector_id, m->aard};
    }
  }
  registry.append(detector_id, std::vector<double>(pattern.begin(), pattern.end()));
  return {};
}

bool same_assignment(const ModelAssignment& a, const ModelAssignment& b) {
  if (a.detector_id != b.detector_id || a.kind != b.kind || a.donor_id != b.donor_id ||
      a.matched_aard != b.matched_aard) {
    return false;
  }
  if (!a.model || !b.model) return a.model == b.model;
  return *a.model == *b.model;
}

ModelCountCurve model_count_curve(std::span<const ModelAssignment> assignments) {
  ModelCountCurve curve;
  curve.reserve(assignments.size());
  std::size_t owned = 0;
  for (std::size_t k = 0; k < assignments.size(); ++k) {
    if (assignments[k].kind == AssignmentKind::owned) ++owned;
    curve.emplace_back(k + 1, owned);
  }
  return curve;
}

std::size_t RunReport::models_customized() const noexcept {
  std::size_t n = 0;
  for (const auto& a : assignments) n += a.kind == AssignmentKind::owned;
  return n;
}

std::size_t RunReport::converged_count() const noexcept {
  std::size_t n = 0;
  for (const auto& d : detectors) n += d.converged;
  return n;
}

nlohmann::json report_to_json(const RunReport& r) {
  using nlohmann::json;
  json detectors = json::array();
  for (const auto& d : r.detectors) {
    json jd = {{"detector_id", d.detector_id},
               {"kind", d.kind == AssignmentKind::owned ? "owned" : "shared"},
               {"setting", d.setting},
               {"converged", d.converged},
               {"validation_aare", number_to_json(d.validation_aare)},
               {"evaluations", d.evaluations},
               {"wall_time", d.wall_time},
               {"test", d.test}};
    if (d.donor_id) jd["donor_id"] = *d.donor_id;
    if (d.matched_aard) jd["matched_aard"] = *d.matched_aard;
    detectors.push_back(std::move(jd));
  }
  json curve = json::array();
  for (const auto& [processed, customized] : r.model_count_curve) {
    curve.push_back({{"detectors_processed", processed}, {"models_customized", customized}});
  }
  json traces = json::object();
  for (const auto& c : r.customizations) traces[c.detector_id] = c.trace;
  return json{{"config", r.config},
              {"makespan_seconds", r.makespan_seconds},
              {"models_customized", r.models_customized()},
              {"detectors_processed", r.detectors.size()},
              {"converged", r.converged_count()},
              {"model_count_curve", std::move(curve)},
              {"aggregate",
               {{"average_aare", r.aggregate.average_aare},
                {"average_aae", r.aggregate.average_aae},
                {"average_rmse", r.aggregate.average_rmse},
                {"detectors", r.aggregate.detectors}}},
              {"detectors", std::move(detectors)},
              {"traces", std::move(traces)}};
}

// ---------------------------------------------------------------------------

void CompletionChannel::push(Completion c) {
  {
    std::lock_guard lock(mu_);
    items_.push_back(std::move(c));
  }
  cv_.notify_one();
}

Completion CompletionChannel::pop() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !items_.empty(); });
  Completion c = std::move(items_.front());
  items_.pop_front();
  return c;
}

LocalExecutor::LocalExecutor(std::size_t workers) {
  if (workers < 1) throw ConfigError("worker count must be >= 1");
  threads_.reserve(workers);
  for (std::size_t k = 0; k < workers; ++k) threads_.emplace_back([this] { worker_loop(); });
}

LocalExecutor::~LocalExecutor() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    queue_.clear();
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void LocalExecutor::submit(std::uint64_t job_id, CustomizationJob job, double thd_aare) {
  {
    std::lock_guard lock(mu_);
    queue_.push_back({job_id, std::move(job), thd_aare});
  }
  cv_.notify_one();
}

Completion LocalExecutor::next() { return completions_.pop(); }

void LocalExecutor::worker_loop() {
  while (true) {
    Pending p;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      p = std::move(queue_.front());
      queue_.pop_front();
    }
    try {
      completions_.push({p.job_id, customize(p.job, p.thd_aare)});
    } catch (const Error& e) {
      completions_.push({p.job_id, e});
    } catch (const std::exception& e) {
      completions_.push({p.job_id, Error(ErrorKind::data, e.what())});
    }
  }
}

RunReport run(std::span<const DetectorInput> detectors, const RunConfig& config,
              JobExecutor& executor) {
  config.validate();
  if (detectors.empty()) throw DataError("no detectors to process");
  RunReport report;
  report.config = config;

  const auto start = std::chrono::steady_clock::now();
  DetectorRegistry registry;
  std::vector<std::size_t> job_detector;  // job_id -> detector index
  report.assignments.resize(detectors.size());

  for (std::size_t i = 0; i < detectors.size(); ++i) {
    const auto& d = detectors[i];
    const Decision decision = process_detector(d.detector_id, d.pattern, registry, config);
    ModelAssignment& a = report.assignments[i];
    a.detector_id = d.detector_id;
    if (decision.share) {
      a.kind = AssignmentKind::shared;
      a.donor_id = decision.donor_id;
      a.matched_aard = decision.aard;
      continue;
    }
    a.kind = AssignmentKind::owned;
    CustomizationJob job;
    job.detector_id = d.detector_id;
    job.split = d.split;
    job.window_length = config.window_length;
    job.f = config.f;
    job.grid = config.grid;
    job.nmm = config.nmm;
    job.training = config.training;
    job.seed = job_seed(config.run_seed, d.detector_id);
    const std::uint64_t job_id = job_detector.size();
    job_detector.push_back(i);
    executor.submit(job_id, std::move(job), config.thd_aare);
  }

  std::vector<std::optional<CustomizationResult>> results(job_detector.size());
  for (std::size_t pending = job_detector.size(); pending > 0; --pending) {
    Completion c = executor.next();
    if (c.job_id >= results.size()) {
      throw ProtocolError("completion for unknown job " + std::to_string(c.job_id));
    }
    const std::string& id = detectors[job_detector[c.job_id]].detector_id;
    if (auto* err = std::get_if<Error>(&c.outcome)) {
      throw Error(err->kind(), "detector '" + id + "': " + err->what());
    }
    if (results[c.job_id]) {
      throw ProtocolError("duplicate result for job " + std::to_string(c.job_id));
    }
    results[c.job_id] = std::move(std::get<CustomizationResult>(c.outcome));
  }
  report.makespan_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  // Fill model slots; borrowers resolve to their donor's model.
  std::map<std::string, std::size_t> owner_job;
  for (std::size_t job = 0; job < job_detector.size(); ++job) {
    const std::size_t i = job_detector[job];
    report.assignments[i].model = std::make_shared<const LstmModel>(results[job]->model);
    owner_job[detectors[i].detector_id] = job;
  }
  for (auto& a : report.assignments) {
    if (a.kind == AssignmentKind::shared) {
      a.model = report.assignments[job_detector[owner_job.at(*a.donor_id)]].model;
    }
  }
  report.model_count_curve = model_count_curve(report.assignments);

  std::vector<std::pair<std::string, EvaluationReport>> per_detector;
  per_detector.reserve(detectors.size());
  for (std::size_t i = 0; i < detectors.size(); ++i) {
    const ModelAssignment& a = report.assignments[i];
    const std::string& owner = a.kind == AssignmentKind::owned ? a.detector_id : *a.donor_id;
    const CustomizationResult& r = *results[owner_job.at(owner)];
    DetectorOutcome o;
    o.detector_id = a.detector_id;
    o.kind = a.kind;
    o.donor_id = a.donor_id;
    o.matched_aard = a.matched_aard;
    o.setting = r.best;
    o.converged = r.converged;
    o.validation_aare = r.validation_aare;
    o.evaluations = a.kind == AssignmentKind::owned ? r.evaluations : 0;
    o.wall_time = a.kind == AssignmentKind::owned ? r.wall_time : 0.0;
    o.test = evaluate(*a.model, detectors[i].split.test.values);
    per_detector.emplace_back(a.detector_id, o.test);
    report.detectors.push_back(std::move(o));
  }
  report.aggregate = aggregate(std::move(per_detector));
  for (auto& r : results) report.customizations.push_back(std::move(*r));
  return report;
}

RunReport run(std::span<const DetectorInput> detectors, const RunConfig& config) {
  config.validate();
  LocalExecutor executor(config.workers);
  return run(detectors, config, executor);
}

}  // namespace distpre
