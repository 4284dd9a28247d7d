#pragma once

// The master side: decides per detector whether to share an existing model
// or to customize a new one, dispatches customization jobs to workers,
// and assembles the run report.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"

#include "distpre/customizer.hpp"
#include "distpre/data.hpp"
#include "distpre/error.hpp"
#include "distpre/metrics.hpp"

namespace distpre {

enum class RunMode { local, distributed };

struct RunConfig {
  bool sharing_enabled = true;
  std::size_t workers = 1;
  double thd_aard = 0.1;
  double thd_aare = 0.05;
  double f = 70.0;
  std::size_t window_length = 12;
  std::size_t train_days = 5;
  std::size_t test_days = 1;
  double validation_fraction = 0.2;
  GridSpec grid = GridSpec::paper();
  NmmConfig nmm;
  TrainingConfig training;
  std::uint64_t run_seed = 1;
  RunMode mode = RunMode::local;

  // Test-profile grid and search budget for CI-sized runs.
  static RunConfig test_profile();

  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

// One detector ready for processing: the comparison span (train +
// validation, normalized) and its dataset split.
struct DetectorInput {
  std::string detector_id;
  std::vector<double> pattern;
  DatasetSplit split;
};

// Validates, normalizes and splits raw series. All series must have the
// same length.
std::vector<DetectorInput> prepare_detectors(std::span<const SpeedSeries> series,
                                             const RunConfig& config);

// Detectors owning a customized model, in append order.
class DetectorRegistry {
 public:
  struct Member {
    std::string detector_id;
    std::vector<double> pattern;
  };

  struct Match {
    std::size_t index = 0;
    double aard = 0.0;
  };

  // First member (in append order) whose AARD from `pattern` is below
  // `thd`, with `pattern` as the reference series.
  std::optional<Match> first_match(std::span<const double> pattern, double thd) const;

  void append(std::string detector_id, std::vector<double> pattern);

  const std::vector<Member>& members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }

  // Every pair has AARD >= thd, measured with the later member as reference.
  bool pairwise_distinct(double thd) const;

 private:
  std::vector<Member> members_;
};

struct Decision {
  bool share = false;
  std::string donor_id;
  double aard = 0.0;
};

// Scans the registry (first match wins). On a customize decision the
// detector is appended to the registry immediately.
Decision process_detector(const std::string& detector_id, std::span<const double> pattern,
                          DetectorRegistry& registry, const RunConfig& config);

enum class AssignmentKind { owned, shared };

struct ModelAssignment {
  std::string detector_id;
  AssignmentKind kind = AssignmentKind::owned;
  std::optional<std::string> donor_id;
  std::optional<double> matched_aard;
  std::shared_ptr<const LstmModel> model;
};

bool same_assignment(const ModelAssignment& a, const ModelAssignment& b);

using ModelCountCurve = std::vector<std::pair<std::size_t, std::size_t>>;

ModelCountCurve model_count_curve(std::span<const ModelAssignment> assignments);

struct DetectorOutcome {
  std::string detector_id;
  AssignmentKind kind = AssignmentKind::owned;
  std::optional<std::string> donor_id;
  std::optional<double> matched_aard;
  HyperparameterSetting setting;
  bool converged = false;
  double validation_aare = 0.0;  // of the model's owner
  std::size_t evaluations = 0;   // 0 for shared
  double wall_time = 0.0;
  EvaluationReport test;
};

struct RunReport {
  RunConfig config;
  double makespan_seconds = 0.0;
  ModelCountCurve model_count_curve;
  std::vector<ModelAssignment> assignments;  // processing order
  std::vector<DetectorOutcome> detectors;    // processing order
  AggregateReport aggregate;
  std::vector<CustomizationResult> customizations;  // owned, in dispatch order

  std::size_t models_customized() const noexcept;
  std::size_t converged_count() const noexcept;
};

nlohmann::json report_to_json(const RunReport& report);

// ---------------------------------------------------------------------------
// Job execution

struct Completion {
  std::uint64_t job_id = 0;
  std::variant<CustomizationResult, Error> outcome;
};

// Multi-producer queue delivering completions to the control thread.
class CompletionChannel {
 public:
  void push(Completion c);
  Completion pop();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Completion> items_;
};

class JobExecutor {
 public:
  virtual ~JobExecutor() = default;
  virtual void submit(std::uint64_t job_id, CustomizationJob job, double thd_aare) = 0;
  // Blocks until some submitted job completes.
  virtual Completion next() = 0;
};

// P in-process worker threads pulling jobs in FIFO order.
class LocalExecutor final : public JobExecutor {
 public:
  explicit LocalExecutor(std::size_t workers);
  ~LocalExecutor() override;
  LocalExecutor(const LocalExecutor&) = delete;
  LocalExecutor& operator=(const LocalExecutor&) = delete;

  void submit(std::uint64_t job_id, CustomizationJob job, double thd_aare) override;
  Completion next() override;

 private:
  struct Pending {
    std::uint64_t job_id;
    CustomizationJob job;
    double thd_aare;
  };
  void worker_loop();

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Pending> queue_;
  bool stopping_ = false;
  CompletionChannel completions_;
  std::vector<std::thread> threads_;
};

// Runs the sharing/customization scheme over `detectors` in input order.
RunReport run(std::span<const DetectorInput> detectors, const RunConfig& config,
              JobExecutor& executor);

// Convenience: local mode with config.workers threads.
RunReport run(std::span<const DetectorInput> detectors, const RunConfig& config);

// ---------------------------------------------------------------------------
// Registry persistence: manifest.json + models/<detector_id>.json per owned
// model.

inline constexpr int kRegistryFormatVersion = 1;

void registry_save(std::span<const ModelAssignment> assignments, const std::filesystem::path& dir,
                   const nlohmann::json& config_echo = nlohmann::json::object());
std::vector<ModelAssignment> registry_load(const std::filesystem::path& dir);

}  // namespace distpre
