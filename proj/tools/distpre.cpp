// distpre: synthesize or ingest detector data, run LSTM customization with
// model sharing, serve as a remote worker, predict, and emit reports.

#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "distpre/coordinator.hpp"
#include "distpre/data.hpp"
#include "distpre/error.hpp"
#include "distpre/netproto.hpp"
#include "distpre/serialize.hpp"

namespace fs = std::filesystem;
using namespace distpre;

namespace {

void setup_logging() {
  const char* level = std::getenv("DISTPRE_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
  spdlog::set_pattern("[%H:%M:%S.%e] [%l] %v");
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IntegrityError("missing file '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw ConfigError("cannot write '" + path.string() + "'");
}

std::string fmt_num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  SyntheticSpec spec;
  double thd_aard = 0.1;
  double f = 70.0;
  int retries = 3;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  SyntheticSpec spec = a.spec;
  std::vector<std::size_t> labels(spec.detectors);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = cluster_of(i, spec.patterns);

  for (int attempt = 0;; ++attempt) {
    auto series = generate_synthetic(spec);
    const SeparationReport rep = verify_separation(series, labels, a.f, a.thd_aard);
    std::cout << "separation: " << (rep.pass ? "pass" : "fail") << " (max within-cluster AARD "
              << rep.max_within << ", min cross-cluster AARD " << rep.min_across << ", thd "
              << a.thd_aard << ", noise " << spec.noise_amplitude << " mph)\n";
    if (rep.pass) {
      write_csv(fs::path(a.out), series);
      std::cout << "wrote " << series.size() << " detectors x " << series.front().size()
                << " rows to " << a.out << "\n";
      return 0;
    }
    if (attempt >= a.retries) {
      throw ConfigError("synthetic dataset failed separation after " + std::to_string(attempt + 1) +
                        " attempts (" + std::to_string(rep.offending.size()) + " offending pairs)");
    }
    spec.noise_amplitude *= 0.5;
    spdlog::warn("separation failed; retrying with noise amplitude {}", spec.noise_amplitude);
  }
}

int cmd_ingest(const std::string& data, std::size_t window, double f, std::size_t train_days,
               std::size_t test_days) {
  const auto series = load_csv(data);
  if (series.empty()) throw DataError("'" + data + "' holds no detectors");
  const std::size_t expected = (train_days + test_days) * kPointsPerDay;
  for (const auto& s : series) {
    validate(s, window);
    if (s.size() != expected) {
      throw DataError("detector '" + s.detector_id + "' has " + std::to_string(s.size()) +
                      " points, expected " + std::to_string(expected));
    }
    (void)normalize(s, f);
  }
  std::cout << "detectors: " << series.size() << "\n"
            << "points per detector: " << expected << " (" << train_days + test_days << " days)\n"
            << "first timestamp: " << format_rfc3339(series.front().start_time) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string data;
  std::string out;
  std::size_t workers = 1;
  std::string sharing = "on";
  double thd_aard = 0.1;
  double thd_aare = 0.05;
  double f = 70.0;
  std::uint64_t seed = 1;
  std::string mode = "local";
  std::string grid_profile = "paper";
  std::vector<std::string> endpoints;
  std::string listen;
  double accept_timeout = 60.0;
};

int cmd_run(const RunArgs& a) {
  RunConfig config = a.grid_profile == "test" ? RunConfig::test_profile() : RunConfig{};
  config.sharing_enabled = a.sharing == "on";
  config.workers = a.workers;
  config.thd_aard = a.thd_aard;
  config.thd_aare = a.thd_aare;
  config.f = a.f;
  config.run_seed = a.seed;
  config.training.seed = a.seed;
  config.mode = a.mode == "distributed" ? RunMode::distributed : RunMode::local;
  config.validate();

  const auto series = load_csv(a.data);
  const auto detectors = prepare_detectors(series, config);

  RunReport report;
  if (config.mode == RunMode::local) {
    if (!a.endpoints.empty() || !a.listen.empty()) {
      throw ConfigError("--workers-endpoints/--listen require --mode distributed");
    }
    report = run(detectors, config);
  } else {
    std::unique_ptr<RemoteDispatcher> dispatcher;
    if (!a.endpoints.empty()) {
      std::vector<Endpoint> eps;
      for (const auto& e : a.endpoints) eps.push_back(parse_endpoint(e));
      dispatcher = RemoteDispatcher::dial_workers(
          eps, std::chrono::milliseconds(static_cast<long>(a.accept_timeout * 1000)));
    } else if (!a.listen.empty()) {
      Listener listener(parse_endpoint(a.listen));
      std::cout << "waiting for " << a.workers << " workers on port " << listener.port() << "\n"
                << std::flush;
      dispatcher = RemoteDispatcher::accept_workers(
          listener, a.workers, std::chrono::milliseconds(static_cast<long>(a.accept_timeout * 1000)));
    } else {
      throw ConfigError("--mode distributed needs --workers-endpoints or --listen");
    }
    report = run(detectors, config, *dispatcher);
  }

  fs::create_directories(a.out);
  const nlohmann::json echo = {{"run", config}, {"data", fs::absolute(a.data).string()}};
  registry_save(report.assignments, a.out, echo);
  nlohmann::json doc = report_to_json(report);
  doc["data"] = echo["data"];
  write_text(fs::path(a.out) / "run_report.json", doc.dump(1) + "\n");

  std::cout << "makespan: " << report.makespan_seconds << " s\n"
            << "models customized: " << report.models_customized() << "/" << detectors.size() << "\n"
            << "converged: " << report.converged_count() << "/" << detectors.size() << "\n"
            << "average AARE: " << report.aggregate.average_aare << "\n"
            << "average AAE: " << report.aggregate.average_aae << " mph\n"
            << "average RMSE: " << report.aggregate.average_rmse << " mph\n";
  for (const auto& d : report.detectors) {
    if (!d.converged) {
      std::cout << "not converged: " << d.detector_id << " (validation AARE "
                << d.validation_aare << ")\n";
    }
  }
  return 0;
}

int cmd_worker(const std::string& connect, const std::string& listen, const std::string& id) {
  WorkerOptions opts;
  opts.worker_id = id;
  if (!connect.empty() == !listen.empty()) throw ConfigError("give exactly one of --connect or --listen");
  const std::size_t served = connect.empty() ? serve_worker_listen(parse_endpoint(listen), opts)
                                             : serve_worker_connect(parse_endpoint(connect), opts);
  std::cout << "served " << served << " jobs\n";
  return 0;
}

int cmd_predict(const std::string& registry, const std::string& data, const std::string& out) {
  const nlohmann::json manifest = read_json(fs::path(registry) / "manifest.json");
  RunConfig config;
  try {
    config = manifest.at("config").at("run").get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("registry manifest lacks the run configuration: ") + e.what());
  }
  const auto assignments = registry_load(registry);
  std::map<std::string, const ModelAssignment*> by_id;
  for (const auto& a : assignments) by_id[a.detector_id] = &a;

  const auto series = load_csv(data);
  std::ostringstream csv;
  csv << "detector_id,timestamp,forecast_mph,actual_mph\n";
  const std::size_t test_offset = config.train_days * kPointsPerDay;
  for (const auto& s : series) {
    auto it = by_id.find(s.detector_id);
    if (it == by_id.end()) throw IntegrityError("detector '" + s.detector_id + "' is not in the registry");
    const LstmModel& model = *it->second->model;
    const auto split_data = split(normalize(s, model.f), config.train_days, config.test_days,
                                  config.validation_fraction);
    const auto& test = split_data.test.values;
    const auto forecast = predict_series(model, test);
    for (std::size_t k = 0; k < forecast.size(); ++k) {
      const std::size_t pos = model.window_length + k;
      csv << s.detector_id << ','
          << format_rfc3339(s.start_time + static_cast<UnixSeconds>((test_offset + pos) * s.interval))
          << ',' << fmt_num(forecast[k]) << ',' << fmt_num(test[pos] * model.f) << '\n';
    }
  }
  if (out == "-") {
    std::cout << csv.str();
  } else {
    write_text(out, csv.str());
  }
  return 0;
}

int cmd_report(const std::string& run_dir, const std::string& format) {
  const nlohmann::json r = read_json(fs::path(run_dir) / "run_report.json");
  try {
    if (format == "json") {
      nlohmann::json traces = nlohmann::json::object();
      for (const auto& [id, t] : r.at("traces").items()) {
        traces[id] = {{"evaluations", t.at("evaluations")},
                      {"iterations", t.at("iterations")},
                      {"termination", t.at("reason")},
                      {"records", t.at("records").size()}};
      }
      const nlohmann::json out = {{"aggregate", r.at("aggregate")},
                                  {"models_customized", r.at("models_customized")},
                                  {"detectors_processed", r.at("detectors_processed")},
                                  {"converged", r.at("converged")},
                                  {"makespan_seconds", r.at("makespan_seconds")},
                                  {"model_count_curve", r.at("model_count_curve")},
                                  {"detectors", r.at("detectors")},
                                  {"trace_summaries", traces}};
      std::cout << out.dump(1) << "\n";
    } else {
      const auto& g = r.at("aggregate");
      std::cout << "row,detector_id,kind,donor_id,converged,aare,aae,rmse\n";
      std::cout << "aggregate,,,,," << fmt_num(g.at("average_aare").get<double>()) << ','
                << fmt_num(g.at("average_aae").get<double>()) << ','
                << fmt_num(g.at("average_rmse").get<double>()) << '\n';
      for (const auto& d : r.at("detectors")) {
        const auto& t = d.at("test");
        std::cout << "detector," << d.at("detector_id").get<std::string>() << ','
                  << d.at("kind").get<std::string>() << ','
                  << (d.contains("donor_id") ? d.at("donor_id").get<std::string>() : "") << ','
                  << (d.at("converged").get<bool>() ? "true" : "false") << ','
                  << fmt_num(t.at("aare").get<double>()) << ',' << fmt_num(t.at("aae").get<double>())
                  << ',' << fmt_num(t.at("rmse").get<double>()) << '\n';
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed run report: " + std::string(e.what()));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Distributed LSTM customization with model sharing for traffic speed prediction"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a seeded synthetic detector dataset");
  s->add_option("--detectors", synth.spec.detectors)->capture_default_str();
  s->add_option("--patterns", synth.spec.patterns)->capture_default_str();
  s->add_option("--days", synth.spec.days)->capture_default_str();
  s->add_option("--noise", synth.spec.noise_amplitude, "Noise amplitude (mph)")->capture_default_str();
  s->add_option("--seed", synth.spec.seed)->capture_default_str();
  s->add_option("--thd-aard", synth.thd_aard)->capture_default_str();
  s->add_option("--f", synth.f)->capture_default_str();
  s->add_option("--out", synth.out)->required();

  std::string ingest_data;
  std::size_t ingest_window = 12, ingest_train = 5, ingest_test = 1;
  double ingest_f = 70.0;
  auto* in = app.add_subcommand("ingest", "Validate a detector CSV");
  in->add_option("--data", ingest_data)->required();
  in->add_option("--window", ingest_window)->capture_default_str();
  in->add_option("--f", ingest_f)->capture_default_str();
  in->add_option("--train-days", ingest_train)->capture_default_str();
  in->add_option("--test-days", ingest_test)->capture_default_str();

  RunArgs ra;
  auto* r = app.add_subcommand("run", "Customize models for every detector");
  r->add_option("--data", ra.data)->required();
  r->add_option("--out", ra.out)->required();
  r->add_option("--workers", ra.workers)->capture_default_str();
  r->add_option("--sharing", ra.sharing)->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  r->add_option("--thd-aard", ra.thd_aard)->capture_default_str();
  r->add_option("--thd-aare", ra.thd_aare)->capture_default_str();
  r->add_option("--f", ra.f)->capture_default_str();
  r->add_option("--seed", ra.seed)->capture_default_str();
  r->add_option("--mode", ra.mode)->check(CLI::IsMember({"local", "distributed"}))->capture_default_str();
  r->add_option("--grid-profile", ra.grid_profile)->check(CLI::IsMember({"paper", "test"}))->capture_default_str();
  r->add_option("--workers-endpoints", ra.endpoints, "Listening workers to dial (HOST:PORT,...)")->delimiter(',');
  r->add_option("--listen", ra.listen, "Accept inbound workers on HOST:PORT");
  r->add_option("--accept-timeout", ra.accept_timeout, "Seconds to wait for workers")->capture_default_str();

  std::string w_connect, w_listen, w_id = "worker";
  auto* w = app.add_subcommand("worker", "Serve customization jobs for a master");
  w->add_option("--connect", w_connect, "Master HOST:PORT");
  w->add_option("--listen", w_listen, "Wait for the master on HOST:PORT");
  w->add_option("--id", w_id)->capture_default_str();

  std::string p_registry, p_data, p_out = "-";
  auto* p = app.add_subcommand("predict", "Forecast the test day of every detector");
  p->add_option("--registry", p_registry)->required();
  p->add_option("--data", p_data)->required();
  p->add_option("--out", p_out)->capture_default_str();

  std::string rep_run, rep_format = "json";
  auto* rep = app.add_subcommand("report", "Emit aggregates, the model-count curve and search summaries");
  rep->add_option("--run", rep_run)->required();
  rep->add_option("--format", rep_format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ErrorKind::config);
  }

  try {
    if (*s) return cmd_synth(synth);
    if (*in) return cmd_ingest(ingest_data, ingest_window, ingest_f, ingest_train, ingest_test);
    if (*r) return cmd_run(ra);
    if (*w) return cmd_worker(w_connect, w_listen, w_id);
    if (*p) return cmd_predict(p_registry, p_data, p_out);
    if (*rep) return cmd_report(rep_run, rep_format);
  } catch (const Error& e) {
    std::cerr << "distpre: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "distpre: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
