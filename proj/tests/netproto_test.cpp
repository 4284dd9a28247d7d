#include "doctest.h"

#include <future>
#include <map>
#include <thread>

#include "distpre/error.hpp"
#include "distpre/netproto.hpp"
#include "distpre/rng.hpp"

using namespace distpre;
using namespace std::chrono_literals;

namespace {

const Endpoint kLoopback{"127.0.0.1", 0};

std::vector<CustomizationJob> small_jobs(std::size_t n) {
  SyntheticSpec spec;
  spec.detectors = n;
  spec.patterns = n;
  spec.noise_amplitude = 0.5;
  std::vector<CustomizationJob> jobs;
  for (const auto& s : generate_synthetic(spec)) {
    CustomizationJob job;
    job.detector_id = s.detector_id;
    job.split = split(normalize(s, 70.0), 5, 1, 0.2);
    job.grid = GridSpec::test_profile();
    job.nmm.max_evaluations = 2;
    job.seed = job_seed(7, s.detector_id);
    jobs.push_back(std::move(job));
  }
  return jobs;
}

// Real workers connecting to a listener owned by the test.
struct WorkerThreads {
  std::vector<std::future<std::size_t>> served;
  void start(std::uint16_t port, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i)
      served.push_back(std::async(std::launch::async, [port, i] {
        return serve_worker_connect({"127.0.0.1", port}, {"w" + std::to_string(i)});
      }));
  }
};

// Handshakes, waits for one request, then hangs up without answering.
std::future<bool> flaky_worker(std::uint16_t port) {
  return std::async(std::launch::async, [port] {
    auto s = connect_to({"127.0.0.1", port});
    write_message(s, Hello{"flaky"});
    read_message(s);
    auto m = read_message(s);
    s.close();
    return m && std::holds_alternative<CustomizeRequest>(*m);
  });
}

std::map<std::uint64_t, Completion> drain(JobExecutor& ex, std::size_t n) {
  std::map<std::uint64_t, Completion> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto c = ex.next();
    out.emplace(c.job_id, std::move(c));
  }
  return out;
}

CustomizationResult result_of(const Completion& c) {
  REQUIRE(std::holds_alternative<CustomizationResult>(c.outcome));
  return std::get<CustomizationResult>(c.outcome);
}

// Wall time is measured, not computed.
bool same_result(CustomizationResult a, CustomizationResult b) {
  a.wall_time = b.wall_time = 0.0;
  return a == b;
}

std::string header(std::uint32_t n) {
  return {static_cast<char>(n >> 24), static_cast<char>(n >> 16), static_cast<char>(n >> 8),
          static_cast<char>(n)};
}

}  // namespace

TEST_CASE("every message kind round-trips exactly") {
  const auto job = small_jobs(1)[0];
  auto result = customize(job, 0.05);
  result.wall_time = 0.125;
  const std::vector<Message> msgs = {
      Hello{"w-1", kProtocolVersion},
      CustomizeRequest{42, job, 0.07},
      CustomizeResult{42, result},
      JobError{9, "training: diverged"},
      Shutdown{},
  };
  for (const auto& m : msgs) {
    CAPTURE(kind_of(m));
    CHECK(decode(encode(m)) == m);
  }
}

TEST_CASE("randomized requests round-trip") {
  CounterRng rng(99);
  auto base = small_jobs(1)[0];
  for (int i = 0; i < 50; ++i) {
    auto job = base;
    job.detector_id = "det" + std::to_string(rng.next() % 1000);
    for (auto& v : job.split.train.values) v = rng.uniform(0.0, 1.5);
    job.seed = rng.next();
    job.f = rng.uniform(40, 90);
    CustomizeRequest req{rng.next(), job, rng.uniform(0, 1)};
    CHECK(decode(encode(req)) == Message{req});
  }
}

TEST_CASE("frame layout is a big-endian length prefix") {
  const auto frame = encode(Shutdown{});
  const auto payload = frame.substr(4);
  CHECK(frame.substr(0, 4) == header(static_cast<std::uint32_t>(payload.size())));
  CHECK(nlohmann::json::parse(payload)["kind"] == "shutdown");
}

TEST_CASE("malformed frames") {
  CHECK_THROWS_AS(decode(header(10) + "12345"), FramingError);
  CHECK_THROWS_AS(decode("\x00\x00"), FramingError);
  CHECK_THROWS_AS(decode(encode(Shutdown{}) + "x"), FramingError);

  const std::string unknown = R"({"kind":"teleport"})";
  CHECK_THROWS_AS(decode(header(unknown.size()) + unknown), ProtocolError);
  const std::string garbage = "{nope";
  CHECK_THROWS_AS(decode(header(garbage.size()) + garbage), ProtocolError);
  const std::string missing = R"({"kind":"customize_result"})";
  CHECK_THROWS_AS(decode(header(missing.size()) + missing), ProtocolError);

  CHECK_THROWS_AS(decode(encode(Hello{"w", kProtocolVersion + 1})), HandshakeError);
}

TEST_CASE("job error reasons carry the error kind") {
  const auto e = error_from_reason(job_error_reason(TrainingError(3, "nan loss")));
  CHECK(e.kind() == ErrorKind::training);
  CHECK(std::string(e.what()).find("nan loss") != std::string::npos);
}

TEST_CASE("stream reads: clean EOF and partial frame") {
  Listener l(kLoopback);
  auto peer = std::async(std::launch::async, [&] {
    auto s = connect_to({"127.0.0.1", l.port()});
    write_message(s, Shutdown{});
    s.send_all(header(100) + "short");
  });
  auto s = l.accept(5s);
  peer.get();
  auto m = read_message(s);
  REQUIRE(m);
  CHECK(std::holds_alternative<Shutdown>(*m));
  CHECK_THROWS_AS(read_message(s), FramingError);

  auto quiet = std::async(std::launch::async, [&] { connect_to({"127.0.0.1", l.port()}).close(); });
  auto s2 = l.accept(5s);
  quiet.get();
  CHECK_FALSE(read_message(s2).has_value());
}

TEST_CASE("one worker serves sequential jobs and matches local results") {
  const auto jobs = small_jobs(3);
  Listener l(kLoopback);
  WorkerThreads w;
  w.start(l.port(), 1);
  {
    auto d = RemoteDispatcher::accept_workers(l, 1, 10s);
    CHECK(d->worker_ids() == std::vector<std::string>{"w0"});
    for (std::size_t i = 0; i < jobs.size(); ++i) d->submit(i, jobs[i], 0.05);
    auto done = drain(*d, jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i)
      CHECK(same_result(result_of(done.at(i)), customize(jobs[i], 0.05)));
  }
  CHECK(w.served[0].get() == 3);
}

TEST_CASE("distributed run equals local run") {
  SyntheticSpec spec;
  spec.detectors = 6;
  spec.patterns = 3;
  spec.noise_amplitude = 0.5;
  auto config = RunConfig::test_profile();
  config.nmm.max_evaluations = 2;
  const auto inputs = prepare_detectors(generate_synthetic(spec), config);
  const auto local = run(inputs, config);

  Listener l(kLoopback);
  WorkerThreads w;
  w.start(l.port(), 3);
  RunReport remote;
  {
    auto d = RemoteDispatcher::accept_workers(l, 3, 10s);
    CHECK(d->live_workers() == 3);
    remote = run(inputs, config, *d);
  }
  REQUIRE(remote.assignments.size() == local.assignments.size());
  for (std::size_t i = 0; i < local.assignments.size(); ++i)
    CHECK(same_assignment(local.assignments[i], remote.assignments[i]));
  std::size_t served = 0;
  for (auto& f : w.served) served += f.get();
  CHECK(served == local.models_customized());
}

TEST_CASE("a job lost with its worker is reassigned") {
  const auto jobs = small_jobs(2);
  Listener l(kLoopback);
  auto flaky = flaky_worker(l.port());
  WorkerThreads w;
  w.start(l.port(), 1);
  {
    auto d = RemoteDispatcher::accept_workers(l, 2, 10s);
    for (std::size_t i = 0; i < jobs.size(); ++i) d->submit(i, jobs[i], 0.05);
    auto done = drain(*d, jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i)
      CHECK(same_result(result_of(done.at(i)), customize(jobs[i], 0.05)));
    CHECK(d->live_workers() == 1);
  }
  CHECK(flaky.get());
  CHECK(w.served[0].get() == 2);
}

TEST_CASE("losing every worker fails outstanding jobs") {
  const auto jobs = small_jobs(1);
  Listener l(kLoopback);
  auto a = flaky_worker(l.port());
  auto b = flaky_worker(l.port());
  auto d = RemoteDispatcher::accept_workers(l, 2, 10s);
  d->submit(0, jobs[0], 0.05);
  auto c = d->next();
  CHECK(c.job_id == 0);
  REQUIRE(std::holds_alternative<Error>(c.outcome));
  CHECK(std::get<Error>(c.outcome).kind() == ErrorKind::connectivity);
  CHECK(d->live_workers() == 0);
  CHECK(a.get());
  CHECK(b.get());
}

TEST_CASE("idle workers exit on shutdown") {
  Listener l(kLoopback);
  WorkerThreads w;
  w.start(l.port(), 2);
  RemoteDispatcher::accept_workers(l, 2, 10s).reset();
  CHECK(w.served[0].get() == 0);
  CHECK(w.served[1].get() == 0);
}

TEST_CASE("listening worker is dialed by the master") {
  const auto job = small_jobs(1)[0];
  Listener probe(kLoopback);
  const std::uint16_t port = probe.port();
  auto worker = std::async(std::launch::async, [&] { return serve_worker(probe.accept(10s), {"lw"}); });
  {
    auto d = RemoteDispatcher::dial_workers({{"127.0.0.1", port}}, 10s);
    CHECK(d->worker_ids() == std::vector<std::string>{"lw"});
    d->submit(5, job, 0.05);
    auto c = d->next();
    CHECK(c.job_id == 5);
    CHECK(same_result(result_of(c), customize(job, 0.05)));
  }
  CHECK(worker.get() == 1);
}

TEST_CASE("version mismatch is rejected during the handshake") {
  Listener l(kLoopback);
  auto peer = std::async(std::launch::async, [&] {
    auto s = connect_to({"127.0.0.1", l.port()});
    nlohmann::json j = {{"kind", "hello"}, {"worker_id", "old"}, {"protocol_version", 0}};
    const auto payload = j.dump();
    s.send_all(header(payload.size()) + payload);
    return s;
  });
  auto s = l.accept(5s);
  auto keep = peer.get();
  CHECK_THROWS_AS(master_handshake(s), HandshakeError);
}
