#include "distpre/netproto.hpp"

#include <spdlog/spdlog.h>

#include <array>

#include "distpre/error.hpp"
#include "distpre/serialize.hpp"

namespace distpre {

namespace {

constexpr std::size_t kHeaderBytes = 4;

std::string header(std::uint32_t n) {
  return {static_cast<char>((n >> 24) & 0xFF), static_cast<char>((n >> 16) & 0xFF),
          static_cast<char>((n >> 8) & 0xFF), static_cast<char>(n & 0xFF)};
}

std::uint32_t parse_header(std::string_view h) {
  std::uint32_t n = 0;
  for (char c : h) n = (n << 8) | static_cast<unsigned char>(c);
  return n;
}

json message_to_json(const Message& m) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Hello>) {
          return {{"kind", "hello"}, {"worker_id", v.worker_id}, {"protocol_version", v.protocol_version}};
        } else if constexpr (std::is_same_v<T, CustomizeRequest>) {
          return {{"kind", "customize_request"},
                  {"job_id", v.job_id},
                  {"job", v.job},
                  {"thd_aare", number_to_json(v.thd_aare)}};
        } else if constexpr (std::is_same_v<T, CustomizeResult>) {
          return {{"kind", "customize_result"}, {"job_id", v.job_id}, {"result", v.result}};
        } else if constexpr (std::is_same_v<T, JobError>) {
          return {{"kind", "job_error"}, {"job_id", v.job_id}, {"reason", v.reason}};
        } else {
          return {{"kind", "shutdown"}};
        }
      },
      m);
}

Message message_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw ProtocolError("message has no kind");
  }
  const std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "hello") {
      Hello h{j.at("worker_id").get<std::string>(), j.at("protocol_version").get<int>()};
      if (h.protocol_version != kProtocolVersion) {
        throw HandshakeError("peer '" + h.worker_id + "' speaks protocol version " +
                             std::to_string(h.protocol_version) + ", expected " +
                             std::to_string(kProtocolVersion));
      }
      return h;
    }
    if (kind == "customize_request") {
      return CustomizeRequest{j.at("job_id").get<std::uint64_t>(), j.at("job").get<CustomizationJob>(),
                              number_from_json(j.at("thd_aare"))};
    }
    if (kind == "customize_result") {
      return CustomizeResult{j.at("job_id").get<std::uint64_t>(),
                             j.at("result").get<CustomizationResult>()};
    }
    if (kind == "job_error") {
      return JobError{j.at("job_id").get<std::uint64_t>(), j.at("reason").get<std::string>()};
    }
    if (kind == "shutdown") return Shutdown{};
  } catch (const json::exception& e) {
    throw ProtocolError("malformed " + kind + " message: " + e.what());
  } catch (const FormatError& e) {
    throw ProtocolError("malformed " + kind + " message: " + e.what());
  }
  throw ProtocolError("unknown message kind '" + kind + "'");
}

Message decode_payload(std::string_view payload) {
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("payload is not JSON: ") + e.what());
  }
  return message_from_json(j);
}

}  // namespace

const char* kind_of(const Message& m) noexcept {
  static constexpr std::array<const char*, 5> names = {"hello", "customize_request",
                                                       "customize_result", "job_error", "shutdown"};
  return names[m.index()];
}

std::string encode(const Message& m) {
  const std::string payload = message_to_json(m).dump();
  if (payload.size() > kMaxFrameBytes) throw FramingError("message exceeds the frame size limit");
  return header(static_cast<std::uint32_t>(payload.size())) + payload;
}

Message decode(std::string_view frame) {
  if (frame.size() < kHeaderBytes) {
    throw FramingError("truncated frame header (" + std::to_string(frame.size()) + " bytes)");
  }
  const std::uint32_t n = parse_header(frame.substr(0, kHeaderBytes));
  const std::size_t available = frame.size() - kHeaderBytes;
  if (available < n) {
    throw FramingError("frame declares " + std::to_string(n) + " payload bytes, " +
                       std::to_string(available) + " available");
  }
  if (available > n) throw FramingError("trailing bytes after frame payload");
  return decode_payload(frame.substr(kHeaderBytes));
}

void write_message(Socket& s, const Message& m) { s.send_all(encode(m)); }

std::optional<Message> read_message(Socket& s) {
  const std::string h = s.recv_upto(kHeaderBytes);
  if (h.empty()) return std::nullopt;
  if (h.size() < kHeaderBytes) throw FramingError("connection closed inside a frame header");
  const std::uint32_t n = parse_header(h);
  if (n > kMaxFrameBytes) throw FramingError("frame length " + std::to_string(n) + " exceeds limit");
  const std::string payload = s.recv_upto(n);
  if (payload.size() < n) {
    throw FramingError("connection closed after " + std::to_string(payload.size()) + " of " +
                       std::to_string(n) + " payload bytes");
  }
  return decode_payload(payload);
}

std::string job_error_reason(const Error& e) {
  return std::string(to_string(e.kind())) + ": " + e.what();
}

Error error_from_reason(std::string_view reason) {
  for (int k = 0; k <= static_cast<int>(ErrorKind::handshake); ++k) {
    const auto kind = static_cast<ErrorKind>(k);
    const std::string prefix = std::string(to_string(kind)) + ": ";
    if (reason.starts_with(prefix)) return Error(kind, std::string(reason.substr(prefix.size())));
  }
  return Error(ErrorKind::protocol, "worker reported: " + std::string(reason));
}

// ---------------------------------------------------------------------------
// Worker side

std::size_t serve_worker(Socket conn, const WorkerOptions& options) {
  write_message(conn, Hello{options.worker_id, kProtocolVersion});
  auto greeting = read_message(conn);
  if (!greeting || !std::holds_alternative<Hello>(*greeting)) {
    throw HandshakeError("master did not answer the hello");
  }
  spdlog::info("worker {}: connected to master", options.worker_id);

  std::size_t served = 0;
  while (true) {
    std::optional<Message> m;
    try {
      m = read_message(conn);
    } catch (const ConnectivityError&) {
      m.reset();
    } catch (const FramingError&) {
      m.reset();
    }
    if (!m) {
      spdlog::info("worker {}: master connection closed", options.worker_id);
      return served;
    }
    if (std::holds_alternative<Shutdown>(*m)) {
      spdlog::info("worker {}: shutdown after {} jobs", options.worker_id, served);
      return served;
    }
    auto* req = std::get_if<CustomizeRequest>(&*m);
    if (!req) throw ProtocolError(std::string("worker received unexpected ") + kind_of(*m));

    spdlog::debug("worker {}: job {} ({})", options.worker_id, req->job_id, req->job.detector_id);
    Message reply;
    try {
      reply = CustomizeResult{req->job_id, customize(req->job, req->thd_aare)};
    } catch (const Error& e) {
      reply = JobError{req->job_id, job_error_reason(e)};
    } catch (const std::exception& e) {
      reply = JobError{req->job_id, e.what()};
    }
    try {
      write_message(conn, reply);
    } catch (const ConnectivityError&) {
      spdlog::warn("worker {}: connection lost while returning job {}", options.worker_id, req->job_id);
      return served;
    }
    ++served;
  }
}

std::size_t serve_worker_connect(const Endpoint& master, const WorkerOptions& options,
                                 std::chrono::milliseconds patience) {
  return serve_worker(connect_to(master, patience), options);
}

std::size_t serve_worker_listen(const Endpoint& address, const WorkerOptions& options,
                                std::chrono::milliseconds accept_timeout) {
  Listener listener(address);
  spdlog::info("worker {}: listening on port {}", options.worker_id, listener.port());
  return serve_worker(listener.accept(accept_timeout), options);
}

std::string master_handshake(Socket& conn) {
  auto m = read_message(conn);
  if (!m) throw HandshakeError("worker closed the connection before hello");
  auto* hello = std::get_if<Hello>(&*m);
  if (!hello) throw HandshakeError(std::string("expected hello, received ") + kind_of(*m));
  write_message(conn, Hello{"master", kProtocolVersion});
  return hello->worker_id;
}

// ---------------------------------------------------------------------------
// Master side

RemoteDispatcher::RemoteDispatcher(std::vector<Socket> workers) {
  if (workers.empty()) throw ConnectivityError("no reachable workers");
  slots_.resize(workers.size());
  for (std::size_t i = 0; i < workers.size(); ++i) {
    slots_[i].conn = std::move(workers[i]);
    ids_.push_back(master_handshake(slots_[i].conn));
  }
  threads_.reserve(slots_.size());
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    threads_.emplace_back([this, i] { worker_loop(i); });
  }
}

RemoteDispatcher::~RemoteDispatcher() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    for (auto& s : slots_) {
      if (s.job) s.conn.shutdown();
    }
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
  for (auto& s : slots_) {
    if (!s.alive || !s.conn.valid()) continue;
    try {
      write_message(s.conn, Shutdown{});
    } catch (const Error&) {
    }
  }
}

std::unique_ptr<RemoteDispatcher> RemoteDispatcher::accept_workers(Listener& listener,
                                                                   std::size_t count,
                                                                   std::chrono::milliseconds timeout) {
  std::vector<Socket> conns;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (conns.size() < count) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) break;
    try {
      conns.push_back(listener.accept(left));
    } catch (const ConnectivityError&) {
      break;
    }
  }
  if (conns.empty()) throw ConnectivityError("no worker connected within the accept timeout");
  if (conns.size() < count) {
    spdlog::warn("only {} of {} workers connected; continuing", conns.size(), count);
  }
  return std::make_unique<RemoteDispatcher>(std::move(conns));
}

std::unique_ptr<RemoteDispatcher> RemoteDispatcher::dial_workers(
    const std::vector<Endpoint>& endpoints, std::chrono::milliseconds patience) {
  std::vector<Socket> conns;
  for (const auto& ep : endpoints) {
    try {
      conns.push_back(connect_to(ep, patience));
    } catch (const ConnectivityError& e) {
      spdlog::warn("{}", e.what());
    }
  }
  if (conns.empty()) throw ConnectivityError("no reachable workers");
  return std::make_unique<RemoteDispatcher>(std::move(conns));
}

void RemoteDispatcher::submit(std::uint64_t job_id, CustomizationJob job, double thd_aare) {
  std::lock_guard lock(mu_);
  queue_.push_back({job_id, std::move(job), thd_aare, 0});
  if (live_workers_locked() == 0) {
    fail_all_locked("all workers lost");
    return;
  }
  dispatch_locked();
}

Completion RemoteDispatcher::next() { return completions_.pop(); }

std::size_t RemoteDispatcher::live_workers() const {
  std::lock_guard lock(mu_);
  return live_workers_locked();
}

std::size_t RemoteDispatcher::live_workers_locked() const {
  std::size_t n = 0;
  for (const auto& s : slots_) n += s.alive;
  return n;
}

void RemoteDispatcher::dispatch_locked() {
  for (auto& s : slots_) {
    if (queue_.empty()) break;
    if (!s.alive || s.job) continue;
    s.job = std::move(queue_.front());
    queue_.pop_front();
  }
  cv_.notify_all();
}

void RemoteDispatcher::fail_all_locked(const std::string& why) {
  for (auto& p : queue_) completions_.push({p.job_id, ConnectivityError(why)});
  queue_.clear();
}

void RemoteDispatcher::worker_loop(std::size_t index) {
  while (true) {
    Pending p;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || slots_[index].job.has_value(); });
      if (stopping_) return;
      p = *slots_[index].job;
    }
    Socket& conn = slots_[index].conn;
    try {
      write_message(conn, CustomizeRequest{p.job_id, p.job, p.thd_aare});
      auto reply = read_message(conn);
      if (!reply) throw ConnectivityError("worker closed the connection");

      std::lock_guard lock(mu_);
      if (auto* r = std::get_if<CustomizeResult>(&*reply)) {
        if (finished_.contains(r->job_id)) {
          completions_.push({p.job_id, ProtocolError("duplicate result for job " + std::to_string(r->job_id))});
        } else if (r->job_id != p.job_id) {
          completions_.push({p.job_id, ProtocolError("worker answered job " + std::to_string(r->job_id) +
                                                         " while running job " + std::to_string(p.job_id))});
        } else {
          finished_.insert(p.job_id);
          completions_.push({p.job_id, std::move(r->result)});
        }
      } else if (auto* e = std::get_if<JobError>(&*reply)) {
        finished_.insert(p.job_id);
        completions_.push({p.job_id, error_from_reason(e->reason)});
      } else {
        completions_.push({p.job_id, ProtocolError(std::string("unexpected ") + kind_of(*reply) +
                                                       " from worker " + ids_[index])});
      }
      slots_[index].job.reset();
      dispatch_locked();
    } catch (const Error& e) {
      const bool transport = e.kind() == ErrorKind::connectivity || e.kind() == ErrorKind::framing;
      std::lock_guard lock(mu_);
      Slot& slot = slots_[index];
      slot.job.reset();
      if (stopping_) return;
      if (!transport) {
        completions_.push({p.job_id, e});
        dispatch_locked();
        continue;
      }
      slot.alive = false;
      slot.conn.close();
      spdlog::warn("worker {} lost during job {}: {}", ids_[index], p.job_id, e.what());
      if (p.attempts == 0) {
        ++p.attempts;
        queue_.push_front(std::move(p));
      } else {
        completions_.push({p.job_id, ConnectivityError("job " + std::to_string(p.job_id) +
                                                       " lost on two workers")});
      }
      if (live_workers_locked() == 0) {
        fail_all_locked("all workers lost");
      } else {
        dispatch_locked();
      }
      return;
    }
  }
}

}  // namespace distpre
