#pragma once

// Wire protocol for remote workers. A frame is a 4-byte big-endian payload
// length followed by one JSON message.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "distpre/coordinator.hpp"
#include "distpre/customizer.hpp"
#include "distpre/socket.hpp"

namespace distpre {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 1U << 30;

struct Hello {
  std::string worker_id;
  int protocol_version = kProtocolVersion;
  friend bool operator==(const Hello&, const Hello&) = default;
};

struct CustomizeRequest {
  std::uint64_t job_id = 0;
  CustomizationJob job;
  double thd_aare = 0.05;
  friend bool operator==(const CustomizeRequest&, const CustomizeRequest&) = default;
};

struct CustomizeResult {
  std::uint64_t job_id = 0;
  CustomizationResult result;
  friend bool operator==(const CustomizeResult&, const CustomizeResult&) = default;
};

struct JobError {
  std::uint64_t job_id = 0;
  std::string reason;
  friend bool operator==(const JobError&, const JobError&) = default;
};

struct Shutdown {
  friend bool operator==(const Shutdown&, const Shutdown&) = default;
};

using Message = std::variant<Hello, CustomizeRequest, CustomizeResult, JobError, Shutdown>;

const char* kind_of(const Message& m) noexcept;

// Full frame (header + payload).
std::string encode(const Message& m);

// Decodes exactly one frame. Throws FramingError when the bytes are short
// of the declared length or carry trailing data, ProtocolError on an
// unknown kind or malformed body, HandshakeError on a hello whose
// protocol_version differs.
Message decode(std::string_view frame);

// Stream helpers. read_message returns nullopt on a clean end of stream
// before any header byte; a partial frame is a FramingError.
void write_message(Socket& s, const Message& m);
std::optional<Message> read_message(Socket& s);

// Job errors travel as "<kind>: <message>".
std::string job_error_reason(const Error& e);
Error error_from_reason(std::string_view reason);

struct WorkerOptions {
  std::string worker_id = "worker";
};

// Runs the worker loop on an established master connection: hello, then
// customize_request -> customize_result (or job_error) until shutdown or end
// of stream. Returns the number of jobs served.
std::size_t serve_worker(Socket conn, const WorkerOptions& options);
std::size_t serve_worker_connect(const Endpoint& master, const WorkerOptions& options,
                                 std::chrono::milliseconds patience = std::chrono::milliseconds(10000));
std::size_t serve_worker_listen(const Endpoint& address, const WorkerOptions& options,
                                std::chrono::milliseconds accept_timeout = std::chrono::hours(24));

// Master side: exchanges hellos and returns the worker's id.
std::string master_handshake(Socket& conn);

// Executes jobs on connected workers: at most one in flight per worker, the
// next queued job goes to the lowest-index idle worker, a job whose
// connection drops is requeued once.
class RemoteDispatcher final : public JobExecutor {
 public:
  explicit RemoteDispatcher(std::vector<Socket> workers);
  ~RemoteDispatcher() override;

  // Accepts `count` workers on `listener`.
  static std::unique_ptr<RemoteDispatcher> accept_workers(Listener& listener, std::size_t count,
                                                          std::chrono::milliseconds timeout);
  // Dials listening workers.
  static std::unique_ptr<RemoteDispatcher> dial_workers(const std::vector<Endpoint>& endpoints,
                                                        std::chrono::milliseconds patience);

  void submit(std::uint64_t job_id, CustomizationJob job, double thd_aare) override;
  Completion next() override;

  std::size_t live_workers() const;
  const std::vector<std::string>& worker_ids() const noexcept { return ids_; }

 private:
  struct Pending {
    std::uint64_t job_id = 0;
    CustomizationJob job;
    double thd_aare = 0.0;
    int attempts = 0;
  };
  struct Slot {
    Socket conn;
    bool alive = true;
    std::optional<Pending> job;
  };

  std::size_t live_workers_locked() const;
  void dispatch_locked();
  void fail_all_locked(const std::string& why);
  void worker_loop(std::size_t index);

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Pending> queue_;
  std::vector<Slot> slots_;
  std::vector<std::string> ids_;
  std::set<std::uint64_t> finished_;
  bool stopping_ = false;
  CompletionChannel completions_;
  std::vector<std::thread> threads_;
};

}  // namespace distpre
