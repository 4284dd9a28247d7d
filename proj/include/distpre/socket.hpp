#pragma once

// Minimal blocking TCP stream sockets (POSIX).

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace distpre {

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  std::string to_string() const;
};

// Parses "HOST:PORT"; throws ConfigError.
Endpoint parse_endpoint(std::string_view text);

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) noexcept : fd_(fd) {}
  Socket(Socket&& o) noexcept;
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  bool valid() const noexcept { return fd_ >= 0; }
  int fd() const noexcept { return fd_; }

  // Throws ConnectivityError on failure.
  void send_all(std::string_view bytes);
  // Reads up to `n` bytes, returning fewer only at end of stream.
  std::string recv_upto(std::size_t n);

  // Unblocks pending reads/writes from another thread.
  void shutdown() noexcept;
  void close() noexcept;

 private:
  int fd_ = -1;
};

// Retries until `patience` elapses; throws ConnectivityError.
Socket connect_to(const Endpoint& ep,
                  std::chrono::milliseconds patience = std::chrono::milliseconds(10000));

class Listener {
 public:
  // Port 0 binds an ephemeral port.
  explicit Listener(const Endpoint& ep);

  std::uint16_t port() const noexcept { return port_; }
  // Throws ConnectivityError when nothing connects within `timeout`.
  Socket accept(std::chrono::milliseconds timeout);

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

}  // namespace distpre
