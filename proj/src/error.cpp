#include "distpre/error.hpp"

namespace distpre {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return "configuration error";
    case ErrorKind::data: return "data error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::cadence: return "cadence error";
    case ErrorKind::numerical: return "numerical error";
    case ErrorKind::training: return "training error";
    case ErrorKind::format: return "format error";
    case ErrorKind::integrity: return "integrity error";
    case ErrorKind::connectivity: return "connectivity error";
    case ErrorKind::framing: return "framing error";
    case ErrorKind::protocol: return "protocol error";
    case ErrorKind::handshake: return "handshake error";
  }
  return "error";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data:
    case ErrorKind::parse:
    case ErrorKind::cadence: return 3;
    case ErrorKind::connectivity:
    case ErrorKind::framing:
    case ErrorKind::protocol:
    case ErrorKind::handshake: return 4;
    case ErrorKind::format:
    case ErrorKind::integrity: return 5;
    case ErrorKind::numerical:
    case ErrorKind::training: return 1;
  }
  return 1;
}

}  // namespace distpre
