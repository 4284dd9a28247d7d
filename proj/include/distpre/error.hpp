#pragma once

#include <stdexcept>
#include <string>

namespace distpre {

enum class ErrorKind {
  config,
  data,
  parse,
  cadence,
  numerical,
  training,
  format,
  integrity,
  connectivity,
  framing,
  protocol,
  handshake,
};

const char* to_string(ErrorKind kind) noexcept;

// Process exit code used by the CLI for each error kind.
int exit_code(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define DISTPRE_DEFINE_ERROR(Name, Base, Kind)               \
  class Name : public Base {                                 \
   public:                                                   \
    explicit Name(const std::string& what) : Base(Kind, what) {} \
                                                             \
   protected:                                                \
    Name(ErrorKind kind, const std::string& what) : Base(kind, what) {} \
  };

DISTPRE_DEFINE_ERROR(ConfigError, Error, ErrorKind::config)
DISTPRE_DEFINE_ERROR(DataError, Error, ErrorKind::data)
DISTPRE_DEFINE_ERROR(ParseError, DataError, ErrorKind::parse)
DISTPRE_DEFINE_ERROR(CadenceError, DataError, ErrorKind::cadence)
DISTPRE_DEFINE_ERROR(NumericalError, Error, ErrorKind::numerical)
DISTPRE_DEFINE_ERROR(FormatError, Error, ErrorKind::format)
DISTPRE_DEFINE_ERROR(IntegrityError, Error, ErrorKind::integrity)
DISTPRE_DEFINE_ERROR(ConnectivityError, Error, ErrorKind::connectivity)
DISTPRE_DEFINE_ERROR(FramingError, Error, ErrorKind::framing)
DISTPRE_DEFINE_ERROR(ProtocolError, Error, ErrorKind::protocol)
DISTPRE_DEFINE_ERROR(HandshakeError, ProtocolError, ErrorKind::handshake)

#undef DISTPRE_DEFINE_ERROR

// Raised when a training run diverges; carries the failing epoch.
class TrainingError : public Error {
 public:
  TrainingError(int epoch, const std::string& what)
      : Error(ErrorKind::training, what), epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace distpre
