#ifndef MAULAB_ERROR_HPP
#define MAULAB_ERROR_HPP

#include <stdexcept>
#include <string>

namespace maulab {

enum class ErrorKind {
  InvalidArgument,
  Config,
  Io,
  Dependency,
  Contract,
  Diverged,
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::Dependency: return "dependency";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Diverged: return "diverged";
    case ErrorKind::Internal: return "internal";
  }
  return "internal";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace maulab

#endif
