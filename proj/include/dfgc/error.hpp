#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dfgc {

enum class ErrorKind {
  Shape,
  DegenerateInput,
  Parameter,
  Naming,
  Coverage,
  Extraneous,
  Decode,
  ClassMissing,
  DetectorFault,
  Capability,
  Divergence,
  Tamper,
  Phase,
  Quota,
  Frozen,
  NoCounterparty,
  State,
  NotFound,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Domain error carrying a machine-readable kind. The CLI maps every Error to
/// exit code 1 and the service maps kinds to HTTP statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace dfgc
