#pragma once

#include <compare>
#include <string>

namespace dfgc {

enum class PhaseKind { Creation, Detection };

struct PhaseId {
  PhaseKind kind = PhaseKind::Creation;
  int round = 1;

  auto operator<=>(const PhaseId&) const = default;

  /// "C1", "D3", ...
  std::string label() const;
  /// Inverse of label(); throws ErrorKind::Parameter on malformed input.
  static PhaseId parse(const std::string& text);
};

}  // namespace dfgc
