#include "dfgc/phase.hpp"

#include <charconv>

#include "dfgc/error.hpp"

namespace dfgc {

std::string PhaseId::label() const {
  return (kind == PhaseKind::Creation ? "C" : "D") + std::to_string(round);
}

PhaseId PhaseId::parse(const std::string& text) {
  if (text.size() < 2 || (text[0] != 'C' && text[0] != 'D')) {
    throw Error(ErrorKind::Parameter, "bad phase label '" + text + "'");
  }
  PhaseId id;
  id.kind = text[0] == 'C' ? PhaseKind::Creation : PhaseKind::Detection;
  const char* first = text.data() + 1;
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, id.round);
  if (ec != std::errc{} || ptr != last || id.round < 1) {
    throw Error(ErrorKind::Parameter, "bad phase label '" + text + "'");
  }
  return id;
}

}  // namespace dfgc
