#include "dfgc/error.hpp"

namespace dfgc {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::DegenerateInput: return "degenerate_input";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Naming: return "naming";
    case ErrorKind::Coverage: return "coverage";
    case ErrorKind::Extraneous: return "extraneous_file";
    case ErrorKind::Decode: return "decode";
    case ErrorKind::ClassMissing: return "class_missing";
    case ErrorKind::DetectorFault: return "detector_fault";
    case ErrorKind::Capability: return "capability";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Tamper: return "tamper";
    case ErrorKind::Phase: return "phase";
    case ErrorKind::Quota: return "quota";
    case ErrorKind::Frozen: return "frozen_phase";
    case ErrorKind::NoCounterparty: return "no_counterparty";
    case ErrorKind::State: return "state";
    case ErrorKind::NotFound: return "not_found";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace dfgc
