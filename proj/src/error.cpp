#include "stagger/error.hpp"

#include <algorithm>

namespace stagger {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::DuplicateKey: return "DuplicateKey";
    case ErrorKind::InconsistentAdoption: return "InconsistentAdoption";
    case ErrorKind::NoUntreatedObservations: return "NoUntreatedObservations";
    case ErrorKind::EmptyCohort: return "EmptyCohort";
    case ErrorKind::NonContiguousCohort: return "NonContiguousCohort";
    case ErrorKind::EmptySample: return "EmptySample";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::UnbalancedPanel: return "UnbalancedPanel";
    case ErrorKind::TooFewClusters: return "TooFewClusters";
    case ErrorKind::UnidentifiedFixedEffect: return "UnidentifiedFixedEffect";
    case ErrorKind::EmptyBin: return "EmptyBin";
    case ErrorKind::WindowUnavailable: return "WindowUnavailable";
    case ErrorKind::Unidentified: return "Unidentified";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NoTreatedCells: return "NoTreatedCells";
    case ErrorKind::MissingCell: return "MissingCell";
    case ErrorKind::DegenerateDataset: return "DegenerateDataset";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

namespace {

std::string join_messages(const std::vector<Violation>& violations) {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += std::string(to_string(v.kind)) + ": " + v.message;
  }
  return out;
}

}  // namespace

PanelError::PanelError(std::vector<Violation> violations)
    : Error(violations.empty() ? ErrorKind::InvalidInput : violations.front().kind,
            join_messages(violations)),
      violations_(std::move(violations)) {}

bool PanelError::has(ErrorKind kind) const noexcept {
  return std::any_of(violations_.begin(), violations_.end(),
                     [kind](const Violation& v) { return v.kind == kind; });
}

}  // namespace stagger
