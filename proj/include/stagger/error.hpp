#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace stagger {

enum class ErrorKind {
  InvalidInput,
  DuplicateKey,
  InconsistentAdoption,
  NoUntreatedObservations,
  EmptyCohort,
  NonContiguousCohort,
  EmptySample,
  RankDeficient,
  UnbalancedPanel,
  TooFewClusters,
  UnidentifiedFixedEffect,
  EmptyBin,
  WindowUnavailable,
  Unidentified,
  SingularSystem,
  NoTreatedCells,
  MissingCell,
  DegenerateDataset,
  ParseError,
  ConfigError,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct Violation {
  ErrorKind kind;
  std::string message;
};

// Raised by validate_panel with every violated requirement, not just the first.
class PanelError : public Error {
 public:
  explicit PanelError(std::vector<Violation> violations);

  const std::vector<Violation>& violations() const noexcept { return violations_; }
  bool has(ErrorKind kind) const noexcept;

 private:
  std::vector<Violation> violations_;
};

}  // namespace stagger
