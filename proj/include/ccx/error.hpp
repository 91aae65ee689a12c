#pragma once

#include <stdexcept>
#include <string>

namespace ccx {

/// Malformed input files, bad configuration values, non-finite covariates.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required exposure value is absent for a (zone, date).
class MissingDataError : public std::runtime_error {
 public:
  MissingDataError(const std::string& what, std::string gap_date)
      : std::runtime_error(what), gap_date_(std::move(gap_date)) {}
  const std::string& gap_date() const { return gap_date_; }

 private:
  std::string gap_date_;
};

/// Sample cannot support the requested basis (too few distinct values).
class DegenerateDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nothing left to analyse after exclusions.
class EmptyAnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Conditional likelihood is unbounded along some coefficient block.
class SeparationError : public std::runtime_error {
 public:
  SeparationError(const std::string& what, std::string block)
      : std::runtime_error(what), block_(std::move(block)) {}
  const std::string& block() const { return block_; }

 private:
  std::string block_;
};

/// Information matrix stayed singular after the ridge retry.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ccx
