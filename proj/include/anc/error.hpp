#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace anc {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used in the CLI's JSON error report.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, std::string kind = "error")
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(what, "invalid_argument") {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what, "format") {}
};

class MissingArtifact : public Error {
 public:
  explicit MissingArtifact(const std::string& what) : Error(what, "missing_artifact") {}
};

/// An adaptive filter blew up. `index()` is the sample (or step) at which the
/// non-finite or oversized coefficient was first seen.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t index)
      : Error(what + " at index " + std::to_string(index), "divergence"), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double achieved_nmse_db)
      : Error(what, "non_convergence"), achieved_nmse_db_(achieved_nmse_db) {}
  double achieved_nmse_db() const noexcept { return achieved_nmse_db_; }

 private:
  double achieved_nmse_db_;
};

}  // namespace anc
