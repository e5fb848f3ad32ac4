#pragma once

#include <stdexcept>
#include <string>

namespace fmdp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of an operation (bad index, bad tuple value).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A construction would exceed a configured size cap.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver hit its iteration cap.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double lastSpan)
      : Error(what), lastSpan_(lastSpan) {}
  double lastSpan() const { return lastSpan_; }

 private:
  double lastSpan_;
};

/// Some target state is not reachable, so the diameter is infinite.
class DiameterInfiniteError : public Error {
 public:
  using Error::Error;
};

/// A consistent-scope set became empty.
class StructuralFault : public Error {
 public:
  using Error::Error;
};

/// Malformed input document or CSV.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace fmdp
