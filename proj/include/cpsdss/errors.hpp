#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cpsdss {

// Base for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (model document, CVSS vector, CSV). `position` is a
// byte offset into the input when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position = npos)
      : Error(position == npos ? what : what + " (at byte " + std::to_string(position) + ")"),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::size_t position_;
};

struct Diagnostic {
  std::string invariant;  // short machine-readable tag, e.g. "kappa-range"
  std::string subject;    // offending node id or "parent->child"
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

// A model failed one or more structural/attribute invariants.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Diagnostic> diagnostics)
      : Error(summarise(diagnostics)), diagnostics_(std::move(diagnostics)) {}

  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  static std::string summarise(const std::vector<Diagnostic>& d) {
    if (d.empty()) return "model validation failed";
    std::string s = d.front().invariant + ": " + d.front().message;
    if (d.size() > 1) s += " (+" + std::to_string(d.size() - 1) + " more)";
    return s;
  }

  std::vector<Diagnostic> diagnostics_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Argument outside an operation's domain (negative rate, probability > 1 ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Evidence with zero total probability under the network.
class InconsistentEvidenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace cpsdss
