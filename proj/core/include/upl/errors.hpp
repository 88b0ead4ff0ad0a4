#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace upl {

// Every library failure derives from upl::Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. `line` is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : what + " (line " + std::to_string(line) + ")"),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A value outside its admissible range.
class DomainError : public Error {
 public:
  using Error::Error;
  DomainError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

// Structurally inconsistent data, e.g. a duplicated (user, item) pair.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// A division by a zero denominator in a propensity-weighted expression.
class SingularityError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

// Training diverged or could not proceed.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class EnumerationBoundError : public Error {
 public:
  EnumerationBoundError(std::size_t cells, std::size_t limit)
      : Error("exact enumeration supports at most " + std::to_string(limit) +
              " user-item cells, world has " + std::to_string(cells)),
        cells_(cells),
        limit_(limit) {}

  std::size_t cells() const noexcept { return cells_; }
  std::size_t limit() const noexcept { return limit_; }

 private:
  std::size_t cells_;
  std::size_t limit_;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace upl
