#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace packlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Document is not syntactically valid JSON.
class MalformedDocument : public Error {
 public:
  using Error::Error;
};

// Document parses but a field is missing, unknown, or has the wrong type.
class SchemaViolation : public Error {
 public:
  using Error::Error;
};

// One or more domain invariants failed. Every violation is kept.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

class ComboExplosion : public Error {
 public:
  using Error::Error;
};

class NoFreePoint : public Error {
 public:
  NoFreePoint() : Error("no free grid point") {}
};

class EmptyGrid : public Error {
 public:
  using Error::Error;
};

class MismatchedRun : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class DuplicateRun : public Error {
 public:
  using Error::Error;
};

class UnknownDimension : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A persisted artifact already exists with different bytes.
class ConflictError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

}  // namespace packlab
