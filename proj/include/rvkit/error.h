#ifndef RVKIT_ERROR_H_
#define RVKIT_ERROR_H_

#include <stdexcept>
#include <string>

namespace rvkit {

// Process exit codes used by the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitConfig = 2,
  kExitFormat = 3,
  kExitConstraint = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, int exit_code)
      : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what, kExitIo) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, kExitConfig) {}
};

// Malformed binary or text input. `offset` is the byte offset (or line
// number for text formats) at which parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, long long offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")",
              kExitFormat),
        offset_(offset) {}
  long long offset() const { return offset_; }

 private:
  long long offset_;
};

class ConstraintError : public Error {
 public:
  explicit ConstraintError(const std::string& what)
      : Error(what, kExitConstraint) {}
};

// Geometric input outside a function's domain, e.g. a point on the z-axis
// where the azimuth is undefined.
class DegenerateInputError : public ConstraintError {
 public:
  explicit DegenerateInputError(const std::string& what)
      : ConstraintError("degenerate input: " + what) {}
};

class ShapeError : public ConstraintError {
 public:
  explicit ShapeError(const std::string& what)
      : ConstraintError("shape mismatch: " + what) {}
};

}  // namespace rvkit

#endif  // RVKIT_ERROR_H_
