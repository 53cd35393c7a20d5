#pragma once

#include <stdexcept>
#include <string>

namespace mric {

// Broad failure categories. The CLI maps them onto exit codes.
enum class ErrorKind {
  kValidation,  // bad shapes, arguments, manifests, checksums
  kIo,          // file system and codec failures
  kNumeric,     // non-finite values during training
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorKind::kValidation, w) {}
};

struct ValueError : Error {
  explicit ValueError(const std::string& w) : Error(ErrorKind::kValidation, w) {}
};

struct DisconnectedGraphError : Error {
  explicit DisconnectedGraphError(const std::string& w)
      : Error(ErrorKind::kValidation, w) {}
};

struct ChecksumError : Error {
  explicit ChecksumError(const std::string& w) : Error(ErrorKind::kValidation, w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::kIo, w) {}
};

struct UnsupportedFormatError : Error {
  explicit UnsupportedFormatError(const std::string& w) : Error(ErrorKind::kIo, w) {}
};

struct CorruptImageError : Error {
  explicit CorruptImageError(const std::string& w) : Error(ErrorKind::kIo, w) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::kNumeric, w) {}
};

}  // namespace mric
