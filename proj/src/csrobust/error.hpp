#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace csr {

enum class ErrorCode {
  InvalidSpec,
  ShapeMismatch,
  Parse,
  NumericalFailure,
  UndefinedRatio,
  Capability,
  Io,
  MissingInput,
  Schema,
  Internal,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Malformed file content. The offset is the byte at which parsing failed.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : Error(ErrorCode::Parse, what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace csr
