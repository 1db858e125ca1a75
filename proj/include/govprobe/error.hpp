#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace govprobe {

/// Input that violates a schema or a domain invariant. The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed line in a text input; carries the 1-based line number.
class ParseError : public ValidationError {
 public:
  ParseError(std::string source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

/// File could not be opened, read or written; CLI exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary container is cut short. offset is the byte position where the read failed.
class TruncatedError : public ValidationError {
 public:
  TruncatedError(const std::string& what, std::uint64_t offset)
      : ValidationError(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace govprobe
