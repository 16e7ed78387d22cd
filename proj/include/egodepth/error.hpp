#pragma once

#include <stdexcept>
#include <string>

namespace egodepth {

enum class ErrorKind {
  invalid_argument,
  ambiguous_log,
  behind_camera,
  degenerate_input,
  association,
  degenerate_snippet,
  io,
  parse,
};

// Base for every error raised by the library. Invalid data inside a buffer
// (out-of-bounds samples, masked pixels) is reported as data, never thrown.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define EGODEPTH_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

EGODEPTH_DEFINE_ERROR(InvalidArgument, invalid_argument)
EGODEPTH_DEFINE_ERROR(AmbiguousLog, ambiguous_log)
EGODEPTH_DEFINE_ERROR(BehindCamera, behind_camera)
EGODEPTH_DEFINE_ERROR(DegenerateInput, degenerate_input)
EGODEPTH_DEFINE_ERROR(AssociationError, association)
EGODEPTH_DEFINE_ERROR(DegenerateSnippet, degenerate_snippet)
EGODEPTH_DEFINE_ERROR(IoError, io)

#undef EGODEPTH_DEFINE_ERROR

// Parse failures carry the 1-based line number of the offending input line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::parse, what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace egodepth
