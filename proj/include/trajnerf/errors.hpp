#pragma once

#include <stdexcept>
#include <string>

namespace trajnerf {

// Base class for all domain errors raised by this library. The CLI maps
// these to exit code 1; anything else escaping main is a bug.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Rejected input values: non-finite matrices, negative scales, bad flags.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Geometry that admits no answer: all optical axes parallel, cameras at
// the origin, degenerate bounding boxes.
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

// A pose with the wrong convention tag reached an operation that requires
// normalized OpenGL-style poses.
class ConventionError : public Error {
 public:
  using Error::Error;
};

// Malformed on-disk data. Carries the path and (when line-oriented) the
// 1-based line number of the offending record.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, long line, const std::string& msg)
      : Error(format(path, line, msg)), path_(path), line_(line) {}

  const std::string& path() const { return path_; }
  long line() const { return line_; }

 private:
  static std::string format(const std::string& path, long line, const std::string& msg) {
    if (line > 0) return path + ":" + std::to_string(line) + ": " + msg;
    return path + ": " + msg;
  }
  std::string path_;
  long line_ = 0;
};

// Structured-file contents that parse but violate the schema; the message
// names the offending field path.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures: missing files, unwritable paths.
class IoError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss; partial outputs were flushed before
// this was thrown.
class TrainingDivergedError : public Error {
 public:
  using Error::Error;
};

}  // namespace trajnerf
