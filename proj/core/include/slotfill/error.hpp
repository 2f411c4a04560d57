#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slotfill {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input text that does not parse under its declared format.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input whose content violates a data invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

class DuplicateIdError : public DataError {
 public:
  explicit DuplicateIdError(const std::string& id)
      : DataError("duplicate id: " + id), id_(id) {}

  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class UnknownIdError : public DataError {
 public:
  explicit UnknownIdError(const std::string& id)
      : DataError("unknown id: " + id), id_(id) {}

  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class DimensionError : public DataError {
 public:
  DimensionError(std::size_t expected, std::size_t actual)
      : DataError("dimension mismatch: expected " + std::to_string(expected) +
                  ", got " + std::to_string(actual)) {}
};

/// Binary file problems. Each failure mode has its own type.
class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public FormatError {
 public:
  BadMagicError(const std::string& path, const std::string& expected)
      : FormatError(path + ": bad magic, expected " + expected) {}
};

class TruncatedFileError : public FormatError {
 public:
  explicit TruncatedFileError(const std::string& path)
      : FormatError(path + ": file is truncated") {}
};

class VersionMismatchError : public FormatError {
 public:
  VersionMismatchError(const std::string& path, unsigned expected, unsigned actual)
      : FormatError(path + ": format version " + std::to_string(actual) +
                    " (supported: " + std::to_string(expected) + ")") {}
};

/// A run was started without a resource it needs (index, params, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace slotfill
