// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace locata {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

class NoSignalError : public Error {
 public:
  using Error::Error;
};

class IllConditionedError : public Error {
 public:
  using Error::Error;
};

class UnsupportedGeometryError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class UnderdeterminedError : public Error {
 public:
  using Error::Error;
};

/// Submission timestamps that are not on the evaluation clock.
class ClockMismatchError : public Error {
 public:
  ClockMismatchError(double timestamp, const std::string& what) : Error(what), timestamp_(timestamp) {}
  double timestamp() const noexcept { return timestamp_; }

 private:
  double timestamp_;
};

/// A file could not be loaded. Carries the offending path.
class LoadError : public Error {
 public:
  LoadError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// A file was readable but its content is malformed. line is 1-based, 0 when unknown.
class FormatError : public Error {
 public:
  FormatError(std::string path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what),
        path_(std::move(path)),
        line_(line) {}
  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

}  // namespace locata
