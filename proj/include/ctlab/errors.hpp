// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ctlab {

/// Base of every error raised by the library. Callers that only care about
/// "something in ctlab rejected the input" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Address model.
class OverlapError : public Error {
 public:
  using Error::Error;
};
class UnknownRange : public Error {
 public:
  using Error::Error;
};
class AlignmentError : public Error {
 public:
  using Error::Error;
};

// Layout.
class RegionFull : public Error {
 public:
  using Error::Error;
};
class PlacementExhausted : public Error {
 public:
  using Error::Error;
};

// Deallocation faults.
class DoubleFree : public Error {
 public:
  using Error::Error;
};
class InvalidFree : public Error {
 public:
  using Error::Error;
};
class TagMismatch : public Error {
 public:
  using Error::Error;
};

// Metrics.
class EmptyMultiset : public Error {
 public:
  using Error::Error;
};
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Raised when an internal consistency check fails. The CLI maps this to
/// exit code 2, everything else derived from Error to exit code 1.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed trace that violates the malloc/free protocol.
class ProtocolError : public Error {
 public:
  ProtocolError(std::uint64_t id, const std::string& what)
      : Error(what + " (id " + std::to_string(id) + ")"), id_(id) {}
  std::uint64_t id() const noexcept { return id_; }

 private:
  std::uint64_t id_;
};

}  // namespace ctlab
