#pragma once

#include <stdexcept>
#include <string>

namespace mnmt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parallel files disagree on sentence count.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

class EncodingError : public Error {
 public:
  using Error::Error;
};

// Malformed text input (lexicon rows, vocab files, config files).
class ParseError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered, or a numeric precondition violated.
class NumericError : public Error {
 public:
  using Error::Error;
};

class EmptyDataError : public Error {
 public:
  using Error::Error;
};

class CorruptionError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace mnmt
