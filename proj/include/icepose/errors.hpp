#pragma once

#include <stdexcept>
#include <string>

namespace icepose {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension / shape mismatches between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values (ranges, counts, incompatible presets).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File I/O failures and malformed on-disk records.
class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required (includes divergence).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Degenerate geometric input (e.g. zero or parallel Rot6D columns).
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

// API misuse: out-of-range indices, non-scalar backward roots, stale handles.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace icepose
