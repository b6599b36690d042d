#pragma once

#include <stdexcept>
#include <string>

namespace shapeinst {

/// Bad or inconsistent input data (missing files, extent mismatches, ...).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numeric failure during optimization (non-finite loss or parameters).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace shapeinst
