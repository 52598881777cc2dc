#pragma once

#include <stdexcept>
#include <string>

namespace cpabf {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Geometry
class DegenerateInput : public Error {
 public:
  using Error::Error;
};
class UnsupportedDimension : public Error {
 public:
  using Error::Error;
};
class SingularSimplex : public Error {
 public:
  using Error::Error;
};
class OutsideDomain : public Error {
 public:
  using Error::Error;
};

// Dataset / IO
class SchemaError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};

// Dynamics
class InputOutOfRange : public Error {
 public:
  using Error::Error;
};
class OracleFailure : public Error {
 public:
  using Error::Error;
};

// Conic / synthesis
class NumericalBreakdown : public Error {
 public:
  using Error::Error;
};
class AssemblyError : public Error {
 public:
  using Error::Error;
};
class EmptyDataset : public Error {
 public:
  using Error::Error;
};
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace cpabf
