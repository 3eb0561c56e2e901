#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace gaspipe {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Unit conversion constants. Internals are SI (Pa, kg/s, m, s); MPa and km
// appear only at file and report boundaries.
inline constexpr double kPaPerMPa = 1.0e6;
inline constexpr double kMetersPerKm = 1.0e3;

/// Base class for all domain errors raised by the library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad network structure: dangling endpoints, duplicate ids, self loops.
struct TopologyError : Error {
  using Error::Error;
};

/// Geometry or parameter outside its physical range.
struct ParameterError : Error {
  using Error::Error;
};

/// Time stepping produced an invalid state (e.g. nonpositive pressure).
struct IntegrationError : Error {
  using Error::Error;
};

/// Actuator command outside device bounds.
struct ActuatorError : Error {
  using Error::Error;
};

/// Numerical solver failed (Newton, QP, branch-and-bound).
struct SolverError : Error {
  using Error::Error;
};

/// Malformed or schema-violating input file. Message carries a location.
struct ParseError : Error {
  using Error::Error;
};

/// Mismatched vector/matrix dimensions between caller and model.
struct DimensionError : Error {
  using Error::Error;
};

inline void require_dim(bool ok, const std::string& what) {
  if (!ok) throw DimensionError("dimension mismatch: " + what);
}

}  // namespace gaspipe
