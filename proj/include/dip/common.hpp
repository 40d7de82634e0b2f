#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

namespace dip {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for all errors raised by the solver library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Structural problems: dimension mismatches, invalid instances, bad options.
class InstanceError : public Error {
 public:
  using Error::Error;
};

/// An evaluator returned NaN/Inf or otherwise unusable values.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, int subsystem_index)
      : Error(what), subsystem(subsystem_index) {}
  int subsystem = -1;
};

/// A point violated the strict-interior requirement (v > 0, mu > 0).
class InteriorError : public Error {
 public:
  using Error::Error;
};

/// Local or full KKT matrix stayed singular through the regularization ladder.
class FactorizationError : public Error {
 public:
  FactorizationError(const std::string& what, int subsystem_index = -1)
      : Error(what), subsystem(subsystem_index) {}
  int subsystem = -1;
};

/// CG met a direction of nonpositive curvature; the coupling system is not PSD.
class CurvatureError : public Error {
 public:
  using Error::Error;
};

/// Input file could not be parsed; carries a 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line_number = 0)
      : Error(line_number > 0 ? what + " (line " + std::to_string(line_number) + ")" : what),
        line(line_number) {}
  int line = 0;
};

class IoError : public Error {
 public:
  using Error::Error;
};

inline double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

inline bool all_finite(const Vector& v) { return v.allFinite(); }
inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace dip
