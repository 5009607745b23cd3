#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace pinet {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Malformed configuration (bad JSON, invalid field values). CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Filesystem / stream failure. CLI exit code 3.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Scene or checkpoint content violating the format contract.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor shape disagreement between operands.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Non-finite value where a finite one is required. CLI exit code 4.
struct NonFiniteError : std::runtime_error {
  long scene_index = -1;
  explicit NonFiniteError(const std::string& what, long scene = -1)
      : std::runtime_error(what), scene_index(scene) {}
};

/// Point set too degenerate for the requested alignment.
struct DegenerateGeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pinet
