#pragma once

#include <complex>
#include <string_view>

#include <Eigen/Dense>

namespace locgibbs {

using Complex = std::complex<double>;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

enum class Statistics { fermionic, bosonic };

constexpr std::string_view to_string(Statistics s) {
  return s == Statistics::fermionic ? "fermionic" : "bosonic";
}

}  // namespace locgibbs
