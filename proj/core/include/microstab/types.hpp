#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <complex>
#include <stdexcept>
#include <string>

namespace microstab {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

using Complex = std::complex<double>;
using VecXc = Eigen::VectorXcd;
using MatXc = Eigen::MatrixXcd;
using SpMatC = Eigen::SparseMatrix<Complex>;

// 2x2 tensors are flattened column-major: (11, 21, 12, 22).
inline Vec4 tensor_to_vec4(const Mat2& t) {
  return Vec4(t(0, 0), t(1, 0), t(0, 1), t(1, 1));
}

inline Mat2 vec4_to_tensor(const Vec4& v) {
  Mat2 t;
  t << v(0), v(2), v(1), v(3);
  return t;
}

// Index of component (i, J) in the 4-vector arrangement, 0-based.
inline int voigt4(int i, int J) { return i + 2 * J; }

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class MeshError : public Error {
 public:
  using Error::Error;
};

class MaterialError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace microstab
