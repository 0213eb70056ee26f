#pragma once

// Matrix exponential by scaling and squaring with a degree-13 diagonal Pade
// approximant (Higham, SIAM J. Matrix Anal. Appl. 26, 2005). The degree-13
// backward error bound for ||A||_1 <= theta_13 is below double unit roundoff.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace kicktop {

enum class MatrixStructure { General, UpperTriangular };

namespace detail {

inline constexpr double kPade13[14] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                       1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                       670442572800.0,      33522128640.0,       1323241920.0,
                                       40840800.0,          960960.0,            16380.0,
                                       182.0,               1.0};
inline constexpr double kTheta13 = 5.371920351148152;

template <typename Matrix>
Matrix multiply(const Matrix& a, const Matrix& b, MatrixStructure st) {
  if (st == MatrixStructure::UpperTriangular) {
    Matrix out = a.template triangularView<Eigen::Upper>() * b;
    out.template triangularView<Eigen::StrictlyLower>().setZero();
    return out;
  }
  return a * b;
}

}  // namespace detail

template <typename Matrix>
Matrix expm(const Matrix& input, MatrixStructure st = MatrixStructure::General) {
  using detail::kPade13;
  if (input.rows() != input.cols()) throw std::invalid_argument("expm: matrix must be square");
  const Eigen::Index n = input.rows();
  if (n == 0) return input;

  const double norm1 = input.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm1)) throw std::domain_error("expm: non-finite input");
  int squarings = 0;
  if (norm1 > detail::kTheta13) squarings = static_cast<int>(std::ceil(std::log2(norm1 / detail::kTheta13)));
  const Matrix a = input / std::ldexp(1.0, squarings);

  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = detail::multiply(a, a, st);
  const Matrix a4 = detail::multiply(a2, a2, st);
  const Matrix a6 = detail::multiply(a4, a2, st);

  Matrix u_inner = kPade13[13] * a6 + kPade13[11] * a4 + kPade13[9] * a2;
  u_inner = detail::multiply(a6, u_inner, st);
  u_inner += kPade13[7] * a6 + kPade13[5] * a4 + kPade13[3] * a2 + kPade13[1] * ident;
  const Matrix u = detail::multiply(a, u_inner, st);

  Matrix v = kPade13[12] * a6 + kPade13[10] * a4 + kPade13[8] * a2;
  v = detail::multiply(a6, v, st);
  v += kPade13[6] * a6 + kPade13[4] * a4 + kPade13[2] * a2 + kPade13[0] * ident;

  const Matrix p = v + u;
  const Matrix q = v - u;
  Matrix r;
  if (st == MatrixStructure::UpperTriangular) {
    r = q.template triangularView<Eigen::Upper>().solve(p);
    r.template triangularView<Eigen::StrictlyLower>().setZero();
  } else {
    r = q.partialPivLu().solve(p);
  }
  for (int s = 0; s < squarings; ++s) r = detail::multiply(r, r, st);
  return r;
}

}  // namespace kicktop
