#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <type_traits>

#include "activerank/types.hpp"

namespace activerank {

enum class KernelFamily { rbf, matern, linear };

inline std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::rbf: return "rbf";
    case KernelFamily::matern: return "matern";
    case KernelFamily::linear: return "linear";
  }
  return "unknown";
}

inline KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "rbf") return KernelFamily::rbf;
  if (name == "matern") return KernelFamily::matern;
  if (name == "linear") return KernelFamily::linear;
  throw Error(ErrorCode::invalid_argument,
              "unknown kernel '" + std::string(name) + "'");
}

inline constexpr double kMinLengthScale = 0.01;
inline constexpr double kMaxLengthScale = 2.0;

/// Kernel family plus hyperparameters. Every family is scaled by
/// output_scale: k(x, x') = output_scale * k_base(x, x').
template <typename Scalar = double>
struct KernelSpec {
  KernelFamily family = KernelFamily::rbf;
  Scalar length_scale = Scalar(0.5);
  Scalar output_scale = Scalar(1);
  Scalar nu = Scalar(2.5);  // Matérn only; one of 0.5, 1.5, 2.5

  bool stationary() const { return family != KernelFamily::linear; }

  void validate() const {
    using std::isfinite;
    if (!isfinite(length_scale) || length_scale < Scalar(kMinLengthScale) ||
        length_scale > Scalar(kMaxLengthScale)) {
      throw Error(ErrorCode::invalid_argument,
                  "length_scale must lie in [0.01, 2]");
    }
    if (!isfinite(output_scale) || !(output_scale > Scalar(0))) {
      throw Error(ErrorCode::invalid_argument, "output_scale must be > 0");
    }
    if (family == KernelFamily::matern && nu != Scalar(0.5) &&
        nu != Scalar(1.5) && nu != Scalar(2.5)) {
      throw Error(ErrorCode::invalid_argument,
                  "matern nu must be one of 0.5, 1.5, 2.5");
    }
  }

  template <typename Other>
  KernelSpec<Other> cast() const {
    return {family, Other(length_scale), Other(output_scale), Other(nu)};
  }
};

namespace detail {

// Base kernel (output_scale = 1) of a stationary family at squared
// distance r2.
template <typename Scalar>
Scalar stationary_base(const KernelSpec<Scalar>& spec, Scalar r2) {
  using std::exp;
  using std::sqrt;
  const Scalar ell = spec.length_scale;
  if (spec.family == KernelFamily::rbf) {
    return exp(-r2 / (Scalar(2) * ell * ell));
  }
  const Scalar r = sqrt(r2);
  if (spec.nu == Scalar(0.5)) return exp(-r / ell);
  if (spec.nu == Scalar(1.5)) {
    const Scalar a = sqrt(Scalar(3)) * r / ell;
    return (Scalar(1) + a) * exp(-a);
  }
  const Scalar a = sqrt(Scalar(5)) * r / ell;
  return (Scalar(1) + a + a * a / Scalar(3)) * exp(-a);
}

// d stationary_base / d length_scale.
template <typename Scalar>
Scalar stationary_base_dell(const KernelSpec<Scalar>& spec, Scalar r2) {
  using std::exp;
  using std::sqrt;
  const Scalar ell = spec.length_scale;
  if (spec.family == KernelFamily::rbf) {
    return stationary_base(spec, r2) * r2 / (ell * ell * ell);
  }
  const Scalar r = sqrt(r2);
  if (spec.nu == Scalar(0.5)) return exp(-r / ell) * r / (ell * ell);
  if (spec.nu == Scalar(1.5)) {
    const Scalar a = sqrt(Scalar(3)) * r / ell;
    return a * a * exp(-a) / ell;
  }
  const Scalar a = sqrt(Scalar(5)) * r / ell;
  return a * a * (Scalar(1) + a) * exp(-a) / (Scalar(3) * ell);
}

template <typename Scalar, typename DA, typename DB>
Scalar kernel_value(const KernelSpec<Scalar>& spec,
                    const Eigen::MatrixBase<DA>& x,
                    const Eigen::MatrixBase<DB>& x2) {
  if (spec.family == KernelFamily::linear) {
    return spec.output_scale * x.dot(x2);
  }
  return spec.output_scale * stationary_base(spec, (x - x2).squaredNorm());
}

template <typename Derived>
void require_points(const Eigen::MatrixBase<Derived>& X, const char* what) {
  if (X.rows() == 0) {
    throw Error(ErrorCode::invalid_argument,
                std::string(what) + ": empty input set");
  }
  if (!X.allFinite()) {
    throw Error(ErrorCode::invalid_argument,
                std::string(what) + ": non-finite input");
  }
}

}  // namespace detail

/// k(x, x2) for two column vectors.
template <typename Scalar, typename DA, typename DB>
Scalar kernel_eval(const KernelSpec<Scalar>& spec,
                   const Eigen::MatrixBase<DA>& x,
                   const Eigen::MatrixBase<DB>& x2) {
  static_assert(std::is_same_v<typename DA::Scalar, Scalar>);
  if (x.size() != x2.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "kernel_eval: dimension " + std::to_string(x.size()) +
                    " vs " + std::to_string(x2.size()));
  }
  if (!x.allFinite() || !x2.allFinite()) {
    throw Error(ErrorCode::invalid_argument, "kernel_eval: non-finite input");
  }
  return detail::kernel_value(spec, x, x2);
}

/// Gram matrix over the rows of X.
template <typename Scalar, typename Derived>
Matrix<Scalar> kernel_matrix(const KernelSpec<Scalar>& spec,
                             const Eigen::MatrixBase<Derived>& X) {
  static_assert(std::is_same_v<typename Derived::Scalar, Scalar>);
  detail::require_points(X, "kernel_matrix");
  const Eigen::Index n = X.rows();
  Matrix<Scalar> K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const Scalar v = detail::kernel_value(spec, X.row(i).transpose(),
                                            X.row(j).transpose());
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

/// Kernel values between every row of X and x_star.
template <typename Scalar, typename DX, typename DS>
Vector<Scalar> kernel_cross(const KernelSpec<Scalar>& spec,
                            const Eigen::MatrixBase<DX>& X,
                            const Eigen::MatrixBase<DS>& x_star) {
  static_assert(std::is_same_v<typename DX::Scalar, Scalar>);
  detail::require_points(X, "kernel_cross");
  if (X.cols() != x_star.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "kernel_cross: dimension " + std::to_string(x_star.size()) +
                    " vs " + std::to_string(X.cols()));
  }
  if (!x_star.allFinite()) {
    throw Error(ErrorCode::invalid_argument, "kernel_cross: non-finite input");
  }
  Vector<Scalar> k(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    k[i] = detail::kernel_value(spec, X.row(i).transpose(), x_star);
  }
  return k;
}

/// |A| x |B| block of kernel values between the rows of A and B.
template <typename Scalar, typename DA, typename DB>
Matrix<Scalar> kernel_cross_matrix(const KernelSpec<Scalar>& spec,
                                   const Eigen::MatrixBase<DA>& A,
                                   const Eigen::MatrixBase<DB>& B) {
  if (A.cols() != B.cols()) {
    throw Error(ErrorCode::dimension_mismatch,
                "kernel_cross_matrix: dimension mismatch");
  }
  Matrix<Scalar> K(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      K(i, j) = detail::kernel_value(spec, A.row(i).transpose(),
                                     B.row(j).transpose());
    }
  }
  return K;
}

/// Prior variance k(x, x) at every row of X.
template <typename Scalar, typename Derived>
Vector<Scalar> kernel_diagonal(const KernelSpec<Scalar>& spec,
                               const Eigen::MatrixBase<Derived>& X) {
  if (spec.stationary()) {
    return Vector<Scalar>::Constant(X.rows(), spec.output_scale);
  }
  return spec.output_scale * X.rowwise().squaredNorm();
}

/// Elementwise d K / d length_scale over the rows of X (zero for linear).
template <typename Scalar, typename Derived>
Matrix<Scalar> kernel_matrix_dlength(const KernelSpec<Scalar>& spec,
                                     const Eigen::MatrixBase<Derived>& X) {
  const Eigen::Index n = X.rows();
  Matrix<Scalar> D = Matrix<Scalar>::Zero(n, n);
  if (!spec.stationary()) return D;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const Scalar r2 = (X.row(i) - X.row(j)).squaredNorm();
      const Scalar v =
          spec.output_scale * detail::stationary_base_dell(spec, r2);
      D(i, j) = v;
      D(j, i) = v;
    }
  }
  return D;
}

}  // namespace activerank
