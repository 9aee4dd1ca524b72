#pragma once

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "activerank/corpus.hpp"
#include "activerank/kernels.hpp"
#include "activerank/types.hpp"

namespace activerank {

inline constexpr std::string_view kQueryObservationId = "QUERY";

template <typename Scalar = double>
struct Observation {
  std::string id;
  Vector<Scalar> x;
  Scalar y = Scalar(0);
  bool is_query = false;
};

/// Append-only labeled set in acquisition order. Passage ids are unique;
/// at most one query pseudo-observation is allowed.
template <typename Scalar = double>
class ObservationSet {
 public:
  void append(Observation<Scalar> obs) {
    using std::isfinite;
    if (!isfinite(obs.y)) {
      throw Error(ErrorCode::invalid_argument,
                  "non-finite target for id=" + obs.id);
    }
    if (!obs.x.allFinite()) {
      throw Error(ErrorCode::invalid_argument,
                  "non-finite embedding for id=" + obs.id);
    }
    if (!observations_.empty() && obs.x.size() != dim()) {
      throw Error(ErrorCode::dimension_mismatch,
                  "observation dimension mismatch at id=" + obs.id);
    }
    if (obs.is_query) {
      if (has_query_) {
        throw Error(ErrorCode::duplicate_id,
                    "observation set already holds a query pseudo-observation");
      }
      has_query_ = true;
    } else if (!ids_.insert(obs.id).second) {
      throw Error(ErrorCode::duplicate_id, "duplicate observation id " + obs.id);
    }
    observations_.push_back(std::move(obs));
  }

  std::size_t size() const { return observations_.size(); }
  bool empty() const { return observations_.empty(); }
  Eigen::Index dim() const {
    return observations_.empty() ? 0 : observations_.front().x.size();
  }
  bool contains(const std::string& id) const { return ids_.count(id) != 0; }
  bool contains_query_pseudo() const { return has_query_; }

  const Observation<Scalar>& operator[](std::size_t i) const {
    return observations_[i];
  }
  auto begin() const { return observations_.begin(); }
  auto end() const { return observations_.end(); }

  RowMatrix<Scalar> inputs() const {
    RowMatrix<Scalar> X(Eigen::Index(size()), dim());
    for (std::size_t i = 0; i < size(); ++i) {
      X.row(Eigen::Index(i)) = observations_[i].x.transpose();
    }
    return X;
  }

  Vector<Scalar> targets() const {
    Vector<Scalar> y(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i) y[Eigen::Index(i)] = observations_[i].y;
    return y;
  }

 private:
  std::vector<Observation<Scalar>> observations_;
  std::unordered_set<std::string> ids_;
  bool has_query_ = false;
};

/// Zero-mean, unit-variance (population) transform of the raw targets.
template <typename Scalar = double>
struct Standardization {
  Scalar mean = Scalar(0);
  Scalar std = Scalar(1);

  static Standardization fit(const Vector<Scalar>& y) {
    using std::sqrt;
    if (y.size() == 0) {
      throw Error(ErrorCode::invalid_argument, "standardization of no targets");
    }
    if (y.maxCoeff() == y.minCoeff()) return {y[0], Scalar(1)};
    const Scalar mean = y.mean();
    const Scalar var = (y.array() - mean).square().mean();
    const Scalar sd = sqrt(var);
    if (!(sd > Scalar(0))) return {mean, Scalar(1)};
    return {mean, sd};
  }

  Scalar apply(Scalar y) const { return (y - mean) / std; }
  Scalar invert(Scalar z) const { return std * z + mean; }
  Vector<Scalar> apply(const Vector<Scalar>& y) const {
    return ((y.array() - mean) / std).matrix();
  }
};

template <typename Scalar = double>
struct PosteriorStats {
  Scalar mu = Scalar(0);
  Scalar sigma = Scalar(0);
};

/// Exact GP posterior state: Cholesky factor of K + (alpha + jitter) I over
/// the standardized targets.
template <typename Scalar = double>
class FittedGP {
 public:
  const KernelSpec<Scalar>& spec() const { return spec_; }
  Scalar alpha() const { return alpha_; }
  Scalar jitter() const { return jitter_; }
  const Standardization<Scalar>& standardization() const { return stdz_; }
  const RowMatrix<Scalar>& inputs() const { return X_; }
  const Vector<Scalar>& standardized_targets() const { return y_; }
  const Vector<Scalar>& solve_cache() const { return cache_; }
  Matrix<Scalar> cholesky_factor() const { return llt_.matrixL(); }
  const Eigen::LLT<Matrix<Scalar>>& llt() const { return llt_; }
  Eigen::Index size() const { return X_.rows(); }
  Eigen::Index dim() const { return X_.cols(); }

  template <typename S>
  friend FittedGP<S> fit(const ObservationSet<S>&, const KernelSpec<S>&, S);

 private:
  KernelSpec<Scalar> spec_;
  Scalar alpha_ = Scalar(0);
  Scalar jitter_ = Scalar(0);
  Standardization<Scalar> stdz_;
  RowMatrix<Scalar> X_;
  Vector<Scalar> y_;
  Vector<Scalar> cache_;
  Eigen::LLT<Matrix<Scalar>> llt_;
};

inline constexpr double kInitialJitter = 1e-9;
inline constexpr double kMaxJitter = 1e-5;

template <typename Scalar>
struct Factorization {
  Eigen::LLT<Matrix<Scalar>> llt;
  Scalar jitter;
};

/// Cholesky of K + alpha I. Retries with diagonal jitter starting at 1e-9
/// and doubling while it stays <= 1e-5; a factor is accepted only if it
/// reconstructs the matrix to 1e-8 relative Frobenius error.
template <typename Scalar>
Factorization<Scalar> factor_with_jitter(const Matrix<Scalar>& K,
                                         Scalar alpha) {
  using std::isfinite;
  const Eigen::Index n = K.rows();
  auto attempt = [&](Scalar jitter) -> std::optional<Eigen::LLT<Matrix<Scalar>>> {
    Matrix<Scalar> A = K;
    A.diagonal().array() += alpha + jitter;
    Eigen::LLT<Matrix<Scalar>> llt(A);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const Matrix<Scalar> L = llt.matrixL();
    if (!L.allFinite() || !(L.diagonal().minCoeff() > Scalar(0))) {
      return std::nullopt;
    }
    const Scalar scale = A.norm();
    if (scale > Scalar(0) &&
        (L * L.transpose() - A).norm() > Scalar(1e-8) * scale) {
      return std::nullopt;
    }
    return llt;
  };
  if (auto llt = attempt(Scalar(0))) return {std::move(*llt), Scalar(0)};
  for (Scalar jitter = Scalar(kInitialJitter); jitter <= Scalar(kMaxJitter);
       jitter *= Scalar(2)) {
    if (auto llt = attempt(jitter)) return {std::move(*llt), jitter};
  }
  const Scalar max_diag = K.diagonal().maxCoeff();
  throw Error(ErrorCode::numerical,
              "Cholesky factorization failed at max jitter 1e-5 (n=" +
                  std::to_string(n) + ", alpha=" + std::to_string(double(alpha)) +
                  ", max diagonal=" + std::to_string(double(max_diag)) + ")");
}

template <typename Scalar>
FittedGP<Scalar> fit(const ObservationSet<Scalar>& obs,
                     const KernelSpec<Scalar>& spec, Scalar alpha) {
  if (obs.empty()) {
    throw Error(ErrorCode::invalid_argument, "fit: empty observation set");
  }
  if (!(alpha >= Scalar(0))) {
    throw Error(ErrorCode::invalid_argument, "fit: alpha must be >= 0");
  }
  spec.validate();
  FittedGP<Scalar> gp;
  gp.spec_ = spec;
  gp.alpha_ = alpha;
  gp.X_ = obs.inputs();
  const Vector<Scalar> y = obs.targets();
  gp.stdz_ = Standardization<Scalar>::fit(y);
  gp.y_ = gp.stdz_.apply(y);
  auto factor = factor_with_jitter(kernel_matrix(spec, gp.X_), alpha);
  gp.llt_ = std::move(factor.llt);
  gp.jitter_ = factor.jitter;
  gp.cache_ = gp.llt_.solve(gp.y_);
  return gp;
}

/// Posterior in standardized target units.
template <typename Scalar, typename Derived>
PosteriorStats<Scalar> predict_standardized(const FittedGP<Scalar>& gp,
                                            const Eigen::MatrixBase<Derived>& x_star) {
  using std::sqrt;
  const Vector<Scalar> k = kernel_cross(gp.spec(), gp.inputs(), x_star);
  const Scalar mu = k.dot(gp.solve_cache());
  const Vector<Scalar> v = gp.llt().matrixL().solve(k);
  const Scalar prior = detail::kernel_value(gp.spec(), x_star, x_star);
  const Scalar var = std::max(prior - v.squaredNorm(), Scalar(0));
  return {mu, sqrt(var)};
}

/// Posterior mean and standard deviation in raw score units.
template <typename Scalar, typename Derived>
PosteriorStats<Scalar> predict(const FittedGP<Scalar>& gp,
                               const Eigen::MatrixBase<Derived>& x_star) {
  const auto s = predict_standardized(gp, x_star);
  const auto& z = gp.standardization();
  return {z.invert(s.mu), z.std * s.sigma};
}

template <typename Scalar = double>
struct BatchPosterior {
  Vector<Scalar> mu;     // raw score units
  Vector<Scalar> sigma;  // raw score units
};

/// Vectorized predict over the rows of Xq, processed in row blocks.
template <typename Scalar, typename Derived>
BatchPosterior<Scalar> predict_rows(const FittedGP<Scalar>& gp,
                                    const Eigen::MatrixBase<Derived>& Xq,
                                    Eigen::Index block = 2048) {
  if (Xq.cols() != gp.dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "predict: dimension " + std::to_string(Xq.cols()) + " vs " +
                    std::to_string(gp.dim()));
  }
  const auto& z = gp.standardization();
  BatchPosterior<Scalar> out{Vector<Scalar>(Xq.rows()),
                             Vector<Scalar>(Xq.rows())};
  for (Eigen::Index start = 0; start < Xq.rows(); start += block) {
    const Eigen::Index len = std::min(block, Xq.rows() - start);
    const auto rows = Xq.middleRows(start, len);
    const Matrix<Scalar> Kc = kernel_cross_matrix(gp.spec(), gp.inputs(), rows);
    const Matrix<Scalar> V = gp.llt().matrixL().solve(Kc);
    const Vector<Scalar> prior = kernel_diagonal(gp.spec(), rows);
    const Vector<Scalar> mu = Kc.transpose() * gp.solve_cache();
    const Vector<Scalar> var =
        (prior - V.colwise().squaredNorm().transpose()).cwiseMax(Scalar(0));
    out.mu.segment(start, len) = (z.std * mu.array() + z.mean).matrix();
    out.sigma.segment(start, len) = z.std * var.cwiseSqrt();
  }
  return out;
}

struct PoolPrediction {
  std::size_t index;
  PosteriorStats<double> stats;
};

/// Posterior for every pool passage not named in `exclude`, in pool order.
std::vector<PoolPrediction> predict_batch(
    const FittedGP<double>& gp, const CorpusIndex& pool,
    const std::unordered_set<std::string>& exclude = {});

}  // namespace activerank
