#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "activerank/gp.hpp"

namespace activerank {

/// MAP fit settings. The length scale has a uniform prior on its bounds;
/// the output scale has a Gamma(shape, rate) prior and is searched in log
/// space inside [min_output_scale, max_output_scale]. Steps use Adam with
/// the given learning rate and moment decay rates.
template <typename Scalar = double>
struct HyperOptConfig {
  Scalar learning_rate = Scalar(0.01);
  int max_steps = 50;
  Scalar grad_tolerance = Scalar(1e-5);
  Scalar min_length_scale = Scalar(kMinLengthScale);
  Scalar max_length_scale = Scalar(kMaxLengthScale);
  Scalar output_scale_shape = Scalar(2);
  Scalar output_scale_rate = Scalar(2);
  Scalar min_output_scale = Scalar(1e-4);
  Scalar max_output_scale = Scalar(1e4);
  Scalar adam_beta1 = Scalar(0.9);
  Scalar adam_beta2 = Scalar(0.999);
  Scalar adam_epsilon = Scalar(1e-8);

  void validate() const {
    if (!(learning_rate > Scalar(0)) || max_steps < 1 ||
        !(grad_tolerance >= Scalar(0))) {
      throw Error(ErrorCode::invalid_argument,
                  "hyperopt: learning_rate > 0, max_steps >= 1 required");
    }
    if (!(min_length_scale < max_length_scale) ||
        !(min_output_scale < max_output_scale) ||
        !(min_length_scale > Scalar(0)) || !(min_output_scale > Scalar(0))) {
      throw Error(ErrorCode::invalid_argument, "hyperopt: bounds out of order");
    }
    if (!(adam_beta1 >= Scalar(0) && adam_beta1 < Scalar(1)) ||
        !(adam_beta2 >= Scalar(0) && adam_beta2 < Scalar(1)) ||
        !(adam_epsilon > Scalar(0))) {
      throw Error(ErrorCode::invalid_argument, "hyperopt: bad Adam moments");
    }
    if (!(output_scale_shape > Scalar(0)) || !(output_scale_rate > Scalar(0))) {
      throw Error(ErrorCode::invalid_argument,
                  "hyperopt: gamma prior parameters must be positive");
    }
  }
};

/// Objective value and its gradient with respect to
/// (length_scale, log output_scale).
template <typename Scalar = double>
struct MapObjective {
  Scalar value = Scalar(0);
  Eigen::Matrix<Scalar, 2, 1> gradient = Eigen::Matrix<Scalar, 2, 1>::Zero();
};

template <typename Scalar>
Scalar log_hyperprior(const KernelSpec<Scalar>& spec,
                      const HyperOptConfig<Scalar>& cfg) {
  using std::log;
  if (!(spec.length_scale >= cfg.min_length_scale &&
        spec.length_scale <= cfg.max_length_scale) ||
      !(spec.output_scale > Scalar(0))) {
    return -std::numeric_limits<Scalar>::infinity();
  }
  const Scalar a = cfg.output_scale_shape;
  const Scalar b = cfg.output_scale_rate;
  const Scalar s2 = spec.output_scale;
  return -log(cfg.max_length_scale - cfg.min_length_scale) + a * log(b) -
         Scalar(std::lgamma(double(a))) + (a - Scalar(1)) * log(s2) - b * s2;
}

/// Log marginal likelihood of the standardized targets plus log priors.
/// Returns -inf (zero gradient) outside the prior support.
template <typename Scalar>
MapObjective<Scalar> log_map_objective_with_gradient(
    const ObservationSet<Scalar>& obs, const KernelSpec<Scalar>& spec,
    Scalar alpha, const HyperOptConfig<Scalar>& cfg = {}) {
  using std::log;
  if (obs.empty()) {
    throw Error(ErrorCode::invalid_argument, "objective: empty observation set");
  }
  MapObjective<Scalar> out;
  const Scalar prior = log_hyperprior(spec, cfg);
  if (!std::isfinite(double(prior))) {
    out.value = -std::numeric_limits<Scalar>::infinity();
    return out;
  }
  const RowMatrix<Scalar> X = obs.inputs();
  const Vector<Scalar> y =
      Standardization<Scalar>::fit(obs.targets()).apply(obs.targets());
  const Matrix<Scalar> K = kernel_matrix(spec, X);
  const auto factor = factor_with_jitter(K, alpha);
  const Eigen::Index n = X.rows();
  const Vector<Scalar> a = factor.llt.solve(y);
  const Matrix<Scalar> L = factor.llt.matrixL();
  const Scalar log_det_half = L.diagonal().array().log().sum();
  out.value = Scalar(-0.5) * y.dot(a) - log_det_half -
              Scalar(0.5) * Scalar(n) * log(Scalar(2) * std::numbers::pi_v<Scalar>) +
              prior;

  // d/dθ log p(y) = ½ aᵀ (dK/dθ) a − ½ tr(W dK/dθ), W = (K + αI)^-1.
  const Matrix<Scalar> W = factor.llt.solve(Matrix<Scalar>::Identity(n, n));
  const Matrix<Scalar> inner = a * a.transpose() - W;
  const Matrix<Scalar> dK_dell = kernel_matrix_dlength(spec, X);
  out.gradient[0] = Scalar(0.5) * inner.cwiseProduct(dK_dell).sum();
  out.gradient[1] = Scalar(0.5) * inner.cwiseProduct(K).sum() +
                    (cfg.output_scale_shape - Scalar(1)) -
                    cfg.output_scale_rate * spec.output_scale;
  return out;
}

template <typename Scalar>
Scalar log_map_objective(const ObservationSet<Scalar>& obs,
                         const KernelSpec<Scalar>& spec, Scalar alpha,
                         const HyperOptConfig<Scalar>& cfg = {}) {
  return log_map_objective_with_gradient(obs, spec, alpha, cfg).value;
}

/// Projected Adam ascent on (length_scale, log output_scale) from `start`.
/// Each step moves a coordinate by at most about learning_rate, whatever the
/// gradient magnitude. Returns the best spec visited, so the objective never
/// ends below its starting value.
template <typename Scalar>
KernelSpec<Scalar> optimize_hyperparameters(const ObservationSet<Scalar>& obs,
                                            const KernelSpec<Scalar>& start,
                                            Scalar alpha,
                                            const HyperOptConfig<Scalar>& cfg = {}) {
  using std::exp;
  using std::log;
  if (obs.size() < 2) {
    throw Error(ErrorCode::invalid_argument,
                "optimize_hyperparameters: need at least 2 observations");
  }
  cfg.validate();
  start.validate();

  auto evaluate = [&](const KernelSpec<Scalar>& spec) {
    auto obj = log_map_objective_with_gradient(obs, spec, alpha, cfg);
    if (!std::isfinite(double(obj.value)) || !obj.gradient.allFinite()) {
      std::ostringstream msg;
      msg << "non-finite MAP objective at length_scale=" << double(spec.length_scale)
          << ", output_scale=" << double(spec.output_scale);
      throw Error(ErrorCode::numerical, msg.str());
    }
    return obj;
  };

  KernelSpec<Scalar> current = start;
  current.length_scale =
      std::clamp(current.length_scale, cfg.min_length_scale, cfg.max_length_scale);
  current.output_scale =
      std::clamp(current.output_scale, cfg.min_output_scale, cfg.max_output_scale);
  auto obj = evaluate(current);
  KernelSpec<Scalar> best = current;
  Scalar best_value = obj.value;

  const Scalar lo_log = log(cfg.min_output_scale);
  const Scalar hi_log = log(cfg.max_output_scale);
  Eigen::Matrix<Scalar, 2, 1> m = Eigen::Matrix<Scalar, 2, 1>::Zero();
  Eigen::Matrix<Scalar, 2, 1> v = Eigen::Matrix<Scalar, 2, 1>::Zero();
  Scalar b1_pow = Scalar(1);
  Scalar b2_pow = Scalar(1);
  for (int step = 0; step < cfg.max_steps; ++step) {
    if (obj.gradient.norm() < cfg.grad_tolerance) break;
    m = cfg.adam_beta1 * m + (Scalar(1) - cfg.adam_beta1) * obj.gradient;
    v = cfg.adam_beta2 * v +
        (Scalar(1) - cfg.adam_beta2) * obj.gradient.cwiseProduct(obj.gradient);
    b1_pow *= cfg.adam_beta1;
    b2_pow *= cfg.adam_beta2;
    const Eigen::Matrix<Scalar, 2, 1> m_hat = m / (Scalar(1) - b1_pow);
    const Eigen::Matrix<Scalar, 2, 1> v_hat = v / (Scalar(1) - b2_pow);
    const Eigen::Matrix<Scalar, 2, 1> delta =
        cfg.learning_rate *
        m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + cfg.adam_epsilon).matrix());

    KernelSpec<Scalar> next = current;
    if (current.stationary()) {
      next.length_scale = std::clamp(current.length_scale + delta[0],
                                     cfg.min_length_scale, cfg.max_length_scale);
    }
    const Scalar log_s2 =
        std::clamp(log(current.output_scale) + delta[1], lo_log, hi_log);
    next.output_scale = exp(log_s2);
    current = next;
    obj = evaluate(current);
    if (obj.value > best_value) {
      best_value = obj.value;
      best = current;
    }
  }
  return best;
}

}  // namespace activerank
