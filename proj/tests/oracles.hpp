#pragma once

// Brute-force reference implementations. Each one is written from the
// textbook definition with plain loops and a dense inverse, sharing no code
// with the library beyond its public types.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Family { rbf, matern, linear };

struct Hyper {
  Family family = Family::rbf;
  double ell = 0.5;
  double s2 = 1.0;
  double nu = 2.5;
};

inline double kernel(const Hyper& h, const VectorXd& a, const VectorXd& b) {
  double dot = 0.0, sq = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    sq += (a[i] - b[i]) * (a[i] - b[i]);
  }
  if (h.family == Family::linear) return h.s2 * dot;
  const double r = std::sqrt(sq);
  if (h.family == Family::rbf) return h.s2 * std::exp(-sq / (2.0 * h.ell * h.ell));
  if (h.nu == 0.5) return h.s2 * std::exp(-r / h.ell);
  if (h.nu == 1.5) {
    const double u = std::sqrt(3.0) * r / h.ell;
    return h.s2 * (1.0 + u) * std::exp(-u);
  }
  const double u = std::sqrt(5.0) * r / h.ell;
  return h.s2 * (1.0 + u + 5.0 * sq / (3.0 * h.ell * h.ell)) * std::exp(-u);
}

struct Posterior {
  double mu;
  double var;
};

/// Targets standardized by mean and population std (std 1 when constant);
/// mean k*^T (K + aI)^-1 z and variance k** - k*^T (K + aI)^-1 k*, both
/// mapped back to raw units.
inline Posterior posterior(const Hyper& h, const std::vector<VectorXd>& X,
                           const std::vector<double>& y, double alpha,
                           const VectorXd& x_star) {
  const std::size_t n = X.size();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= double(n);
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / double(n));
  if (!(sd > 1e-12)) sd = 1.0;

  MatrixXd K(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) K(i, j) = kernel(h, X[i], X[j]);
    K(i, i) += alpha;
  }
  const MatrixXd Kinv = K.inverse();
  VectorXd k(n), z(n);
  for (std::size_t i = 0; i < n; ++i) {
    k[i] = kernel(h, X[i], x_star);
    z[i] = (y[i] - mean) / sd;
  }
  const double mu = k.dot(Kinv * z);
  const double var = kernel(h, x_star, x_star) - k.dot(Kinv * k);
  return {sd * mu + mean, sd * sd * var};
}

/// Linear-gain NDCG@k from a ranked list of grades and the full judged pool.
inline double ndcg(const std::vector<int>& ranked_grades,
                   std::vector<int> pool_grades, std::size_t k) {
  double dcg = 0.0;
  for (std::size_t i = 0; i < ranked_grades.size() && i < k; ++i) {
    dcg += double(ranked_grades[i]) / std::log2(double(i) + 2.0);
  }
  std::sort(pool_grades.rbegin(), pool_grades.rend());
  double idcg = 0.0;
  for (std::size_t i = 0; i < pool_grades.size() && i < k; ++i) {
    idcg += double(pool_grades[i]) / std::log2(double(i) + 2.0);
  }
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

inline double recall(const std::vector<int>& ranked_grades,
                     const std::vector<int>& pool_grades, std::size_t k,
                     int threshold) {
  int total = 0, hits = 0;
  for (int g : pool_grades) total += g >= threshold;
  for (std::size_t i = 0; i < ranked_grades.size() && i < k; ++i) {
    hits += ranked_grades[i] >= threshold;
  }
  return total ? double(hits) / double(total) : 0.0;
}

inline double expected_relevance(const std::vector<double>& logits) {
  double top = logits[0];
  for (double z : logits) top = std::max(top, z);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double w = std::exp(logits[k] - top);
    num += double(k) * w;
    den += w;
  }
  return num / den;
}

struct MonteCarlo {
  double mean;
  double standard_error;
};

/// E[max(f - f* - xi, 0)] for f ~ N(mu, sigma^2) by sampling.
inline MonteCarlo expected_improvement(double mu, double sigma, double f_star,
                                       double xi, std::size_t samples,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(mu, sigma);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double gain = std::max(normal(rng) - f_star - xi, 0.0);
    sum += gain;
    sum_sq += gain * gain;
  }
  const double mean = sum / double(samples);
  const double var = sum_sq / double(samples) - mean * mean;
  return {mean, std::sqrt(std::max(var, 0.0) / double(samples))};
}

}  // namespace oracle
