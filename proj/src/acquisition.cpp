#include "activerank/acquisition.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "activerank/rng.hpp"

namespace activerank {

namespace {

void require_finite(const PosteriorStats<double>& s, const char* what) {
  if (!std::isfinite(s.mu) || !std::isfinite(s.sigma)) {
    throw Error(ErrorCode::invalid_argument,
                std::string(what) + ": non-finite posterior stats");
  }
  if (s.sigma < 0.0) {
    throw Error(ErrorCode::invalid_argument,
                std::string(what) + ": negative sigma");
  }
}

std::vector<std::size_t> unlabeled_rows(const std::vector<bool>& labeled) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    if (!labeled[i]) out.push_back(i);
  }
  return out;
}

}  // namespace

std::string_view to_string(AcquisitionKind kind) {
  switch (kind) {
    case AcquisitionKind::ucb: return "ucb";
    case AcquisitionKind::pi: return "pi";
    case AcquisitionKind::ei: return "ei";
    case AcquisitionKind::ts: return "ts";
    case AcquisitionKind::random: return "random";
    case AcquisitionKind::dense: return "dense";
  }
  return "unknown";
}

AcquisitionKind parse_acquisition_kind(std::string_view name) {
  for (auto k : {AcquisitionKind::ucb, AcquisitionKind::pi, AcquisitionKind::ei,
                 AcquisitionKind::ts, AcquisitionKind::random,
                 AcquisitionKind::dense}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::invalid_argument,
              "unknown acquisition '" + std::string(name) + "'");
}

void AcquisitionSpec::validate() const {
  if (!std::isfinite(beta) || beta < 0.0) {
    throw Error(ErrorCode::invalid_argument, "beta must be finite and >= 0");
  }
  if (!std::isfinite(xi) || xi < 0.0) {
    throw Error(ErrorCode::invalid_argument, "xi must be finite and >= 0");
  }
  if (ts_candidate_cap < 1) {
    throw Error(ErrorCode::invalid_argument, "ts_candidate_cap must be >= 1");
  }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double score_ucb(const PosteriorStats<double>& stats, double beta) {
  require_finite(stats, "score_ucb");
  if (!(beta > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "score_ucb: beta must be > 0");
  }
  return stats.mu + std::sqrt(beta) * stats.sigma;
}

double score_pi(const PosteriorStats<double>& stats, double f_star, double xi) {
  require_finite(stats, "score_pi");
  if (!std::isfinite(f_star) || !std::isfinite(xi)) {
    throw Error(ErrorCode::invalid_argument, "score_pi: non-finite input");
  }
  const double gap = stats.mu - f_star - xi;
  if (stats.sigma == 0.0) return gap > 0.0 ? 1.0 : 0.0;
  return normal_cdf(gap / stats.sigma);
}

double score_ei(const PosteriorStats<double>& stats, double f_star, double xi) {
  require_finite(stats, "score_ei");
  if (!std::isfinite(f_star) || !std::isfinite(xi)) {
    throw Error(ErrorCode::invalid_argument, "score_ei: non-finite input");
  }
  const double gap = stats.mu - f_star - xi;
  if (stats.sigma == 0.0) return gap > 0.0 ? gap : 0.0;
  const double z = gap / stats.sigma;
  return std::max(0.0, gap * normal_cdf(z) + stats.sigma * normal_pdf(z));
}

double best_observed(const FittedGP<double>& gp,
                     const ObservationSet<double>& obs, bool include_query) {
  if (Eigen::Index(obs.size()) != gp.size()) {
    throw Error(ErrorCode::invalid_argument,
                "best_observed: observation set does not match the fitted GP");
  }
  double best = -std::numeric_limits<double>::infinity();
  const auto& y = gp.standardized_targets();
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].is_query && !include_query) continue;
    best = std::max(best, y[Eigen::Index(i)]);
  }
  if (!std::isfinite(best)) {
    // Only the pseudo-observation exists and it is excluded.
    best = y.maxCoeff();
  }
  return best;
}

std::vector<std::size_t> ts_candidates(const Vector<double>& posterior_mean,
                                       const std::vector<bool>& labeled,
                                       std::size_t cap, std::uint64_t seed) {
  std::vector<std::size_t> pool = unlabeled_rows(labeled);
  if (pool.size() <= cap) return pool;

  const std::size_t top_k = cap - cap / 2;
  std::vector<std::size_t> by_mean = pool;
  std::partial_sort(by_mean.begin(), by_mean.begin() + std::ptrdiff_t(top_k),
                    by_mean.end(), [&](std::size_t a, std::size_t b) {
                      const double ma = posterior_mean[Eigen::Index(a)];
                      const double mb = posterior_mean[Eigen::Index(b)];
                      if (ma != mb) return ma > mb;
                      return a < b;
                    });
  std::vector<std::size_t> chosen(by_mean.begin(),
                                  by_mean.begin() + std::ptrdiff_t(top_k));
  std::vector<std::size_t> rest(by_mean.begin() + std::ptrdiff_t(top_k),
                                by_mean.end());
  std::sort(rest.begin(), rest.end());

  // Partial Fisher-Yates over the remainder.
  auto rng = make_rng(seed, RngStream::acquisition, 0x75u);
  const std::size_t extra = std::min(cap - top_k, rest.size());
  for (std::size_t i = 0; i < extra; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, rest.size() - 1);
    std::swap(rest[i], rest[pick(rng)]);
    chosen.push_back(rest[i]);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::size_t select_ts(const FittedGP<double>& gp, const CorpusIndex& corpus,
                      std::span<const std::size_t> candidates,
                      std::uint64_t seed, double* sampled_value) {
  if (candidates.empty()) {
    throw Error(ErrorCode::empty_pool, "select_ts: no candidates");
  }
  const auto m = Eigen::Index(candidates.size());
  RowMatrixXd C(m, corpus.dim());
  for (Eigen::Index i = 0; i < m; ++i) {
    C.row(i) = corpus.vectors().row(Eigen::Index(candidates[std::size_t(i)]));
  }
  const MatrixXd Kc = kernel_cross_matrix(gp.spec(), gp.inputs(), C);
  const MatrixXd V = gp.llt().matrixL().solve(Kc);
  const VectorXd mean = Kc.transpose() * gp.solve_cache();
  MatrixXd cov = kernel_matrix(gp.spec(), C) - V.transpose() * V;
  cov.diagonal().array() += kInitialJitter;

  // LDLT with pivoting tolerates the near-singular covariances that show
  // up between close candidates; negative pivots from round-off are
  // clamped to zero.
  Eigen::LDLT<MatrixXd> ldlt(cov);
  if (ldlt.info() != Eigen::Success) {
    throw Error(ErrorCode::numerical,
                "select_ts: posterior covariance factorization failed");
  }
  auto rng = make_rng(seed, RngStream::acquisition, 0x7473u);
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd z(m);
  for (Eigen::Index i = 0; i < m; ++i) z[i] = normal(rng);
  const VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  const MatrixXd L = ldlt.matrixL();
  const VectorXd sample =
      mean + ldlt.transpositionsP().transpose() * (L * d.cwiseProduct(z));

  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < m; ++i) {
    if (sample[i] > sample[best]) best = i;
  }
  if (sampled_value) *sampled_value = sample[best];
  return candidates[std::size_t(best)];
}

Selection select_next(const FittedGP<double>& gp, const CorpusIndex& pool,
                      const std::vector<bool>& labeled,
                      const AcquisitionSpec& spec,
                      std::span<const std::size_t> dense_order, double f_star,
                      std::uint64_t step) {
  spec.validate();
  if (labeled.size() != pool.size()) {
    throw Error(ErrorCode::invalid_argument,
                "select_next: labeled mask does not match pool size");
  }
  const auto unlabeled = unlabeled_rows(labeled);
  if (unlabeled.empty()) {
    throw Error(ErrorCode::empty_pool, "no unlabeled passages remain");
  }

  switch (spec.kind) {
    case AcquisitionKind::random: {
      auto rng = make_rng(spec.rng_seed, RngStream::acquisition, step);
      std::uniform_int_distribution<std::size_t> pick(0, unlabeled.size() - 1);
      return {unlabeled[pick(rng)], 0.0};
    }
    case AcquisitionKind::dense: {
      for (std::size_t idx : dense_order) {
        if (idx < labeled.size() && !labeled[idx]) return {idx, 0.0};
      }
      throw Error(ErrorCode::empty_pool,
                  "dense order has no unlabeled passage left");
    }
    default:
      break;
  }

  const auto post = predict_rows(gp, pool.vectors());
  if (spec.kind == AcquisitionKind::ts) {
    const std::uint64_t seed = derive_seed(spec.rng_seed, RngStream::acquisition, step);
    const auto cands =
        ts_candidates(post.mu, labeled, spec.ts_candidate_cap, seed);
    double value = 0.0;
    const std::size_t idx = select_ts(gp, pool, cands, seed, &value);
    return {idx, value};
  }

  const auto& z = gp.standardization();
  const double beta = spec.effective_beta();
  Selection best{unlabeled.front(), -std::numeric_limits<double>::infinity()};
  for (std::size_t idx : unlabeled) {
    const auto r = Eigen::Index(idx);
    double value = 0.0;
    if (spec.kind == AcquisitionKind::ucb) {
      value = score_ucb({post.mu[r], post.sigma[r]}, beta);
    } else {
      const PosteriorStats<double> standardized{z.apply(post.mu[r]),
                                                post.sigma[r] / z.std};
      value = spec.kind == AcquisitionKind::pi
                  ? score_pi(standardized, f_star, spec.xi)
                  : score_ei(standardized, f_star, spec.xi);
    }
    if (value > best.value) best = {idx, value};
  }
  return best;
}

}  // namespace activerank
