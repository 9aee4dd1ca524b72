#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "activerank/corpus.hpp"
#include "activerank/gp.hpp"

namespace activerank {

enum class AcquisitionKind { ucb, pi, ei, ts, random, dense };

std::string_view to_string(AcquisitionKind kind);
AcquisitionKind parse_acquisition_kind(std::string_view name);

inline constexpr double kMinBeta = 1e-12;

struct AcquisitionSpec {
  AcquisitionKind kind = AcquisitionKind::ucb;
  double beta = 2.0;  // floored at kMinBeta
  double xi = 0.0;
  std::size_t ts_candidate_cap = 2048;
  std::uint64_t rng_seed = 0;
  // Whether the query pseudo-observation counts toward the incumbent f*.
  bool include_query_in_best = true;

  void validate() const;
  double effective_beta() const { return beta < kMinBeta ? kMinBeta : beta; }
};

double normal_cdf(double z);
double normal_pdf(double z);

double score_ucb(const PosteriorStats<double>& stats, double beta);
double score_pi(const PosteriorStats<double>& stats, double f_star, double xi);
double score_ei(const PosteriorStats<double>& stats, double f_star, double xi);

/// Incumbent f* in standardized units over the observations the GP was
/// fitted on.
double best_observed(const FittedGP<double>& gp,
                     const ObservationSet<double>& obs, bool include_query);

/// Thompson candidate subset: top half of the cap by posterior mean plus a
/// uniform sample of the remaining unlabeled passages, returned in pool
/// order. Every unlabeled passage is a candidate when they fit in the cap.
std::vector<std::size_t> ts_candidates(const Vector<double>& posterior_mean,
                                       const std::vector<bool>& labeled,
                                       std::size_t cap, std::uint64_t seed);

/// Draws one joint posterior sample over the candidates and returns the
/// candidate with the largest sampled value (earliest wins ties).
std::size_t select_ts(const FittedGP<double>& gp, const CorpusIndex& corpus,
                      std::span<const std::size_t> candidates,
                      std::uint64_t seed, double* sampled_value = nullptr);

struct Selection {
  std::size_t index;
  double value;  // acquisition value; 0 for random and dense
};

/// Picks the next unlabeled passage. `labeled` is a mask over pool rows.
/// `step` decorrelates the random streams of successive calls.
Selection select_next(const FittedGP<double>& gp, const CorpusIndex& pool,
                      const std::vector<bool>& labeled,
                      const AcquisitionSpec& spec,
                      std::span<const std::size_t> dense_order, double f_star,
                      std::uint64_t step = 0);

}  // namespace activerank
