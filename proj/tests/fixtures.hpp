#pragma once

#include <random>
#include <string>
#include <vector>

#include "activerank/corpus.hpp"
#include "activerank/gp.hpp"
#include "activerank/harness.hpp"
#include "oracles.hpp"

namespace fixtures {

using activerank::KernelFamily;
using activerank::KernelSpec;
using activerank::ObservationSet;
using activerank::VectorXd;

inline VectorXd random_vector(Eigen::Index d, std::mt19937_64& rng, double lo = -1.0,
                              double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = u(rng);
  return v;
}

inline ObservationSet<double> random_observations(std::size_t n, Eigen::Index d,
                                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> y(0.0, 3.0);
  ObservationSet<double> obs;
  for (std::size_t i = 0; i < n; ++i) {
    obs.append({"p" + std::to_string(i), random_vector(d, rng), y(rng), false});
  }
  return obs;
}

inline oracle::Hyper to_oracle(const KernelSpec<double>& spec) {
  const auto family = spec.family == KernelFamily::rbf      ? oracle::Family::rbf
                      : spec.family == KernelFamily::matern ? oracle::Family::matern
                                                            : oracle::Family::linear;
  return {family, spec.length_scale, spec.output_scale, spec.nu};
}

inline std::vector<KernelSpec<double>> all_kernels(double ell = 0.7, double s2 = 1.3) {
  return {{KernelFamily::rbf, ell, s2, 2.5},
          {KernelFamily::matern, ell, s2, 0.5},
          {KernelFamily::matern, ell, s2, 1.5},
          {KernelFamily::matern, ell, s2, 2.5},
          {KernelFamily::linear, ell, s2, 2.5}};
}

/// Small landscape that keeps engine tests fast.
inline activerank::LandscapeSpec small_landscape(std::uint64_t seed) {
  auto spec = activerank::standard_landscape(seed);
  spec.dim = 8;
  spec.n_passages = 300;
  spec.background_topics = 6;
  spec.components[0].cluster_size = 15;
  spec.components[1].cluster_size = 15;
  spec.components[2].cluster_size = 15;
  return spec;
}

}  // namespace fixtures
