#include <random>
#include <set>

#include "doctest.h"

#include "activerank/acquisition.hpp"
#include "fixtures.hpp"

using namespace activerank;

namespace {

struct Pool {
  CorpusIndex corpus;
  FittedGP<double> gp;
  ObservationSet<double> obs;
  std::vector<bool> labeled;
  std::vector<std::size_t> dense;
};

Pool make_pool(std::uint64_t seed, std::size_t n = 60) {
  std::mt19937_64 rng(seed);
  RowMatrixXd X(static_cast<Eigen::Index>(n), 3);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    X.row(Eigen::Index(i)) = fixtures::random_vector(3, rng);
    ids.push_back("p" + std::to_string(i));
  }
  Pool p{CorpusIndex(ids, X), {}, {}, std::vector<bool>(n, false), {}};
  for (std::size_t i = 0; i < 6; ++i) {
    const VectorXd x = p.corpus.embedding(i * 7);
    p.obs.append({p.corpus.id(i * 7), x, std::sin(3 * x[0]) + x[1], false});
    p.labeled[i * 7] = true;
  }
  p.gp = fit(p.obs, KernelSpec<double>{KernelFamily::rbf, 0.5, 1.0, 2.5}, 1e-3);
  p.dense = dense_order(p.corpus, VectorXd::Unit(3, 0));
  return p;
}

}  // namespace

TEST_SUITE("acquisition") {

TEST_CASE("normal cdf and pdf reference values") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(normal_cdf(-8.0) == doctest::Approx(6.22096057427e-16).epsilon(1e-6));
  CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327));
}

TEST_CASE("closed forms at known points") {
  CHECK(score_ucb({1.0, 2.0}, 4.0) == doctest::Approx(5.0));
  CHECK(score_pi({0.0, 1.0}, 0.0, 0.0) == doctest::Approx(0.5));
  CHECK(score_ei({0.0, 1.0}, 0.0, 0.0) == doctest::Approx(0.3989422804014327));
  CHECK(score_ei({2.0, 0.0}, 1.0, 0.5) == doctest::Approx(0.5));
  CHECK(score_pi({2.0, 0.0}, 1.0, 1.5) == 0.0);
  CHECK_THROWS_AS(score_ucb({0.0, 1.0}, 0.0), Error);
  CHECK_THROWS_AS(score_ei({std::nan(""), 1.0}, 0.0, 0.0), Error);
}

TEST_CASE("EI is non-negative and PI is a probability") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> mu(-5, 5), sigma(0, 3), f(-5, 5), xi(0, 1);
  for (int i = 0; i < 2000; ++i) {
    const PosteriorStats<double> s{mu(rng), i % 10 == 0 ? 0.0 : sigma(rng)};
    const double fs = f(rng), x = xi(rng);
    CHECK(score_ei(s, fs, x) >= 0.0);
    const double pi = score_pi(s, fs, x);
    CHECK(pi >= 0.0);
    CHECK(pi <= 1.0);
  }
}

TEST_CASE("EI agrees with Monte Carlo") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> mu(-2, 2), sigma(0.2, 2), f(-2, 2);
  for (int i = 0; i < 5; ++i) {
    const double m = mu(rng), s = sigma(rng), fs = f(rng);
    const auto mc = oracle::expected_improvement(m, s, fs, 0.01, 200000, 100 + i);
    CHECK(std::abs(score_ei({m, s}, fs, 0.01) - mc.mean) <= 4 * mc.standard_error);
  }
}

TEST_CASE("vanishing beta makes UCB follow the posterior mean") {
  auto p = make_pool(31);
  AcquisitionSpec spec;
  spec.beta = 0.0;
  const auto sel = select_next(p.gp, p.corpus, p.labeled, spec, p.dense, 0.0);
  const auto post = predict_rows(p.gp, p.corpus.vectors());
  std::size_t arg = 0;
  double best = -1e300;
  for (std::size_t i = 0; i < p.corpus.size(); ++i) {
    if (!p.labeled[i] && post.mu[Eigen::Index(i)] > best) {
      best = post.mu[Eigen::Index(i)];
      arg = i;
    }
  }
  CHECK(sel.index == arg);
}

TEST_CASE("every acquisition picks an unlabeled passage") {
  auto p = make_pool(41);
  const double f_star = best_observed(p.gp, p.obs, true);
  for (auto kind : {AcquisitionKind::ucb, AcquisitionKind::pi, AcquisitionKind::ei,
                    AcquisitionKind::ts, AcquisitionKind::random, AcquisitionKind::dense}) {
    AcquisitionSpec spec;
    spec.kind = kind;
    for (std::uint64_t step = 0; step < 5; ++step) {
      const auto sel = select_next(p.gp, p.corpus, p.labeled, spec, p.dense, f_star, step);
      CHECK_FALSE(p.labeled[sel.index]);
    }
  }
}

TEST_CASE("dense acquisition follows dense order") {
  auto p = make_pool(5);
  AcquisitionSpec spec;
  spec.kind = AcquisitionKind::dense;
  std::size_t expected = 0;
  for (std::size_t idx : p.dense) {
    if (!p.labeled[idx]) {
      expected = idx;
      break;
    }
  }
  CHECK(select_next(p.gp, p.corpus, p.labeled, spec, p.dense, 0.0).index == expected);
}

TEST_CASE("stochastic acquisitions are reproducible per seed and step") {
  auto p = make_pool(7);
  for (auto kind : {AcquisitionKind::random, AcquisitionKind::ts}) {
    AcquisitionSpec spec;
    spec.kind = kind;
    spec.rng_seed = 99;
    const auto a = select_next(p.gp, p.corpus, p.labeled, spec, p.dense, 0.0, 3);
    const auto b = select_next(p.gp, p.corpus, p.labeled, spec, p.dense, 0.0, 3);
    CHECK(a.index == b.index);
    CHECK(a.value == b.value);
  }
  AcquisitionSpec spec;
  spec.kind = AcquisitionKind::random;
  std::set<std::size_t> picks;
  for (std::uint64_t step = 0; step < 20; ++step) {
    picks.insert(select_next(p.gp, p.corpus, p.labeled, spec, p.dense, 0.0, step).index);
  }
  CHECK(picks.size() > 5);
}

TEST_CASE("Thompson candidates respect the cap") {
  auto p = make_pool(12);
  const auto post = predict_rows(p.gp, p.corpus.vectors());
  const auto all = ts_candidates(post.mu, p.labeled, 1000, 1);
  CHECK(all.size() == p.corpus.size() - p.obs.size());
  const auto some = ts_candidates(post.mu, p.labeled, 10, 1);
  CHECK(some.size() == 10);
  CHECK(std::is_sorted(some.begin(), some.end()));
  for (std::size_t idx : some) CHECK_FALSE(p.labeled[idx]);
  CHECK(ts_candidates(post.mu, p.labeled, 10, 1) == some);
}

TEST_CASE("empty pool and mismatched mask") {
  auto p = make_pool(3);
  std::vector<bool> full(p.corpus.size(), true);
  AcquisitionSpec spec;
  CHECK_THROWS_AS(select_next(p.gp, p.corpus, full, spec, p.dense, 0.0), Error);
  std::vector<bool> short_mask(2, false);
  CHECK_THROWS_AS(select_next(p.gp, p.corpus, short_mask, spec, p.dense, 0.0), Error);
}

TEST_CASE("incumbent can exclude the query pseudo-observation") {
  ObservationSet<double> obs;
  obs.append({"q", VectorXd::Zero(2), 3.0, true});
  obs.append({"a", VectorXd::Ones(2), 1.0, false});
  obs.append({"b", -VectorXd::Ones(2), 2.0, false});
  const auto gp = fit(obs, KernelSpec<double>{}, 1e-3);
  const auto& z = gp.standardization();
  CHECK(best_observed(gp, obs, true) == doctest::Approx(z.apply(3.0)));
  CHECK(best_observed(gp, obs, false) == doctest::Approx(z.apply(2.0)));
}

}  // TEST_SUITE
