#include <random>
#include <thread>

#include "doctest.h"

#include "activerank/oracle.hpp"
#include "fixtures.hpp"

using namespace activerank;

TEST_SUITE("oracle") {

TEST_CASE("expected relevance of uniform logits is the label mean") {
  const std::vector<double> z(4, 0.7);
  CHECK(score_er(z, {}).value == 1.5);
}

TEST_CASE("expected relevance matches the softmax reference") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> z(4);
    for (auto& v : z) v = u(rng);
    CHECK(score_er(z, {}).value == doctest::Approx(oracle::expected_relevance(z)).epsilon(1e-12));
  }
}

TEST_CASE("scores are invariant to a common logit shift") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-10, 10), shift(-500, 500);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> z(4), moved(4);
    const double c = shift(rng);
    for (std::size_t k = 0; k < 4; ++k) {
      z[k] = u(rng);
      moved[k] = z[k] + c;
    }
    CHECK(std::abs(score_er(z, {}).value - score_er(moved, {}).value) <= 1e-12);
    CHECK(score_pr(z, {}).value == score_pr(moved, {}).value);
  }
}

TEST_CASE("peak relevance takes the lowest label on ties") {
  CHECK(score_pr(std::vector<double>{0, 2, 2, 1}, {}).value == 1.0);
  CHECK(score_pr(std::vector<double>{5, 5, 5, 5}, {}).value == 0.0);
  CHECK(score_pr(std::vector<double>{0, 1, 3, 3}, {}).value == 2.0);
  CHECK(score_pr(std::vector<double>{0, 1, 2, 3}, {}).mode == ScoringMode::pr);
}

TEST_CASE("scalarization validates logits") {
  CHECK_THROWS_AS(score_er(std::vector<double>{0, 1, 2}, {}), Error);
  CHECK_THROWS_AS(score_er(std::vector<double>{0, 1, 2, std::nan("")}, {}), Error);
  RelevanceLabelSet two{2};
  CHECK(score_er(std::vector<double>{0, 0}, two).value == 0.5);
  CHECK_THROWS_AS(score_er(std::vector<double>{0}, RelevanceLabelSet{1}), Error);
}

TEST_CASE("ledger reservations commit or roll back") {
  BudgetLedger ledger(2);
  {
    auto r = ledger.reserve();
    CHECK(ledger.remaining() == 1);
    r.commit();
  }
  CHECK(ledger.spent() == 1);
  { auto dropped = ledger.reserve(); }
  CHECK(ledger.spent() == 1);
  CHECK(ledger.remaining() == 1);
  auto last = ledger.reserve();
  try {
    ledger.reserve();
    FAIL("expected budget_exhausted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::budget_exhausted);
  }
  last.commit();
  CHECK(ledger.spent() == 2);
  CHECK(ledger.remaining() == 0);
}

TEST_CASE("concurrent charging never overspends") {
  BudgetLedger ledger(100);
  std::atomic<int> refused{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < 8; ++t) {
    pool.emplace_back([&] {
      for (int i = 0; i < 20; ++i) {
        try {
          ledger.reserve().commit();
        } catch (const Error&) {
          ++refused;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  CHECK(ledger.spent() == 100);
  CHECK(refused == 60);
}

TEST_CASE("landscape relevance is the scaled maximum bump") {
  Landscape land;
  land.components = {{VectorXd::Unit(2, 0), 0.5, true}, {VectorXd::Unit(2, 1), 0.2, false}};
  const VectorXd x = VectorXd::Unit(2, 0);
  CHECK(landscape_relevance(land, x) == doctest::Approx(3.0));
  const VectorXd mid = VectorXd::Constant(2, std::sqrt(0.5));
  const double d0 = (mid - land.components[0].center).squaredNorm();
  CHECK(landscape_relevance(land, mid) == doctest::Approx(3.0 * std::exp(-d0 / 0.5)));
  CHECK(dominant_component(land, VectorXd::Unit(2, 1)) == 1);
  CHECK_THROWS_AS(landscape_relevance(land, VectorXd::Zero(3)), Error);
}

TEST_CASE("synthetic oracle charges one unit and is repeatable") {
  Landscape land;
  land.components = {{VectorXd::Unit(3, 0), 0.4, true}};
  QueryRecord q{"q1", "", VectorXd::Unit(3, 0)};
  const VectorXd p = VectorXd::Unit(3, 1);
  BudgetLedger ledger(3);
  SyntheticOracle exact(land, ScoringMode::er);
  CHECK(exact.score(q, {"p", p}, ledger).value == doctest::Approx(landscape_relevance(land, p)));
  SyntheticOracle peak(land, ScoringMode::pr);
  CHECK(peak.score(q, {"p", VectorXd::Unit(3, 0)}, ledger).value == 3.0);
  SyntheticOracle noisy(land, ScoringMode::er, 0.5, 7);
  const double a = noisy.evaluate(q, {"p", p}).value;
  CHECK(noisy.evaluate(q, {"p", p}).value == a);
  CHECK(noisy.score(q, {"p", p}, ledger).value == a);
  CHECK(ledger.spent() == 3);
  CHECK_THROWS_AS(exact.score(q, {"p", p}, ledger), Error);
  CHECK(ledger.spent() == 3);
}

}  // TEST_SUITE
