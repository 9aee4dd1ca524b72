#include <set>
#include <sstream>

#include "doctest.h"

#include "activerank/engine.hpp"
#include "activerank/harness.hpp"
#include "fixtures.hpp"

using namespace activerank;

namespace {

const Benchmark& bench() {
  static const Benchmark b = generate_benchmark(fixtures::small_landscape(4));
  return b;
}

EngineConfig small_config(AcquisitionKind kind = AcquisitionKind::ucb) {
  EngineConfig cfg;
  cfg.warm_start_m = 10;
  cfg.active_steps_t = 8;
  cfg.acquisition.kind = kind;
  return cfg;
}

SyntheticOracle oracle_for(const Benchmark& b) {
  return SyntheticOracle(b.landscape, ScoringMode::er);
}

// Counts every call and fails on request.
class CountingOracle : public RelevanceOracle {
 public:
  explicit CountingOracle(RelevanceOracle& inner) : inner_(inner) {}
  RelevanceScore score(const QueryRecord& q, const PassageRef& p,
                       BudgetLedger& ledger) override {
    ++calls;
    if (fail_at && calls == fail_at) throw Error(ErrorCode::oracle_transport, "down");
    return inner_.score(q, p, ledger);
  }
  int calls = 0;
  int fail_at = 0;

 private:
  RelevanceOracle& inner_;
};

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("a run charges exactly M + T and traces both phases") {
  auto oracle = oracle_for(bench());
  const auto cfg = small_config();
  const auto r = run_query(bench().query, bench().corpus, oracle, cfg);
  CHECK(r.state.ledger.spent() == 18);
  CHECK(r.state.ledger.total() == 18);
  REQUIRE(r.state.trace.size() == 18);
  for (int i = 0; i < 10; ++i) {
    CHECK(r.state.trace[std::size_t(i)].phase == TracePhase::warm_start);
    CHECK(r.state.trace[std::size_t(i)].iteration == i + 1);
    CHECK(r.state.trace[std::size_t(i)].cumulative_budget == i + 1);
  }
  for (int i = 10; i < 18; ++i) {
    CHECK(r.state.trace[std::size_t(i)].phase == TracePhase::active);
    CHECK(r.state.trace[std::size_t(i)].iteration == i - 9);
  }
  CHECK(r.state.observations.size() == 19);
  CHECK(r.state.observations[0].is_query);
  CHECK(r.state.observations[0].y == 3.0);
}

TEST_CASE("warm start follows dense order") {
  auto oracle = oracle_for(bench());
  const auto cfg = small_config();
  const auto state = warm_start(bench().query, bench().corpus, oracle, cfg, BudgetLedger(10));
  const auto q = prepare_query_embedding(bench().query, bench().corpus, cfg);
  const auto top = dense_top_m(bench().corpus, q, 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(state.trace[i].passage_id == bench().corpus.id(top[i].index));
    CHECK(state.trace[i].acquisition_value == doctest::Approx(top[i].similarity));
  }
  CHECK(state.gp_current());
}

TEST_CASE("no passage is scored twice") {
  auto oracle = oracle_for(bench());
  for (auto kind : {AcquisitionKind::ucb, AcquisitionKind::ei, AcquisitionKind::ts,
                    AcquisitionKind::random, AcquisitionKind::dense}) {
    const auto r = run_query(bench().query, bench().corpus, oracle, small_config(kind));
    std::set<std::string> ids;
    for (const auto& e : r.state.trace) ids.insert(e.passage_id);
    CHECK(ids.size() == r.state.trace.size());
  }
}

TEST_CASE("repeated runs are bit-identical") {
  auto oracle = oracle_for(bench());
  for (auto kind : {AcquisitionKind::ucb, AcquisitionKind::ts, AcquisitionKind::random}) {
    const auto a = run_query(bench().query, bench().corpus, oracle, small_config(kind));
    const auto b = run_query(bench().query, bench().corpus, oracle, small_config(kind));
    std::ostringstream ta, tb;
    write_trace(ta, a.state.trace, "q");
    write_trace(tb, b.state.trace, "q");
    CHECK(ta.str() == tb.str());
    REQUIRE(a.ranking.size() == b.ranking.size());
    for (std::size_t i = 0; i < a.ranking.size(); ++i) {
      CHECK(a.ranking.entries[i].id == b.ranking.entries[i].id);
      CHECK(a.ranking.entries[i].score == b.ranking.entries[i].score);
    }
  }
}

TEST_CASE("ranking covers the corpus in descending posterior mean") {
  auto oracle = oracle_for(bench());
  const auto r = run_query(bench().query, bench().corpus, oracle, small_config());
  CHECK(r.ranking.size() == bench().corpus.size());
  CHECK(r.ranking.query_id == bench().query.query_id);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < r.ranking.size(); ++i) {
    ids.insert(r.ranking.entries[i].id);
    CHECK(r.ranking.entries[i].rank == i + 1);
    if (i > 0) CHECK(r.ranking.entries[i].score <= r.ranking.entries[i - 1].score);
  }
  CHECK(ids.size() == bench().corpus.size());
}

TEST_CASE("trace round trip and replay reproduce the ranking") {
  auto oracle = oracle_for(bench());
  const auto cfg = small_config();
  const auto r = run_query(bench().query, bench().corpus, oracle, cfg);
  std::stringstream buf;
  write_trace_header(buf);
  write_trace(buf, r.state.trace, "q1");
  write_trace(buf, r.state.trace, "q2");
  const auto back = read_trace(buf, "q2");
  REQUIRE(back.size() == r.state.trace.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].passage_id == r.state.trace[i].passage_id);
    CHECK(back[i].score == r.state.trace[i].score);
    CHECK(back[i].acquisition_value == r.state.trace[i].acquisition_value);
    CHECK(back[i].phase == r.state.trace[i].phase);
  }
  const auto replayed = replay_ranking(bench().query, bench().corpus, back, back.size(), cfg);
  for (std::size_t i = 0; i < replayed.size(); ++i) {
    CHECK(replayed.entries[i].id == r.ranking.entries[i].id);
  }
  CHECK_THROWS_AS(replay_ranking(bench().query, bench().corpus, back, back.size() + 1, cfg),
                  Error);
  std::istringstream bad("q\t1\twarm\tp\tx\t1\t1\n");
  CHECK_THROWS_AS(read_trace(bad), Error);
}

TEST_CASE("an oracle failure charges nothing and propagates") {
  auto inner = oracle_for(bench());
  CountingOracle oracle(inner);
  oracle.fail_at = 12;
  auto cfg = small_config();
  auto state = warm_start(bench().query, bench().corpus, oracle, cfg, BudgetLedger(18));
  active_step(state, bench().corpus, oracle, cfg);
  CHECK(state.ledger.spent() == 11);
  CHECK_THROWS_AS(active_step(state, bench().corpus, oracle, cfg), Error);
  CHECK(state.ledger.spent() == 11);
  CHECK(state.trace.size() == 11);
}

TEST_CASE("configuration and input errors") {
  auto oracle = oracle_for(bench());
  auto cfg = small_config();
  cfg.warm_start_m = int(bench().corpus.size()) + 1;
  CHECK_THROWS_AS(run_query(bench().query, bench().corpus, oracle, cfg), Error);
  cfg = small_config();
  CHECK_THROWS_AS(warm_start(bench().query, bench().corpus, oracle, cfg, BudgetLedger(5)),
                  Error);
  QueryRecord wrong = bench().query;
  wrong.embedding = VectorXd::Ones(3);
  CHECK_THROWS_AS(run_query(wrong, bench().corpus, oracle, cfg), Error);
  cfg.alpha = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = small_config();
  cfg.warm_start_m = 0;
  cfg.active_steps_t = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  auto state = warm_start(bench().query, bench().corpus, oracle, small_config(),
                          BudgetLedger(10));
  CHECK_THROWS_AS(active_step(state, bench().corpus, oracle, small_config()), Error);
}

TEST_CASE("zero warm start runs from the query alone") {
  auto oracle = oracle_for(bench());
  auto cfg = small_config();
  cfg.warm_start_m = 0;
  cfg.active_steps_t = 3;
  const auto r = run_query(bench().query, bench().corpus, oracle, cfg);
  CHECK(r.state.ledger.spent() == 3);
  CHECK(r.state.trace.front().phase == TracePhase::active);
}

}  // TEST_SUITE
