#include "activerank/engine.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace activerank {

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

Observation<double> query_observation(const RunState& state,
                                      const EngineConfig& cfg) {
  return {std::string(kQueryObservationId), state.query.embedding,
          double(cfg.labels.max_label()), true};
}

}  // namespace

void EngineConfig::validate() const {
  if (warm_start_m < 0 || active_steps_t < 0) {
    throw Error(ErrorCode::invalid_argument,
                "warm_start_m and active_steps_t must be >= 0");
  }
  if (budget() < 1) {
    throw Error(ErrorCode::invalid_argument, "total budget must be >= 1");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::invalid_argument, "alpha must be finite and >= 0");
  }
  kernel.validate();
  acquisition.validate();
  labels.validate();
  hyperopt.validate();
}

std::string_view to_string(TracePhase phase) {
  return phase == TracePhase::warm_start ? "warm" : "active";
}

VectorXd prepare_query_embedding(const QueryRecord& q, const CorpusIndex& corpus,
                                 const EngineConfig& cfg) {
  if (q.embedding.size() != corpus.dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "query " + q.query_id + " has dimension " +
                    std::to_string(q.embedding.size()) + ", corpus has " +
                    std::to_string(corpus.dim()));
  }
  if (!q.embedding.allFinite()) {
    throw Error(ErrorCode::invalid_argument,
                "non-finite query embedding for " + q.query_id);
  }
  if (!cfg.normalize) return q.embedding;
  if (!corpus.normalized()) {
    throw Error(ErrorCode::invalid_argument,
                "normalization requested but the corpus is not normalized");
  }
  return normalized(q.embedding, q.query_id);
}

RunState warm_start(const QueryRecord& q, const CorpusIndex& corpus,
                    RelevanceOracle& oracle, const EngineConfig& cfg,
                    BudgetLedger ledger) {
  cfg.validate();
  if (corpus.empty()) throw Error(ErrorCode::empty_pool, "empty corpus");
  const auto m = std::size_t(cfg.warm_start_m);
  if (m > corpus.size()) {
    throw Error(ErrorCode::invalid_argument,
                "warm start M=" + std::to_string(m) + " exceeds corpus size " +
                    std::to_string(corpus.size()));
  }
  if (ledger.remaining() < cfg.warm_start_m) {
    throw Error(ErrorCode::budget_exhausted,
                "budget " + std::to_string(ledger.remaining()) +
                    " cannot cover warm start M=" + std::to_string(m));
  }

  RunState state;
  state.query = q;
  state.query.embedding = prepare_query_embedding(q, corpus, cfg);
  state.ledger = std::move(ledger);
  state.labeled.assign(corpus.size(), false);
  state.dense_order = dense_order(corpus, state.query.embedding);
  state.observations.append(query_observation(state, cfg));

  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t row = state.dense_order[i];
    const double similarity = corpus.embedding(row).dot(state.query.embedding);
    const auto score =
        oracle.score(state.query, {corpus.id(row), corpus.embedding(row)},
                     state.ledger);
    state.observations.append({corpus.id(row), corpus.embedding(row), score.value, false});
    state.labeled[row] = true;
    state.trace.push_back({int(i) + 1, TracePhase::warm_start, corpus.id(row),
                           similarity, score.value, state.ledger.spent()});
  }
  state.gp = fit_surrogate(state.observations, cfg);
  return state;
}

FittedGP<double> fit_surrogate(const ObservationSet<double>& obs,
                               const EngineConfig& cfg) {
  KernelSpec<double> spec = cfg.kernel;
  if (cfg.optimize_hyperparameters && obs.size() >= 2) {
    try {
      spec = optimize_hyperparameters(obs, cfg.kernel, cfg.alpha, cfg.hyperopt);
    } catch (const Error& e) {
      // A degenerate objective falls back to the configured start.
      if (e.code() != ErrorCode::numerical) throw;
    }
  }
  return fit(obs, spec, cfg.alpha);
}

void active_step(RunState& state, const CorpusIndex& corpus,
                 RelevanceOracle& oracle, const EngineConfig& cfg) {
  if (state.labeled.size() != corpus.size()) {
    throw Error(ErrorCode::invalid_argument,
                "run state does not belong to this corpus");
  }
  if (std::none_of(state.labeled.begin(), state.labeled.end(),
                   [](bool b) { return !b; })) {
    throw Error(ErrorCode::empty_pool, "no unlabeled passages remain");
  }
  if (state.ledger.remaining() < 1) {
    throw Error(ErrorCode::budget_exhausted, "no budget left for an active step");
  }

  state.gp = fit_surrogate(state.observations, cfg);
  const double f_star = best_observed(*state.gp, state.observations,
                                      cfg.acquisition.include_query_in_best);
  const auto pick =
      select_next(*state.gp, corpus, state.labeled, cfg.acquisition,
                  state.dense_order, f_star, std::uint64_t(state.t));
  const auto score = oracle.score(
      state.query, {corpus.id(pick.index), corpus.embedding(pick.index)},
      state.ledger);
  state.observations.append(
      {corpus.id(pick.index), corpus.embedding(pick.index), score.value, false});
  state.labeled[pick.index] = true;
  ++state.t;
  state.trace.push_back({state.t, TracePhase::active, corpus.id(pick.index),
                         pick.value, score.value, state.ledger.spent()});
}

RankedList rank_with(const FittedGP<double>& gp, const CorpusIndex& corpus,
                     const std::string& query_id) {
  const auto post = predict_rows(gp, corpus.vectors());
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return post.mu[Eigen::Index(a)] > post.mu[Eigen::Index(b)];
  });
  RankedList out;
  out.query_id = query_id;
  out.entries.reserve(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    out.entries.push_back(
        {corpus.id(order[r]), post.mu[Eigen::Index(order[r])], r + 1});
  }
  return out;
}

RankedList rank_all(const RunState& state, const CorpusIndex& corpus,
                    const EngineConfig& cfg) {
  if (state.observations.empty()) {
    throw Error(ErrorCode::invalid_argument, "rank_all: no fit available");
  }
  if (state.gp_current()) return rank_with(*state.gp, corpus, state.query.query_id);
  return rank_with(fit_surrogate(state.observations, cfg), corpus,
                   state.query.query_id);
}

RunResult run_query(const QueryRecord& q, const CorpusIndex& corpus,
                    RelevanceOracle& oracle, const EngineConfig& cfg) {
  RunResult result;
  result.state = warm_start(q, corpus, oracle, cfg, BudgetLedger(cfg.budget()));
  for (int t = 0; t < cfg.active_steps_t; ++t) {
    active_step(result.state, corpus, oracle, cfg);
  }
  if (!result.state.gp_current()) {
    result.state.gp = fit_surrogate(result.state.observations, cfg);
  }
  result.ranking = rank_all(result.state, corpus, cfg);
  return result;
}

void write_trace_header(std::ostream& out) { out << kTraceHeader << '\n'; }

void write_trace(std::ostream& out, const std::vector<TraceEvent>& trace,
                 std::string_view query_id) {
  for (const auto& e : trace) {
    out << query_id << '\t' << e.iteration << '\t' << to_string(e.phase) << '\t'
        << e.passage_id << '\t' << format_real(e.acquisition_value) << '\t'
        << format_real(e.score) << '\t' << e.cumulative_budget << '\n';
  }
}

std::vector<TraceEvent> read_trace(std::istream& in, std::string_view query_id) {
  std::vector<TraceEvent> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == kTraceHeader) continue;
    const auto f = split_tabs(line);
    const auto bad = [&] {
      return Error(ErrorCode::parse,
                   "malformed trace line " + std::to_string(line_no));
    };
    if (f.size() != 7) throw bad();
    if (!query_id.empty() && f[0] != query_id) continue;
    TraceEvent e;
    try {
      std::size_t used = 0;
      e.iteration = std::stoi(f[1], &used);
      if (used != f[1].size()) throw bad();
      if (f[2] == "warm") {
        e.phase = TracePhase::warm_start;
      } else if (f[2] == "active") {
        e.phase = TracePhase::active;
      } else {
        throw bad();
      }
      e.passage_id = f[3];
      e.acquisition_value = std::stod(f[4]);
      e.score = std::stod(f[5]);
      e.cumulative_budget = std::stoi(f[6]);
    } catch (const std::logic_error&) {
      throw bad();
    }
    out.push_back(std::move(e));
  }
  return out;
}

RankedList replay_ranking(const QueryRecord& q, const CorpusIndex& corpus,
                          const std::vector<TraceEvent>& trace,
                          std::size_t events, const EngineConfig& cfg) {
  if (events > trace.size()) {
    throw Error(ErrorCode::invalid_argument,
                "replay: trace holds only " + std::to_string(trace.size()) +
                    " events");
  }
  RunState state;
  state.query = q;
  state.query.embedding = prepare_query_embedding(q, corpus, cfg);
  state.observations.append(query_observation(state, cfg));
  for (std::size_t i = 0; i < events; ++i) {
    const auto row = corpus.find(trace[i].passage_id);
    if (!row) {
      throw Error(ErrorCode::invalid_argument,
                  "replay: unknown passage id " + trace[i].passage_id);
    }
    state.observations.append(
        {trace[i].passage_id, corpus.embedding(*row), trace[i].score, false});
  }
  return rank_all(state, corpus, cfg);
}

}  // namespace activerank
