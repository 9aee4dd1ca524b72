#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "activerank/acquisition.hpp"
#include "activerank/corpus.hpp"
#include "activerank/gp.hpp"
#include "activerank/gp_hyperopt.hpp"
#include "activerank/oracle.hpp"
#include "activerank/ranking.hpp"

namespace activerank {

struct EngineConfig {
  int warm_start_m = 25;
  int active_steps_t = 25;
  double alpha = 1e-3;
  KernelSpec<double> kernel;
  AcquisitionSpec acquisition;
  ScoringMode scoring_mode = ScoringMode::er;
  RelevanceLabelSet labels;
  HyperOptConfig<double> hyperopt;
  bool optimize_hyperparameters = true;
  // Unit-normalize the query; the corpus must then already be normalized.
  bool normalize = true;

  int budget() const { return warm_start_m + active_steps_t; }
  void validate() const;
};

enum class TracePhase { warm_start, active };

std::string_view to_string(TracePhase phase);

/// One scored passage. Warm-start events carry the dense similarity in
/// acquisition_value; iteration counts from 1 within each phase.
struct TraceEvent {
  int iteration = 0;
  TracePhase phase = TracePhase::warm_start;
  std::string passage_id;
  double acquisition_value = 0.0;
  double score = 0.0;
  int cumulative_budget = 0;
};

struct RunState {
  int t = 0;  // completed active steps
  QueryRecord query;  // embedding normalized when the config asks for it
  ObservationSet<double> observations;
  std::optional<FittedGP<double>> gp;  // last fit; may lag observations
  BudgetLedger ledger;
  std::vector<TraceEvent> trace;
  std::vector<bool> labeled;  // mask over corpus rows
  std::vector<std::size_t> dense_order;

  bool gp_current() const {
    return gp && std::size_t(gp->size()) == observations.size();
  }
};

/// Query embedding as the engine uses it.
VectorXd prepare_query_embedding(const QueryRecord& q, const CorpusIndex& corpus,
                                 const EngineConfig& cfg);

/// Pseudo-observation (x_q, K-1) followed by the oracle scores of the dense
/// top-M passages in dense rank order. Charges M units.
RunState warm_start(const QueryRecord& q, const CorpusIndex& corpus,
                    RelevanceOracle& oracle, const EngineConfig& cfg,
                    BudgetLedger ledger);

/// Hyperparameters re-optimized from cfg.kernel (when enabled and at least
/// two observations exist), then an exact fit.
FittedGP<double> fit_surrogate(const ObservationSet<double>& obs,
                               const EngineConfig& cfg);

/// Refit, select, score, append, trace.
void active_step(RunState& state, const CorpusIndex& corpus,
                 RelevanceOracle& oracle, const EngineConfig& cfg);

/// Ranks every corpus passage by posterior mean, descending; ties keep
/// corpus order. Uses the GP in `state` when it covers all observations,
/// otherwise fits one on the current observations.
RankedList rank_all(const RunState& state, const CorpusIndex& corpus,
                    const EngineConfig& cfg);

/// Ranking from an already fitted GP.
RankedList rank_with(const FittedGP<double>& gp, const CorpusIndex& corpus,
                     const std::string& query_id);

struct RunResult {
  RankedList ranking;
  RunState state;
};

/// warm_start, T active steps, final refit, rank_all. Charges exactly M+T.
RunResult run_query(const QueryRecord& q, const CorpusIndex& corpus,
                    RelevanceOracle& oracle, const EngineConfig& cfg);

// Trace files: one tab-separated line per event with query id, iteration,
// phase, passage id, acquisition value, score, cumulative budget. Reals are
// printed with 17 significant digits so replay is exact.
inline constexpr std::string_view kTraceHeader =
    "query_id\titeration\tphase\tpassage_id\tacquisition_value\tscore\t"
    "cumulative_budget";

void write_trace_header(std::ostream& out);
void write_trace(std::ostream& out, const std::vector<TraceEvent>& trace,
                 std::string_view query_id);
/// Reads the events of one query (all events when query_id is empty).
std::vector<TraceEvent> read_trace(std::istream& in,
                                   std::string_view query_id = {});

/// Rebuilds the observation set from the first `events` trace entries and
/// ranks from it. Matches rank_all at the same point of the run.
RankedList replay_ranking(const QueryRecord& q, const CorpusIndex& corpus,
                          const std::vector<TraceEvent>& trace,
                          std::size_t events, const EngineConfig& cfg);

}  // namespace activerank
