#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "activerank/corpus.hpp"
#include "activerank/config.hpp"
#include "activerank/engine.hpp"
#include "activerank/evalkit.hpp"
#include "activerank/oracle.hpp"

namespace activerank {

/// One relevance bump of a synthetic landscape. Distances are chord
/// lengths on the unit sphere.
struct ComponentSpec {
  std::optional<VectorXd> center;  // drawn when absent
  double width = 0.4;
  bool near_query = false;
  std::size_t cluster_size = 35;  // passages placed around the center
  // Cosine between a drawn far center and the query; a uniformly random
  // direction when absent. Ignored for the near component and for given
  // centers.
  std::optional<double> query_similarity;
  // Centers the component on background topic `topic`; takes precedence
  // over query_similarity.
  std::optional<std::size_t> topic;
};

struct LandscapeSpec {
  Eigen::Index dim = 16;
  std::size_t n_passages = 2000;
  std::vector<ComponentSpec> components;
  // Chord distance from the (first) near component's center to the query.
  double query_offset = 0.05;
  // Cluster passages sit at chord distance U(0, spread * width) from their
  // center.
  double component_spread = 2.5;
  // Passages not in a component: background topics plus uniform scatter.
  std::size_t background_topics = 12;
  double topic_radius = 0.6;
  double scatter_fraction = 0.0;
  std::uint64_t seed = 0;
  double logit_noise = 0.0;
  RelevanceLabelSet labels;

  void validate() const;
};

/// Three components, one near the query, with the geometry used by the
/// experiments and acceptance checks.
LandscapeSpec standard_landscape(std::uint64_t seed);

struct Benchmark {
  CorpusIndex corpus;  // unit-normalized
  QueryRecord query;
  Qrels qrels;         // every passage judged
  Landscape landscape;
  // Component index a passage was placed around; -1 for background.
  std::vector<int> placed_in;
  // Passages graded >= 1 whose dominant component is not near the query.
  std::vector<std::string> far_relevant;
  double logit_noise = 0.0;
  std::uint64_t seed = 0;
};

/// Deterministic in spec (including seed). Grades are round(g(p)) clamped
/// to the label range.
Benchmark generate_benchmark(const LandscapeSpec& spec);

struct CellMetrics {
  double ndcg10 = 0.0;
  double ndcg50 = 0.0;
  double recall10 = 0.0;
  double recall50 = 0.0;
  double far_recall50 = 0.0;  // share of far_relevant in the top 50
  int spent = 0;
  int budget = 0;
};

/// One engine run on a benchmark with the synthetic oracle, then metrics.
/// The full ranking is copied to `ranking` when given.
CellMetrics run_cell(const Benchmark& bench, const EngineConfig& cfg,
                     RankedList* ranking = nullptr);

// Grid rows keep this many top-ranked passages for run files.
inline constexpr std::size_t kGridRunDepth = 100;

struct ExperimentGrid {
  std::vector<int> budgets = {50};
  std::vector<KernelSpec<double>> kernels = {KernelSpec<double>{}};
  std::vector<AcquisitionKind> acquisitions = {AcquisitionKind::ucb};
  std::vector<std::uint64_t> seeds = {0};
  int warm_start_m = 25;
  EngineConfig base;  // everything else

  void validate() const;
};

struct GridRow {
  int budget = 0;
  std::string kernel;  // family name; matern carries nu, e.g. "matern2.5"
  AcquisitionKind acquisition = AcquisitionKind::ucb;
  std::uint64_t seed = 0;
  CellMetrics metrics;
  RankedList ranking;  // top kGridRunDepth
};

struct GridMedian {
  int budget = 0;
  std::string kernel;
  AcquisitionKind acquisition = AcquisitionKind::ucb;
  std::size_t runs = 0;
  CellMetrics median;
};

struct GridReport {
  std::vector<GridRow> rows;        // budget, kernel, acquisition, seed order
  std::vector<GridMedian> medians;  // one per (budget, kernel, acquisition)
  Qrels qrels;                      // judgments of every seed's benchmark

  const GridMedian& cell(int budget, const std::string& kernel,
                         AcquisitionKind acquisition) const;
};

std::string kernel_label(const KernelSpec<double>& spec);

/// Benchmarks are generated once per seed from `spec` with spec.seed
/// replaced by the grid seed; the acquisition seed is the grid seed too.
/// Cells run on up to `threads` workers (0 = hardware concurrency); the
/// report does not depend on the thread count.
GridReport run_grid(const ExperimentGrid& grid, const LandscapeSpec& spec,
                    unsigned threads = 0);

void write_grid_rows(std::ostream& out, const GridReport& report);
void write_grid_medians(std::ostream& out, const GridReport& report);
/// Budget curves: one line per (kernel, acquisition, budget) with the
/// median metrics, grouped so each curve is contiguous.
void write_budget_curves(std::ostream& out, const GridReport& report);

// Plain-text specs in the key-value config format.
//
// Landscape keys: dim, n_passages, query_offset, component_spread,
// background_topics, topic_radius, scatter_fraction, seed, logit_noise,
// labels, and per component i (0-based) component.i.width,
// component.i.near_query, component.i.cluster_size,
// component.i.query_similarity, component.i.topic, component.i.center
// (comma list).
LandscapeSpec load_landscape_spec(const std::string& path);
LandscapeSpec landscape_from_key_values(const KeyValues& kv);

// Grid keys: budgets, kernels, acquisitions (comma lists), seeds (comma
// list or "a..b"), warm_start_m, plus any engine setting for the base.
ExperimentGrid load_experiment_grid(const std::string& path);
ExperimentGrid grid_from_key_values(const KeyValues& kv);

}  // namespace activerank
