#include "activerank/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "activerank/rng.hpp"

namespace activerank {

namespace {

VectorXd random_unit(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd v(dim);
  do {
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = normal(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

// Unit vector orthogonal to c.
VectorXd random_tangent(const VectorXd& c, std::mt19937_64& rng) {
  while (true) {
    VectorXd u = random_unit(c.size(), rng);
    u -= u.dot(c) * c;
    const double n = u.norm();
    if (n > 1e-8) return u / n;
  }
}

// Point on the unit sphere at chord distance `chord` from unit vector c.
VectorXd at_chord(const VectorXd& c, double chord, std::mt19937_64& rng) {
  const double theta = 2.0 * std::asin(std::clamp(chord / 2.0, 0.0, 1.0));
  return std::cos(theta) * c + std::sin(theta) * random_tangent(c, rng);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

KernelSpec<double> parse_kernel_label(const std::string& label) {
  KernelSpec<double> spec;
  if (label.rfind("matern", 0) == 0 && label.size() > 6) {
    spec.family = KernelFamily::matern;
    spec.nu = parse_real("kernels", label.substr(6));
  } else {
    spec.family = parse_kernel_family(label);
  }
  spec.validate();
  return spec;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_metrics(std::ostream& out, const CellMetrics& m) {
  out << fmt(m.ndcg10) << '\t' << fmt(m.ndcg50) << '\t' << fmt(m.recall10) << '\t'
      << fmt(m.recall50) << '\t' << fmt(m.far_recall50) << '\t' << m.spent;
}

constexpr const char* kMetricColumns =
    "ndcg@10\tndcg@50\trecall@10\trecall@50\tfar_recall@50\tspent";

}  // namespace

void LandscapeSpec::validate() const {
  labels.validate();
  if (dim < 2) throw Error(ErrorCode::invalid_argument, "landscape dim must be >= 2");
  if (components.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "landscape needs at least 2 components");
  }
  std::size_t near = 0;
  std::size_t placed = 0;
  for (const auto& c : components) {
    if (!(c.width > 0.0) || !std::isfinite(c.width)) {
      throw Error(ErrorCode::invalid_argument, "component width must be > 0");
    }
    if (c.center && (c.center->size() != dim || c.center->norm() < 1e-12)) {
      throw Error(ErrorCode::invalid_argument,
                  "component center must be a non-zero vector of dimension dim");
    }
    if (c.topic && *c.topic >= background_topics) {
      throw Error(ErrorCode::invalid_argument, "component topic index out of range");
    }
    if (c.query_similarity && !(std::abs(*c.query_similarity) <= 1.0)) {
      throw Error(ErrorCode::invalid_argument, "query_similarity must be in [-1, 1]");
    }
    near += c.near_query ? 1 : 0;
    placed += c.cluster_size;
  }
  if (near == 0 || near == components.size()) {
    throw Error(ErrorCode::invalid_argument,
                "landscape needs a component near the query and one away from it");
  }
  if (placed > n_passages) {
    throw Error(ErrorCode::invalid_argument,
                "component clusters exceed n_passages");
  }
  if (!(query_offset >= 0.0) || !(component_spread > 0.0) ||
      !(topic_radius >= 0.0) || !(scatter_fraction >= 0.0 && scatter_fraction <= 1.0) ||
      !(logit_noise >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "landscape spread parameters out of range");
  }
  if (background_topics == 0 && scatter_fraction < 1.0 && placed < n_passages) {
    throw Error(ErrorCode::invalid_argument,
                "background passages need topics or full scatter");
  }
}

LandscapeSpec standard_landscape(std::uint64_t seed) {
  LandscapeSpec spec;
  spec.seed = seed;
  spec.scatter_fraction = 0.0;
  ComponentSpec near;
  near.near_query = true;
  near.width = 0.4;
  near.cluster_size = 30;
  ComponentSpec far;
  far.width = 0.4;
  far.cluster_size = 35;
  spec.components = {near, far, far};
  return spec;
}

Benchmark generate_benchmark(const LandscapeSpec& spec) {
  spec.validate();
  auto rng = make_rng(spec.seed, RngStream::landscape);
  const Eigen::Index d = spec.dim;

  const auto near_it = std::find_if(spec.components.begin(), spec.components.end(),
                                    [](const ComponentSpec& c) { return c.near_query; });
  const std::size_t near_idx = std::size_t(near_it - spec.components.begin());

  Benchmark bench;
  bench.logit_noise = spec.logit_noise;
  bench.seed = spec.seed;
  bench.landscape.labels = spec.labels;
  std::vector<VectorXd> topics;
  for (std::size_t t = 0; t < spec.background_topics; ++t) {
    topics.push_back(random_unit(d, rng));
  }
  const auto anchored = [&](const ComponentSpec& c) -> std::optional<VectorXd> {
    if (c.center) return VectorXd(c.center->normalized());
    if (c.topic) return topics[*c.topic];
    return std::nullopt;
  };

  std::vector<VectorXd> centers(spec.components.size());
  const auto& near = spec.components[near_idx];
  if (auto a = anchored(near)) {
    centers[near_idx] = *a;
  } else {
    centers[near_idx] = random_unit(d, rng);
  }
  const VectorXd query = at_chord(centers[near_idx], spec.query_offset, rng);
  for (std::size_t j = 0; j < spec.components.size(); ++j) {
    if (j == near_idx) continue;
    const auto& c = spec.components[j];
    if (auto a = anchored(c)) {
      centers[j] = *a;
    } else if (c.query_similarity && !c.near_query) {
      const double s = *c.query_similarity;
      centers[j] = s * query + std::sqrt(1.0 - s * s) * random_tangent(query, rng);
    } else {
      centers[j] = random_unit(d, rng);
    }
  }
  for (std::size_t j = 0; j < spec.components.size(); ++j) {
    bench.landscape.components.push_back(
        {centers[j], spec.components[j].width, spec.components[j].near_query});
  }

  std::vector<VectorXd> points;
  std::vector<int> placed;
  points.reserve(spec.n_passages);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t j = 0; j < spec.components.size(); ++j) {
    const double reach = spec.component_spread * spec.components[j].width;
    for (std::size_t i = 0; i < spec.components[j].cluster_size; ++i) {
      points.push_back(at_chord(centers[j], reach * unit(rng), rng));
      placed.push_back(int(j));
    }
  }
  const std::size_t background = spec.n_passages - points.size();
  const auto scatter = std::size_t(std::llround(spec.scatter_fraction * double(background)));
  for (std::size_t i = 0; i < background; ++i) {
    if (i < scatter || topics.empty()) {
      points.push_back(random_unit(d, rng));
    } else {
      const auto& c = topics[(i - scatter) % topics.size()];
      points.push_back(at_chord(c, spec.topic_radius * unit(rng), rng));
    }
    placed.push_back(-1);
  }

  // Shuffle so corpus order carries no cluster information.
  std::vector<std::size_t> perm(points.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);

  RowMatrixXd X(static_cast<Eigen::Index>(points.size()), d);
  std::vector<std::string> ids;
  ids.reserve(points.size());
  bench.placed_in.reserve(points.size());
  char buf[32];
  for (std::size_t r = 0; r < perm.size(); ++r) {
    X.row(Eigen::Index(r)) = points[perm[r]].transpose();
    std::snprintf(buf, sizeof buf, "p%05zu", r);
    ids.emplace_back(buf);
    bench.placed_in.push_back(placed[perm[r]]);
  }
  bench.corpus = CorpusIndex(std::move(ids), std::move(X), true);

  std::snprintf(buf, sizeof buf, "synth%llu", static_cast<unsigned long long>(spec.seed));
  bench.query.query_id = buf;
  bench.query.text = "synthetic query";
  bench.query.embedding = query;

  const double top = double(spec.labels.max_label());
  for (std::size_t i = 0; i < bench.corpus.size(); ++i) {
    const auto x = bench.corpus.embedding(i);
    const double g = landscape_relevance(bench.landscape, x);
    const int grade = int(std::clamp(std::round(g), 0.0, top));
    bench.qrels.add(bench.query.query_id, bench.corpus.id(i), grade);
    if (grade >= 1 && !bench.landscape.components[dominant_component(bench.landscape, x)]
                           .near_query) {
      bench.far_relevant.push_back(bench.corpus.id(i));
    }
  }
  return bench;
}

CellMetrics run_cell(const Benchmark& bench, const EngineConfig& cfg,
                     RankedList* ranking_out) {
  SyntheticOracle oracle(bench.landscape, cfg.scoring_mode, bench.logit_noise,
                         bench.seed);
  const auto result = run_query(bench.query, bench.corpus, oracle, cfg);
  const auto& ranking = result.ranking;
  CellMetrics m;
  m.budget = cfg.budget();
  m.spent = result.state.ledger.spent();
  m.ndcg10 = ndcg_at_k(ranking, bench.qrels, 10);
  m.ndcg50 = ndcg_at_k(ranking, bench.qrels, 50);
  m.recall10 = recall_at_k(ranking, bench.qrels, 10);
  m.recall50 = recall_at_k(ranking, bench.qrels, 50);
  if (!bench.far_relevant.empty()) {
    const std::unordered_set<std::string> far(bench.far_relevant.begin(),
                                              bench.far_relevant.end());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min<std::size_t>(50, ranking.size()); ++i) {
      hits += far.count(ranking.entries[i].id);
    }
    m.far_recall50 = double(hits) / double(far.size());
  }
  if (ranking_out) *ranking_out = ranking;
  return m;
}

void ExperimentGrid::validate() const {
  if (budgets.empty() || kernels.empty() || acquisitions.empty() || seeds.empty()) {
    throw Error(ErrorCode::invalid_argument, "experiment grid has an empty axis");
  }
  if (warm_start_m < 0) {
    throw Error(ErrorCode::invalid_argument, "warm_start_m must be >= 0");
  }
  for (int b : budgets) {
    if (b < warm_start_m || b < 1) {
      throw Error(ErrorCode::invalid_argument,
                  "budget " + std::to_string(b) + " is below warm_start_m");
    }
  }
  for (const auto& k : kernels) k.validate();
}

std::string kernel_label(const KernelSpec<double>& spec) {
  if (spec.family != KernelFamily::matern) return std::string(to_string(spec.family));
  char buf[32];
  std::snprintf(buf, sizeof buf, "matern%g", spec.nu);
  return buf;
}

const GridMedian& GridReport::cell(int budget, const std::string& kernel,
                                   AcquisitionKind acquisition) const {
  for (const auto& m : medians) {
    if (m.budget == budget && m.kernel == kernel && m.acquisition == acquisition) {
      return m;
    }
  }
  throw Error(ErrorCode::invalid_argument, "no grid cell " + std::to_string(budget) +
                                               "/" + kernel + "/" +
                                               std::string(to_string(acquisition)));
}

GridReport run_grid(const ExperimentGrid& grid, const LandscapeSpec& spec,
                    unsigned threads) {
  grid.validate();
  spec.validate();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());

  std::vector<Benchmark> benches(grid.seeds.size());
  GridReport report;
  for (int b : grid.budgets) {
    for (const auto& k : grid.kernels) {
      for (auto a : grid.acquisitions) {
        for (auto s : grid.seeds) report.rows.push_back({b, kernel_label(k), a, s, {}, {}});
      }
    }
  }
  const std::size_t per_budget = grid.kernels.size() * grid.acquisitions.size() *
                                 grid.seeds.size();
  const std::size_t per_kernel = grid.acquisitions.size() * grid.seeds.size();

  const auto parallel_for = [&](std::size_t n, auto&& body) {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    const auto work = [&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < std::min<std::size_t>(threads, n); ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  };

  parallel_for(grid.seeds.size(), [&](std::size_t i) {
    LandscapeSpec s = spec;
    s.seed = grid.seeds[i];
    benches[i] = generate_benchmark(s);
  });
  parallel_for(report.rows.size(), [&](std::size_t i) {
    auto& row = report.rows[i];
    EngineConfig cfg = grid.base;
    cfg.warm_start_m = grid.warm_start_m;
    cfg.active_steps_t = row.budget - grid.warm_start_m;
    cfg.kernel = grid.kernels[(i % per_budget) / per_kernel];
    cfg.acquisition.kind = row.acquisition;
    cfg.acquisition.rng_seed = row.seed;
    row.metrics = run_cell(benches[i % grid.seeds.size()], cfg, &row.ranking);
    if (row.ranking.entries.size() > kGridRunDepth) {
      row.ranking.entries.resize(kGridRunDepth);
    }
  });
  for (const auto& bench : benches) {
    if (report.qrels.has_query(bench.query.query_id)) continue;
    for (const auto& [pid, grade] : bench.qrels.judged(bench.query.query_id)) {
      report.qrels.add(bench.query.query_id, pid, grade);
    }
  }

  for (std::size_t start = 0; start < report.rows.size(); start += grid.seeds.size()) {
    const auto& first = report.rows[start];
    GridMedian med{first.budget, first.kernel, first.acquisition, grid.seeds.size(), {}};
    const auto column = [&](auto member) {
      std::vector<double> v;
      for (std::size_t i = start; i < start + grid.seeds.size(); ++i) {
        v.push_back(double(report.rows[i].metrics.*member));
      }
      return median_of(std::move(v));
    };
    med.median.ndcg10 = column(&CellMetrics::ndcg10);
    med.median.ndcg50 = column(&CellMetrics::ndcg50);
    med.median.recall10 = column(&CellMetrics::recall10);
    med.median.recall50 = column(&CellMetrics::recall50);
    med.median.far_recall50 = column(&CellMetrics::far_recall50);
    med.median.spent = int(std::lround(column(&CellMetrics::spent)));
    med.median.budget = first.budget;
    report.medians.push_back(med);
  }
  return report;
}

void write_grid_rows(std::ostream& out, const GridReport& report) {
  out << "budget\tkernel\tacquisition\tseed\t" << kMetricColumns << '\n';
  for (const auto& r : report.rows) {
    out << r.budget << '\t' << r.kernel << '\t' << to_string(r.acquisition) << '\t'
        << r.seed << '\t';
    write_metrics(out, r.metrics);
    out << '\n';
  }
}

void write_grid_medians(std::ostream& out, const GridReport& report) {
  out << "budget\tkernel\tacquisition\truns\t" << kMetricColumns << '\n';
  for (const auto& m : report.medians) {
    out << m.budget << '\t' << m.kernel << '\t' << to_string(m.acquisition) << '\t'
        << m.runs << '\t';
    write_metrics(out, m.median);
    out << '\n';
  }
}

void write_budget_curves(std::ostream& out, const GridReport& report) {
  std::vector<const GridMedian*> sorted;
  for (const auto& m : report.medians) sorted.push_back(&m);
  std::stable_sort(sorted.begin(), sorted.end(), [](const GridMedian* a, const GridMedian* b) {
    if (a->kernel != b->kernel) return a->kernel < b->kernel;
    if (a->acquisition != b->acquisition) return a->acquisition < b->acquisition;
    return a->budget < b->budget;
  });
  out << "curve\tbudget\t" << kMetricColumns << '\n';
  for (const auto* m : sorted) {
    out << m->kernel << '/' << to_string(m->acquisition) << '\t' << m->budget << '\t';
    write_metrics(out, m->median);
    out << '\n';
  }
}

LandscapeSpec landscape_from_key_values(const KeyValues& kv) {
  LandscapeSpec spec;
  std::map<std::size_t, ComponentSpec> comps;
  const auto count = [](const std::string& key, const std::string& value) {
    const auto v = parse_integer(key, value);
    if (v < 0) throw Error(ErrorCode::invalid_argument, key + " must be >= 0");
    return std::size_t(v);
  };
  for (const auto& [key, value] : kv) {
    if (key.rfind("component.", 0) == 0) {
      const auto dot = key.find('.', 10);
      if (dot == std::string::npos) {
        throw Error(ErrorCode::invalid_argument, "bad landscape key " + key);
      }
      const std::size_t idx = count(key, key.substr(10, dot - 10));
      const std::string field = key.substr(dot + 1);
      auto& c = comps[idx];
      if (field == "width") {
        c.width = parse_real(key, value);
      } else if (field == "near_query") {
        c.near_query = parse_bool(key, value);
      } else if (field == "cluster_size") {
        c.cluster_size = count(key, value);
      } else if (field == "query_similarity") {
        c.query_similarity = parse_real(key, value);
      } else if (field == "topic") {
        c.topic = count(key, value);
      } else if (field == "center") {
        const auto parts = split_list(value);
        VectorXd v(static_cast<Eigen::Index>(parts.size()));
        for (std::size_t i = 0; i < parts.size(); ++i) {
          v[Eigen::Index(i)] = parse_real(key, parts[i]);
        }
        c.center = v;
      } else {
        throw Error(ErrorCode::invalid_argument, "unknown landscape key " + key);
      }
    } else if (key == "dim") {
      spec.dim = Eigen::Index(count(key, value));
    } else if (key == "n_passages") {
      spec.n_passages = count(key, value);
    } else if (key == "query_offset") {
      spec.query_offset = parse_real(key, value);
    } else if (key == "component_spread") {
      spec.component_spread = parse_real(key, value);
    } else if (key == "background_topics") {
      spec.background_topics = count(key, value);
    } else if (key == "topic_radius") {
      spec.topic_radius = parse_real(key, value);
    } else if (key == "scatter_fraction") {
      spec.scatter_fraction = parse_real(key, value);
    } else if (key == "seed") {
      spec.seed = count(key, value);
    } else if (key == "logit_noise") {
      spec.logit_noise = parse_real(key, value);
    } else if (key == "labels") {
      spec.labels.k = int(count(key, value));
    } else {
      throw Error(ErrorCode::invalid_argument, "unknown landscape key " + key);
    }
  }
  if (comps.empty()) {
    const auto seed = spec.seed;
    auto std_spec = standard_landscape(seed);
    spec.components = std_spec.components;
  } else {
    std::size_t expect = 0;
    for (const auto& [idx, c] : comps) {
      if (idx != expect++) {
        throw Error(ErrorCode::invalid_argument,
                    "landscape components must be numbered 0, 1, ...");
      }
      spec.components.push_back(c);
    }
  }
  spec.validate();
  return spec;
}

LandscapeSpec load_landscape_spec(const std::string& path) {
  return landscape_from_key_values(load_key_values(path));
}

ExperimentGrid grid_from_key_values(const KeyValues& kv) {
  ExperimentGrid grid;
  for (const auto& [key, value] : kv) {
    if (key == "budgets") {
      grid.budgets.clear();
      for (const auto& b : split_list(value)) grid.budgets.push_back(int(parse_integer(key, b)));
    } else if (key == "kernels") {
      grid.kernels.clear();
      for (const auto& k : split_list(value)) grid.kernels.push_back(parse_kernel_label(k));
    } else if (key == "acquisitions") {
      grid.acquisitions.clear();
      for (const auto& a : split_list(value)) grid.acquisitions.push_back(parse_acquisition_kind(a));
    } else if (key == "seeds") {
      grid.seeds.clear();
      const auto range = value.find("..");
      if (range != std::string::npos) {
        const auto lo = parse_integer(key, value.substr(0, range));
        const auto hi = parse_integer(key, value.substr(range + 2));
        if (lo < 0 || hi < lo) throw Error(ErrorCode::invalid_argument, "bad seed range " + value);
        for (auto s = lo; s <= hi; ++s) grid.seeds.push_back(std::uint64_t(s));
      } else {
        for (const auto& s : split_list(value)) {
          const auto v = parse_integer(key, s);
          if (v < 0) throw Error(ErrorCode::invalid_argument, "seeds must be >= 0");
          grid.seeds.push_back(std::uint64_t(v));
        }
      }
    } else if (key == "warm_start_m") {
      grid.warm_start_m = int(parse_integer(key, value));
    } else if (!apply_engine_setting(grid.base, key, value)) {
      throw Error(ErrorCode::invalid_argument, "unknown grid key " + key);
    }
  }
  grid.validate();
  return grid;
}

ExperimentGrid load_experiment_grid(const std::string& path) {
  return grid_from_key_values(load_key_values(path));
}

}  // namespace activerank
