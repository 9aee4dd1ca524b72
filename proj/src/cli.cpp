#include "activerank/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "activerank/config.hpp"
#include "activerank/engine.hpp"
#include "activerank/evalkit.hpp"
#include "activerank/harness.hpp"
#include "activerank/llm_oracle.hpp"

namespace activerank {

namespace fs = std::filesystem;

namespace {

struct Setting {
  const char* key;
  const char* flags;
  const char* help;
};

// Every run flag is also a config-file key; flags win over the file.
constexpr Setting kRunSettings[] = {
    {"embeddings", "--embeddings", "Passage embedding file"},
    {"format", "--format", "Embedding format: jsonl or binary (default by extension)"},
    {"queries", "--queries", "Query file"},
    {"oracle", "--oracle", "llm or synthetic"},
    {"passages", "--passages", "Passage texts as jsonl (llm oracle)"},
    {"landscape", "--landscape", "Landscape file with explicit centers (synthetic oracle)"},
    {"endpoint", "--endpoint", "Chat-completions URL"},
    {"model", "--model", "Model name sent to the endpoint"},
    {"timeout_ms", "--timeout-ms", "Per-request timeout"},
    {"max_retries", "--max-retries", "Retries per oracle call"},
    {"run_name", "--run-name", "Tag column of run.trec"},
    {"parallel", "--parallel", "Queries processed concurrently"},
    {"qrels", "--qrels", "Judgments; adds metrics.tsv"},
    {"budget", "--budget", "Oracle calls per query; sets active_steps_t"},
    {"warm_start_m", "--warm-start,--warm-start-m", "Dense top-M scored first"},
    {"active_steps_t", "--active-steps", "Active-learning steps"},
    {"alpha", "--alpha", "Observation noise variance"},
    {"kernel", "--kernel", "rbf, matern or linear"},
    {"length_scale", "--length-scale", "Initial length scale"},
    {"output_scale", "--output-scale", "Initial output scale"},
    {"nu", "--nu", "Matern smoothness: 0.5, 1.5 or 2.5"},
    {"acquisition", "--acquisition", "ucb, ei, pi, ts, random or dense"},
    {"beta", "--beta", "UCB exploration weight"},
    {"xi", "--xi", "EI/PI margin"},
    {"ts_candidate_cap", "--ts-candidate-cap", "Thompson sampling candidate cap"},
    {"seed", "--seed", "Acquisition seed"},
    {"include_query_in_best", "--include-query-in-best", "Count the query pseudo-observation in f*"},
    {"scoring_mode", "--scoring,--scoring-mode", "er or pr"},
    {"labels", "--labels", "Number of relevance labels"},
    {"optimize_hyperparameters", "--optimize-hyperparameters", "true or false"},
    {"normalize", "--normalize", "true or false"},
    {"hyperopt_learning_rate", "--hyperopt-learning-rate", "Hyperparameter step size"},
    {"hyperopt_max_steps", "--hyperopt-max-steps", "Hyperparameter steps per fit"},
    {"hyperopt_grad_tolerance", "--hyperopt-grad-tolerance", "Hyperparameter stopping tolerance"},
};

constexpr Setting kSynthSettings[] = {
    {"budgets", "--budgets", "Comma list of total budgets"},
    {"kernels", "--kernels", "Comma list, e.g. rbf,matern2.5,linear"},
    {"acquisitions", "--acquisitions", "Comma list of acquisition functions"},
    {"seeds", "--seeds", "Comma list or a..b"},
    {"warm_start_m", "--warm-start,--warm-start-m", "Dense top-M scored first"},
};

using Bound = std::map<std::string, std::string>;

void bind_settings(CLI::App* cmd, const Setting* begin, const Setting* end,
                   Bound& bound) {
  for (const Setting* s = begin; s != end; ++s) {
    cmd->add_option(s->flags, bound[s->key], s->help);
  }
}

// Config file first, then every flag that was given.
std::map<std::string, std::string> layered(const std::string& config_path,
                                           CLI::App* cmd, const Setting* begin,
                                           const Setting* end, Bound& bound) {
  std::map<std::string, std::string> merged;
  if (!config_path.empty()) {
    for (auto& [k, v] : load_key_values(config_path)) merged[k] = v;
  }
  for (const Setting* s = begin; s != end; ++s) {
    const std::string first(s->flags, std::find(s->flags, s->flags + std::strlen(s->flags), ','));
    if (cmd->get_option(first)->count() > 0) merged[s->key] = bound[s->key];
  }
  return merged;
}

EmbeddingFormat format_for(const std::string& path, const std::string& given) {
  if (!given.empty()) return parse_embedding_format(given);
  return fs::path(path).extension() == ".bin" ? EmbeddingFormat::binary
                                              : EmbeddingFormat::jsonl;
}

void write_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + tmp.string());
    out << content;
    if (!out) throw Error(ErrorCode::io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::io, "cannot move " + tmp.string() + ": " + ec.message());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::io, "cannot create output directory " + dir.string());
  }
}

int positive_int(const std::string& key, const std::string& value) {
  const auto v = parse_integer(key, value);
  if (v < 1 || v > 1'000'000) {
    throw Error(ErrorCode::invalid_argument, key + " must be a positive integer");
  }
  return int(v);
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\t', ' ');
  return s;
}

struct RunSettings {
  EngineConfig engine;
  OracleConfig oracle_cfg;
  std::string embeddings;
  std::string format;
  std::string queries;
  std::string oracle = "llm";
  std::string passages;
  std::string landscape;
  std::string run_name = "activerank";
  std::string qrels;
  unsigned parallel = 1;
  std::optional<int> budget;
};

RunSettings resolve_run(const std::map<std::string, std::string>& merged) {
  RunSettings rs;
  for (const auto& [key, value] : merged) {
    if (apply_engine_setting(rs.engine, key, value)) continue;
    if (key == "embeddings") {
      rs.embeddings = value;
    } else if (key == "format") {
      parse_embedding_format(value);
      rs.format = value;
    } else if (key == "queries") {
      rs.queries = value;
    } else if (key == "oracle") {
      if (value != "llm" && value != "synthetic") {
        throw Error(ErrorCode::invalid_argument, "oracle must be llm or synthetic");
      }
      rs.oracle = value;
    } else if (key == "passages") {
      rs.passages = value;
    } else if (key == "landscape") {
      rs.landscape = value;
    } else if (key == "endpoint") {
      rs.oracle_cfg.endpoint = value;
    } else if (key == "model") {
      rs.oracle_cfg.model = value;
    } else if (key == "timeout_ms") {
      rs.oracle_cfg.timeout = std::chrono::milliseconds(positive_int(key, value));
    } else if (key == "max_retries") {
      const auto v = parse_integer(key, value);
      if (v < 0 || v > 100) {
        throw Error(ErrorCode::invalid_argument, "max_retries must be in [0, 100]");
      }
      rs.oracle_cfg.max_retries = int(v);
    } else if (key == "run_name") {
      if (value.empty() || value.find_first_of(" \t") != std::string::npos) {
        throw Error(ErrorCode::invalid_argument, "run_name must be one non-empty word");
      }
      rs.run_name = value;
    } else if (key == "qrels") {
      rs.qrels = value;
    } else if (key == "parallel") {
      rs.parallel = unsigned(positive_int(key, value));
    } else if (key == "budget") {
      rs.budget = positive_int(key, value);
    } else {
      throw Error(ErrorCode::invalid_argument, "unknown setting " + key);
    }
  }
  if (rs.budget) {
    if (*rs.budget < rs.engine.warm_start_m) {
      throw Error(ErrorCode::invalid_argument,
                  "budget " + std::to_string(*rs.budget) + " is below warm_start_m " +
                      std::to_string(rs.engine.warm_start_m));
    }
    rs.engine.active_steps_t = *rs.budget - rs.engine.warm_start_m;
  }
  if (rs.embeddings.empty()) throw Error(ErrorCode::invalid_argument, "embeddings is required");
  if (rs.queries.empty()) throw Error(ErrorCode::invalid_argument, "queries is required");
  if (rs.oracle == "llm" && rs.passages.empty()) {
    throw Error(ErrorCode::invalid_argument, "the llm oracle needs passages");
  }
  if (rs.oracle == "synthetic" && rs.landscape.empty()) {
    throw Error(ErrorCode::invalid_argument, "the synthetic oracle needs landscape");
  }
  rs.engine.validate();
  rs.oracle_cfg.validate();
  return rs;
}

KeyValues echo_run(const RunSettings& rs) {
  KeyValues kv = {
      {"embeddings", rs.embeddings},
      {"format", std::string(to_string(format_for(rs.embeddings, rs.format)))},
      {"queries", rs.queries},
      {"oracle", rs.oracle},
  };
  if (rs.oracle == "llm") {
    kv.emplace_back("passages", rs.passages);
    kv.emplace_back("endpoint", rs.oracle_cfg.endpoint);
    kv.emplace_back("model", rs.oracle_cfg.model);
    kv.emplace_back("timeout_ms", std::to_string(rs.oracle_cfg.timeout.count()));
    kv.emplace_back("max_retries", std::to_string(rs.oracle_cfg.max_retries));
  } else {
    kv.emplace_back("landscape", rs.landscape);
  }
  kv.emplace_back("run_name", rs.run_name);
  if (!rs.qrels.empty()) kv.emplace_back("qrels", rs.qrels);
  kv.emplace_back("parallel", std::to_string(rs.parallel));
  kv.emplace_back("budget", std::to_string(rs.engine.budget()));
  for (auto& entry : engine_settings(rs.engine)) kv.push_back(std::move(entry));
  return kv;
}

std::unique_ptr<RelevanceOracle> make_oracle(const RunSettings& rs,
                                             const CorpusIndex& corpus) {
  if (rs.oracle == "llm") {
    return std::make_unique<LlmOracle>(rs.oracle_cfg, load_passage_texts(rs.passages),
                                       rs.engine.scoring_mode, rs.engine.labels);
  }
  const LandscapeSpec spec = load_landscape_spec(rs.landscape);
  if (spec.labels.k != rs.engine.labels.k) {
    throw Error(ErrorCode::invalid_argument, "landscape labels differ from the run's labels");
  }
  Landscape landscape;
  landscape.labels = spec.labels;
  for (const auto& c : spec.components) {
    if (!c.center) {
      throw Error(ErrorCode::invalid_argument,
                  "every landscape component needs a center for run");
    }
    if (c.center->size() != corpus.dim()) {
      throw Error(ErrorCode::dimension_mismatch,
                  "landscape center dimension " + std::to_string(c.center->size()) +
                      " != corpus dimension " + std::to_string(corpus.dim()));
    }
    landscape.components.push_back({normalized(*c.center, "landscape center"),
                                     c.width, c.near_query});
  }
  return std::make_unique<SyntheticOracle>(std::move(landscape), rs.engine.scoring_mode,
                                           spec.logit_noise, spec.seed);
}

int cmd_run(const RunSettings& rs, const fs::path& out_dir, std::ostream& out) {
  const auto queries = load_queries(rs.queries);
  CorpusIndex corpus = load_embeddings(rs.embeddings, format_for(rs.embeddings, rs.format));
  if (rs.engine.normalize && !corpus.normalized()) corpus = normalize(corpus);
  auto oracle = make_oracle(rs, corpus);
  std::optional<Qrels> qrels;
  if (!rs.qrels.empty()) qrels = load_qrels(rs.qrels);
  ensure_dir(out_dir);

  struct Slot {
    RankedList ranking;
    std::string trace;
    int spent = 0;
    std::exception_ptr error;
  };
  std::vector<Slot> slots(queries.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < queries.size(); i = next++) {
      try {
        auto result = run_query(queries[i], corpus, *oracle, rs.engine);
        std::ostringstream trace;
        write_trace(trace, result.state.trace, queries[i].query_id);
        slots[i].ranking = std::move(result.ranking);
        slots[i].trace = trace.str();
        slots[i].spent = result.state.ledger.spent();
      } catch (...) {
        slots[i].error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t workers = std::min<std::size_t>(rs.parallel, queries.size());
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  for (const auto& s : slots) {
    if (s.error) std::rethrow_exception(s.error);
  }

  std::vector<RankedList> runs;
  std::ostringstream trace;
  write_trace_header(trace);
  for (auto& s : slots) {
    trace << s.trace;
    runs.push_back(std::move(s.ranking));
  }
  std::ostringstream run_text;
  write_trec_run(run_text, runs, rs.run_name);
  std::ostringstream echo;
  write_key_values(echo, echo_run(rs));

  write_atomically(out_dir / "config.echo", echo.str());
  write_atomically(out_dir / "trace.tsv", trace.str());
  write_atomically(out_dir / "run.trec", run_text.str());
  if (qrels) {
    std::ostringstream metrics;
    write_report_tsv(metrics, evaluate(runs, *qrels));
    write_atomically(out_dir / "metrics.tsv", metrics.str());
  }
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out << queries[i].query_id << "\tspent\t" << slots[i].spent << '\n';
  }
  return 0;
}

std::vector<std::size_t> parse_cutoffs(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    const auto v = parse_integer("cutoffs", part);
    if (v < 1) throw Error(ErrorCode::invalid_argument, "cutoffs must be >= 1");
    out.push_back(std::size_t(v));
  }
  if (out.empty()) throw Error(ErrorCode::invalid_argument, "no cutoffs given");
  return out;
}

std::string file_safe(std::string s) {
  for (char& c : s) {
    if (c == '/' || c == ' ') c = '_';
  }
  return s;
}

int cmd_synth(const ExperimentGrid& grid, const LandscapeSpec& spec, unsigned threads,
              const KeyValues& echo, const fs::path& out_dir, std::ostream& out) {
  const GridReport report = run_grid(grid, spec, threads);
  ensure_dir(out_dir);
  ensure_dir(out_dir / "runs");

  std::ostringstream rows, medians, curves, qrels, cfg;
  write_grid_rows(rows, report);
  write_grid_medians(medians, report);
  write_budget_curves(curves, report);
  for (const auto& q : report.qrels.query_ids()) {
    for (const auto& [pid, grade] : report.qrels.judged(q)) {
      qrels << q << " 0 " << pid << ' ' << grade << '\n';
    }
  }
  write_key_values(cfg, echo);

  std::map<std::string, std::vector<RankedList>> runs;
  for (const auto& row : report.rows) {
    const std::string name = row.kernel + "_" + std::string(to_string(row.acquisition)) +
                             "_b" + std::to_string(row.budget);
    runs[name].push_back(row.ranking);
  }
  for (const auto& [name, lists] : runs) {
    std::ostringstream text;
    write_trec_run(text, lists, name);
    write_atomically(out_dir / "runs" / (file_safe(name) + ".trec"), text.str());
  }
  write_atomically(out_dir / "rows.tsv", rows.str());
  write_atomically(out_dir / "metrics.tsv", medians.str());
  write_atomically(out_dir / "curves.tsv", curves.str());
  write_atomically(out_dir / "qrels.txt", qrels.str());
  write_atomically(out_dir / "config.echo", cfg.str());
  out << medians.str();
  return 0;
}

}  // namespace

std::vector<QueryRecord> load_queries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open queries " + path);
  const fs::path base = fs::path(path).parent_path();
  std::vector<QueryRecord> out;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto where = [&] { return "queries line " + std::to_string(line_no); };
    std::vector<std::string> f;
    std::stringstream fields(line);
    std::string part;
    while (std::getline(fields, part, '\t')) f.push_back(part);
    if (f.size() != 3 || f[0].empty()) {
      throw Error(ErrorCode::parse, where() + ": expected id, text and embedding");
    }
    if (!seen.emplace(f[0], out.size()).second) {
      throw Error(ErrorCode::duplicate_id, where() + ": repeated query id " + f[0]);
    }
    QueryRecord q;
    q.query_id = f[0];
    q.text = f[1];
    const auto& ref = f[2];
    if (!ref.empty() && ref.front() == '[') {
      std::vector<double> values;
      try {
        values = nlohmann::json::parse(ref).get<std::vector<double>>();
      } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::parse, where() + ": bad inline embedding");
      }
      if (values.empty()) throw Error(ErrorCode::parse, where() + ": empty embedding");
      q.embedding = Eigen::Map<const VectorXd>(values.data(), Eigen::Index(values.size()));
      if (!q.embedding.allFinite()) {
        throw Error(ErrorCode::parse, where() + ": non-finite embedding");
      }
    } else {
      fs::path p(ref);
      if (p.is_relative()) p = base / p;
      const CorpusIndex file = load_embeddings(p, format_for(p.string(), ""));
      auto idx = file.find(q.query_id);
      if (!idx && file.size() == 1) idx = 0;
      if (!idx) {
        throw Error(ErrorCode::missing_query,
                    where() + ": no embedding for " + q.query_id + " in " + p.string());
      }
      q.embedding = file.embedding(*idx);
    }
    out.push_back(std::move(q));
  }
  if (out.empty()) throw Error(ErrorCode::invalid_argument, "no queries in " + path);
  return out;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Budgeted passage reranking with a Gaussian-process surrogate",
               "activerank"};
  app.require_subcommand(1);

  std::string config_path, out_dir;

  auto* ingest = app.add_subcommand("ingest", "Validate and convert an embedding file");
  std::string in_path, in_format, to_format = "binary";
  bool do_normalize = false;
  ingest->add_option("--embeddings", in_path, "Input embedding file")->required();
  ingest->add_option("--format", in_format, "jsonl or binary (default by extension)");
  ingest->add_option("--to", to_format, "Output format: jsonl or binary");
  ingest->add_flag("--normalize", do_normalize, "Unit-normalize every vector");
  ingest->add_option("--out", out_dir, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Rank passages for every query in a query file");
  Bound run_bound;
  run->add_option("--config", config_path, "Key-value config file");
  run->add_option("--out", out_dir, "Output directory")->required();
  bind_settings(run, std::begin(kRunSettings), std::end(kRunSettings), run_bound);

  auto* eval = app.add_subcommand("eval", "Score a TREC run against qrels");
  std::string run_path, qrels_path, cutoffs = "10,50", gain = "linear";
  int threshold = 1;
  eval->add_option("--run", run_path, "TREC run file")->required();
  eval->add_option("--qrels", qrels_path, "TREC qrels file")->required();
  eval->add_option("--cutoffs", cutoffs, "Comma list of k");
  eval->add_option("--gain", gain, "linear or exponential");
  eval->add_option("--threshold", threshold, "Minimum relevant grade for recall");
  eval->add_option("--out", out_dir, "Also write metrics.tsv and metrics.json here");

  auto* synth = app.add_subcommand("synth", "Run the synthetic benchmark grid");
  Bound synth_bound;
  std::string landscape_path, grid_path;
  unsigned threads = 0;
  synth->add_option("--landscape", landscape_path, "Landscape file (default: standard)");
  synth->add_option("--grid", grid_path, "Grid file");
  synth->add_option("--parallel", threads, "Worker threads (0: all cores)");
  synth->add_option("--out", out_dir, "Output directory")->required();
  bind_settings(synth, std::begin(kSynthSettings), std::end(kSynthSettings), synth_bound);

  const auto fail = [&](std::string_view code, const std::string& message) {
    err << "error\t" << code << '\t' << one_line(message) << '\n';
  };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    fail("usage", e.what());
    CLI::App* shown = &app;
    for (auto* sub : app.get_subcommands()) shown = sub;
    err << shown->help();
    return 2;
  }

  try {
    if (ingest->parsed()) {
      CorpusIndex corpus = load_embeddings(in_path, format_for(in_path, in_format));
      if (do_normalize) corpus = normalize(corpus);
      const auto fmt = parse_embedding_format(to_format);
      ensure_dir(out_dir);
      const fs::path target = fs::path(out_dir) /
                              (fmt == EmbeddingFormat::binary ? "embeddings.bin"
                                                              : "embeddings.jsonl");
      write_embeddings(target, corpus, fmt);
      out << "passages\t" << corpus.size() << "\tdim\t" << corpus.dim() << "\tnormalized\t"
          << (corpus.normalized() ? "true" : "false") << "\tpath\t" << target.string()
          << '\n';
      return 0;
    }
    if (run->parsed()) {
      const auto merged = layered(config_path, run, std::begin(kRunSettings),
                                  std::end(kRunSettings), run_bound);
      return cmd_run(resolve_run(merged), out_dir, out);
    }
    if (eval->parsed()) {
      EvalOptions opts;
      opts.cutoffs = parse_cutoffs(cutoffs);
      opts.gain = parse_gain_kind(gain);
      opts.relevance_threshold = threshold;
      const auto report = evaluate(load_trec_run(run_path), load_qrels(qrels_path), opts);
      std::ostringstream tsv;
      write_report_tsv(tsv, report);
      if (!out_dir.empty()) {
        ensure_dir(out_dir);
        std::ostringstream json;
        write_report_json(json, report);
        write_atomically(fs::path(out_dir) / "metrics.tsv", tsv.str());
        write_atomically(fs::path(out_dir) / "metrics.json", json.str());
      }
      out << tsv.str();
      return 0;
    }
    const auto merged = layered(grid_path, synth, std::begin(kSynthSettings),
                                std::end(kSynthSettings), synth_bound);
    KeyValues grid_kv(merged.begin(), merged.end());
    const ExperimentGrid grid = grid_from_key_values(grid_kv);
    const LandscapeSpec spec =
        landscape_path.empty() ? standard_landscape(0) : load_landscape_spec(landscape_path);
    grid_kv.insert(grid_kv.begin(),
                   {"landscape", landscape_path.empty() ? "standard" : landscape_path});
    return cmd_synth(grid, spec, threads, grid_kv, out_dir, out);
  } catch (const Error& e) {
    fail(to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    fail("internal", e.what());
  }
  return 1;
}

}  // namespace activerank
