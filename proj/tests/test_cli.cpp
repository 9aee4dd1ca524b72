#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "activerank/cli.hpp"
#include "activerank/engine.hpp"
#include "activerank/evalkit.hpp"
#include "fixtures.hpp"

using namespace activerank;
namespace fs = std::filesystem;

namespace {

struct Result {
  int status;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = dispatch(args, out, err);
  return {status, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("activerank_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string read(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string vector_text(const VectorXd& v, char sep) {
  std::ostringstream out;
  out.precision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? std::string(1, sep) : "") << v[i];
  return out.str();
}

// Corpus, two queries and a landscape file with explicit centers.
struct Workspace {
  fs::path dir;
  Benchmark bench;

  explicit Workspace(const std::string& name)
      : dir(scratch(name)), bench(generate_benchmark(fixtures::small_landscape(6))) {
    write_embeddings(dir / "corpus.jsonl", bench.corpus, EmbeddingFormat::jsonl);
    std::ostringstream land;
    land << "dim = " << bench.landscape.dim() << "\n";
    for (std::size_t j = 0; j < bench.landscape.components.size(); ++j) {
      const auto& c = bench.landscape.components[j];
      land << "component." << j << ".center = " << vector_text(c.center, ',') << "\n";
      land << "component." << j << ".width = " << c.width << "\n";
      land << "component." << j << ".near_query = " << (c.near_query ? "true" : "false")
           << "\n";
      land << "component." << j << ".cluster_size = 0\n";
    }
    write(dir / "landscape.cfg", land.str());
    const RowMatrixXd q = bench.query.embedding.transpose();
    write_embeddings(dir / "q2.jsonl", CorpusIndex({"second"}, q), EmbeddingFormat::jsonl);
    write(dir / "queries.tsv", "first\tbeach towns\t[" +
                                   vector_text(bench.query.embedding, ',') +
                                   "]\nsecond\tsame again\tq2.jsonl\n");
  }

  std::vector<std::string> run_args(const std::string& out) const {
    return {"run",
            "--embeddings", (dir / "corpus.jsonl").string(),
            "--queries", (dir / "queries.tsv").string(),
            "--oracle", "synthetic",
            "--landscape", (dir / "landscape.cfg").string(),
            "--out", (dir / out).string()};
  }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("eval reports the hand-computed NDCG") {
  const auto dir = scratch("eval");
  write(dir / "qrels.txt", "q 0 a 3\nq 0 b 0\nq 0 c 2\n");
  write(dir / "run.trec", "q Q0 a 1 3 x\nq Q0 b 2 2 x\nq Q0 c 3 1 x\n");
  const auto r = call({"eval", "--run", (dir / "run.trec").string(), "--qrels",
                       (dir / "qrels.txt").string(), "--cutoffs", "3", "--out",
                       (dir / "m").string()});
  CHECK(r.status == 0);
  CHECK(r.out.find("q\t0.9386\t1.0000") != std::string::npos);
  CHECK(read(dir / "m" / "metrics.tsv") == r.out);
  CHECK(fs::exists(dir / "m" / "metrics.json"));
}

TEST_CASE("unknown flags print usage and fail") {
  const auto r = call({"eval", "--bogus", "1"});
  CHECK(r.status != 0);
  CHECK(r.err.rfind("error\tusage\t", 0) == 0);
  CHECK(r.err.find("--qrels") != std::string::npos);
  CHECK(call({}).status != 0);
  CHECK(call({"frobnicate"}).status != 0);
  CHECK(call({"--help"}).status == 0);
}

TEST_CASE("missing files give a one-line machine-readable error") {
  const auto r = call({"eval", "--run", "/nonexistent/run", "--qrels", "/nonexistent/q"});
  CHECK(r.status == 1);
  CHECK(r.err.rfind("error\tio\t", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

TEST_CASE("run with budget 50 and warm start 25") {
  Workspace ws("run");
  auto args = ws.run_args("out");
  for (std::string extra : {"--budget", "50", "--warm-start", "25", "--parallel", "2"}) {
    args.push_back(extra);
  }
  const auto r = call(args);
  REQUIRE_MESSAGE(r.status == 0, r.err);
  CHECK(r.out == "first\tspent\t50\nsecond\tspent\t50\n");
  std::ifstream trace_in(ws.dir / "out" / "trace.tsv");
  const auto first = read_trace(trace_in, "first");
  REQUIRE(first.size() == 50);
  const auto warm = std::count_if(first.begin(), first.end(), [](const TraceEvent& e) {
    return e.phase == TracePhase::warm_start;
  });
  CHECK(warm == 25);
  CHECK(first.back().cumulative_budget == 50);

  const auto runs = load_trec_run((ws.dir / "out" / "run.trec").string());
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].query_id == "first");
  CHECK(runs[0].size() == ws.bench.corpus.size());
  // Both queries share an embedding, so their rankings agree.
  for (std::size_t i = 0; i < runs[0].size(); ++i) {
    CHECK(runs[0].entries[i].id == runs[1].entries[i].id);
  }

  const auto echo = read(ws.dir / "out" / "config.echo");
  CHECK(echo.find("budget = 50") != std::string::npos);
  CHECK(echo.find("active_steps_t = 25") != std::string::npos);
  CHECK(echo.find("parallel = 2") != std::string::npos);
}

TEST_CASE("flags override the config file and the echo replays") {
  Workspace ws("layers");
  write(ws.dir / "run.cfg", "budget = 30\nwarm_start_m = 20\nkernel = matern\nbeta = 9\n");
  auto args = ws.run_args("a");
  for (std::string extra :
       std::vector<std::string>{"--config", (ws.dir / "run.cfg").string(), "--beta", "0.5"}) {
    args.push_back(extra);
  }
  const auto first = call(args);
  REQUIRE_MESSAGE(first.status == 0, first.err);
  const auto echo = read(ws.dir / "a" / "config.echo");
  CHECK(echo.find("kernel = matern") != std::string::npos);
  CHECK(echo.find("beta = 0.5") != std::string::npos);
  CHECK(echo.find("warm_start_m = 20") != std::string::npos);
  CHECK(echo.find("active_steps_t = 10") != std::string::npos);

  const auto replay = call({"run", "--config", (ws.dir / "a" / "config.echo").string(), "--out",
                            (ws.dir / "b").string()});
  REQUIRE_MESSAGE(replay.status == 0, replay.err);
  CHECK(read(ws.dir / "a" / "run.trec") == read(ws.dir / "b" / "run.trec"));
  CHECK(read(ws.dir / "a" / "trace.tsv") == read(ws.dir / "b" / "trace.tsv"));
}

TEST_CASE("run writes metrics when qrels are given") {
  Workspace ws("metrics");
  std::ostringstream qrels;
  for (const auto& qid : {"first", "second"}) {
    for (const auto& [pid, g] : ws.bench.qrels.judged(ws.bench.query.query_id)) {
      qrels << qid << " 0 " << pid << ' ' << g << '\n';
    }
  }
  write(ws.dir / "qrels.txt", qrels.str());
  auto args = ws.run_args("out");
  for (std::string extra :
       std::vector<std::string>{"--qrels", (ws.dir / "qrels.txt").string(), "--budget", "30"}) {
    args.push_back(extra);
  }
  const auto r = call(args);
  REQUIRE_MESSAGE(r.status == 0, r.err);
  const auto metrics = read(ws.dir / "out" / "metrics.tsv");
  CHECK(metrics.find("first\t") != std::string::npos);
  CHECK(metrics.find("mean\t") != std::string::npos);
}

TEST_CASE("run errors") {
  Workspace ws("errors");
  auto args = ws.run_args("out");
  args.push_back("--budget");
  args.push_back("10");
  const auto low = call(args);
  CHECK(low.status == 1);
  CHECK(low.err.rfind("error\tinvalid_argument\t", 0) == 0);

  write(ws.dir / "bad.cfg", "flavour = mint\n");
  auto bad = ws.run_args("out");
  bad.push_back("--config");
  bad.push_back((ws.dir / "bad.cfg").string());
  CHECK(call(bad).err.find("unknown setting flavour") != std::string::npos);

  write(ws.dir / "queries.tsv", "only\tone field short\n");
  CHECK(call(ws.run_args("out")).err.rfind("error\tparse\t", 0) == 0);

  CHECK(call({"run", "--out", (ws.dir / "x").string()}).err.find("embeddings is required") !=
        std::string::npos);
}

TEST_CASE("ingest converts and normalizes") {
  Workspace ws("ingest");
  const auto r = call({"ingest", "--embeddings", (ws.dir / "corpus.jsonl").string(), "--to",
                       "binary", "--normalize", "--out", (ws.dir / "bin").string()});
  REQUIRE_MESSAGE(r.status == 0, r.err);
  CHECK(r.out.rfind("passages\t300\tdim\t8\tnormalized\ttrue", 0) == 0);
  const auto back = load_embeddings(ws.dir / "bin" / "embeddings.bin", EmbeddingFormat::binary);
  CHECK(back.ids() == ws.bench.corpus.ids());
  CHECK((back.vectors() - ws.bench.corpus.vectors()).cwiseAbs().maxCoeff() < 1e-6);
  write(ws.dir / "broken.jsonl", "{\"id\":\"a\",\"vector\":[1,2]}\n{\"id\":\"b\",\"vector\":[1]}\n");
  const auto bad = call({"ingest", "--embeddings", (ws.dir / "broken.jsonl").string(), "--out",
                         (ws.dir / "bin2").string()});
  CHECK(bad.err.rfind("error\tdimension_mismatch\t", 0) == 0);
}

TEST_CASE("synth writes tables, curves and runs") {
  const auto dir = scratch("synth");
  write(dir / "land.cfg",
        "dim = 8\nn_passages = 300\nbackground_topics = 6\n"
        "component.0.near_query = true\ncomponent.0.cluster_size = 15\n"
        "component.1.cluster_size = 15\ncomponent.2.cluster_size = 15\n");
  write(dir / "grid.cfg", "budgets = 12\nkernels = rbf\nacquisitions = ucb,dense\nseeds = 0..1\n"
                          "warm_start_m = 10\n");
  const auto r = call({"synth", "--landscape", (dir / "land.cfg").string(), "--grid",
                       (dir / "grid.cfg").string(), "--budgets", "11,12", "--out",
                       (dir / "out").string(), "--parallel", "1"});
  REQUIRE_MESSAGE(r.status == 0, r.err);
  for (const auto* name : {"rows.tsv", "metrics.tsv", "curves.tsv", "qrels.txt", "config.echo"}) {
    CHECK(fs::exists(dir / "out" / name));
  }
  CHECK(fs::exists(dir / "out" / "runs" / "rbf_ucb_b11.trec"));
  CHECK(fs::exists(dir / "out" / "runs" / "rbf_dense_b12.trec"));
  const auto runs = load_trec_run((dir / "out" / "runs" / "rbf_ucb_b12.trec").string());
  CHECK(runs.size() == 2);
  const auto evaluated = call({"eval", "--run", (dir / "out" / "runs" / "rbf_ucb_b12.trec").string(),
                               "--qrels", (dir / "out" / "qrels.txt").string()});
  CHECK(evaluated.status == 0);
  CHECK(read(dir / "out" / "config.echo").find("budgets = 11,12") != std::string::npos);
}

TEST_CASE("query files") {
  const auto dir = scratch("queries");
  write(dir / "q.tsv", "# header\na\ttext\t[1, 2]\n\nb\tmore\t[3,4]\n");
  const auto qs = load_queries((dir / "q.tsv").string());
  REQUIRE(qs.size() == 2);
  CHECK(qs[1].embedding[1] == 4.0);
  write(dir / "dup.tsv", "a\tx\t[1]\na\ty\t[2]\n");
  CHECK_THROWS_AS(load_queries((dir / "dup.tsv").string()), Error);
  write(dir / "bad.tsv", "a\tx\t[1, \"z\"]\n");
  CHECK_THROWS_AS(load_queries((dir / "bad.tsv").string()), Error);
  write(dir / "ref.tsv", "a\tx\tmissing.jsonl\n");
  CHECK_THROWS_AS(load_queries((dir / "ref.tsv").string()), Error);
}

}  // TEST_SUITE
