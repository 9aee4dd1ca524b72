#include "activerank/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace activerank {

namespace {

std::vector<std::string> fields(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string f;
  while (in >> f) out.push_back(f);
  return out;
}

bool parse_int(const std::string& s, long long& out) {
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stoll(s, &used);
  } catch (const std::logic_error&) {
    return false;
  }
  return used == s.size();
}

double gain_of(int grade, GainKind gain) {
  return gain == GainKind::linear ? double(grade) : std::exp2(double(grade)) - 1.0;
}

std::string cutoff_name(const char* metric, std::size_t k) {
  return std::string(metric) + "@" + std::to_string(k);
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void require_cutoff(std::size_t k) {
  if (k < 1) throw Error(ErrorCode::invalid_argument, "cutoff k must be >= 1");
}

}  // namespace

void Qrels::add(const std::string& query_id, const std::string& passage_id,
                int grade) {
  if (grade < 0) {
    throw Error(ErrorCode::invalid_argument,
                "negative grade for " + query_id + "/" + passage_id);
  }
  if (!by_query_[query_id].emplace(passage_id, grade).second) {
    throw Error(ErrorCode::duplicate_id,
                "duplicate judgment for " + query_id + "/" + passage_id);
  }
}

bool Qrels::has_query(std::string_view query_id) const {
  return by_query_.find(query_id) != by_query_.end();
}

std::optional<int> Qrels::grade(std::string_view query_id,
                                std::string_view passage_id) const {
  const auto q = by_query_.find(query_id);
  if (q == by_query_.end()) return std::nullopt;
  const auto p = q->second.find(passage_id);
  if (p == q->second.end()) return std::nullopt;
  return p->second;
}

const std::map<std::string, int, std::less<>>& Qrels::judged(
    std::string_view query_id) const {
  const auto q = by_query_.find(query_id);
  if (q == by_query_.end()) {
    throw Error(ErrorCode::missing_query,
                "query " + std::string(query_id) + " has no judgments");
  }
  return q->second;
}

std::vector<std::string> Qrels::query_ids() const {
  std::vector<std::string> out;
  for (const auto& [q, _] : by_query_) out.push_back(q);
  return out;
}

std::size_t Qrels::size() const {
  std::size_t n = 0;
  for (const auto& [_, judged] : by_query_) n += judged.size();
  return n;
}

GainKind parse_gain_kind(std::string_view name) {
  if (name == "linear") return GainKind::linear;
  if (name == "exponential") return GainKind::exponential;
  throw Error(ErrorCode::invalid_argument, "unknown gain '" + std::string(name) + "'");
}

std::string_view to_string(GainKind gain) {
  return gain == GainKind::linear ? "linear" : "exponential";
}

double ndcg_at_k(const RankedList& ranking, const Qrels& qrels, std::size_t k,
                 GainKind gain) {
  require_cutoff(k);
  const auto& judged = qrels.judged(ranking.query_id);
  std::vector<int> grades;
  for (const auto& [_, g] : judged) {
    if (g > 0) grades.push_back(g);
  }
  if (grades.empty()) return 0.0;
  std::sort(grades.begin(), grades.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
    idcg += gain_of(grades[i], gain) / std::log2(double(i) + 2.0);
  }
  double dcg = 0.0;
  const std::size_t depth = std::min(k, ranking.entries.size());
  for (std::size_t i = 0; i < depth; ++i) {
    const auto it = judged.find(ranking.entries[i].id);
    if (it == judged.end() || it->second <= 0) continue;
    dcg += gain_of(it->second, gain) / std::log2(double(i) + 2.0);
  }
  return dcg / idcg;
}

std::size_t relevant_count(const Qrels& qrels, std::string_view query_id,
                           int relevance_threshold) {
  std::size_t n = 0;
  for (const auto& [_, g] : qrels.judged(query_id)) {
    if (g >= relevance_threshold) ++n;
  }
  return n;
}

double recall_at_k(const RankedList& ranking, const Qrels& qrels, std::size_t k,
                   int relevance_threshold) {
  require_cutoff(k);
  if (relevance_threshold < 1) {
    throw Error(ErrorCode::invalid_argument, "relevance threshold must be >= 1");
  }
  const auto& judged = qrels.judged(ranking.query_id);
  const std::size_t total = relevant_count(qrels, ranking.query_id, relevance_threshold);
  if (total == 0) return 0.0;
  std::size_t hits = 0;
  const std::size_t depth = std::min(k, ranking.entries.size());
  for (std::size_t i = 0; i < depth; ++i) {
    const auto it = judged.find(ranking.entries[i].id);
    if (it != judged.end() && it->second >= relevance_threshold) ++hits;
  }
  return double(hits) / double(total);
}

MetricReport evaluate(const std::vector<RankedList>& runs, const Qrels& qrels,
                      const EvalOptions& opts) {
  if (opts.cutoffs.empty()) {
    throw Error(ErrorCode::invalid_argument, "no metric cutoffs configured");
  }
  MetricReport report;
  for (std::size_t k : opts.cutoffs) {
    require_cutoff(k);
    report.metric_names.push_back(cutoff_name("ndcg", k));
  }
  for (std::size_t k : opts.cutoffs) report.metric_names.push_back(cutoff_name("recall", k));
  for (const auto& name : report.metric_names) report.mean[name] = 0.0;

  for (const auto& run : runs) {
    if (!qrels.has_query(run.query_id)) {
      report.missing.push_back(run.query_id);
      continue;
    }
    if (relevant_count(qrels, run.query_id, opts.relevance_threshold) == 0) {
      report.no_relevant.push_back(run.query_id);
      continue;
    }
    QueryMetrics m;
    m.query_id = run.query_id;
    for (std::size_t k : opts.cutoffs) {
      m.values[cutoff_name("ndcg", k)] = ndcg_at_k(run, qrels, k, opts.gain);
      m.values[cutoff_name("recall", k)] =
          recall_at_k(run, qrels, k, opts.relevance_threshold);
    }
    report.per_query.push_back(std::move(m));
  }
  if (!report.per_query.empty()) {
    for (const auto& name : report.metric_names) {
      double sum = 0.0;
      for (const auto& q : report.per_query) sum += q.values.at(name);
      report.mean[name] = sum / double(report.per_query.size());
    }
  }
  return report;
}

void write_report_tsv(std::ostream& out, const MetricReport& report) {
  out << "query_id";
  for (const auto& name : report.metric_names) out << '\t' << name;
  out << '\n';
  char buf[32];
  const auto row = [&](const std::string& label,
                       const std::map<std::string, double>& values) {
    out << label;
    for (const auto& name : report.metric_names) {
      std::snprintf(buf, sizeof buf, "%.4f", values.at(name));
      out << '\t' << buf;
    }
    out << '\n';
  };
  for (const auto& q : report.per_query) row(q.query_id, q.values);
  row("mean", report.mean);
  for (const auto& q : report.no_relevant) out << "# no relevant judgments: " << q << '\n';
  for (const auto& q : report.missing) out << "# not in qrels: " << q << '\n';
}

void write_report_json(std::ostream& out, const MetricReport& report) {
  nlohmann::ordered_json doc;
  doc["queries"] = report.per_query.size();
  doc["mean"] = report.mean;
  auto per = nlohmann::ordered_json::object();
  for (const auto& q : report.per_query) per[q.query_id] = q.values;
  doc["per_query"] = per;
  doc["no_relevant"] = report.no_relevant;
  doc["missing"] = report.missing;
  out << doc.dump(2) << '\n';
}

Qrels read_qrels(std::istream& in) {
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = fields(line);
    if (f.empty()) continue;
    long long grade = 0;
    if (f.size() != 4 || !parse_int(f[3], grade) || grade < 0 ||
        grade > 1'000'000) {
      throw Error(ErrorCode::parse,
                  "malformed qrels line " + std::to_string(line_no));
    }
    try {
      qrels.add(f[0], f[2], int(grade));
    } catch (const Error& e) {
      throw Error(ErrorCode::parse, "qrels line " + std::to_string(line_no) +
                                        ": " + e.what());
    }
  }
  return qrels;
}

Qrels load_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open qrels " + path);
  return read_qrels(in);
}

void write_trec_run(std::ostream& out, const std::vector<RankedList>& runs,
                    std::string_view tag) {
  for (const auto& run : runs) {
    for (std::size_t i = 0; i < run.entries.size(); ++i) {
      const auto& e = run.entries[i];
      if (e.rank != i + 1) {
        throw Error(ErrorCode::invalid_argument,
                    "run for " + run.query_id + ": rank " + std::to_string(e.rank) +
                        " at position " + std::to_string(i + 1));
      }
      if (i > 0 && e.score > run.entries[i - 1].score) {
        throw Error(ErrorCode::invalid_argument,
                    "run for " + run.query_id + ": score increases at rank " +
                        std::to_string(e.rank));
      }
    }
  }
  for (const auto& run : runs) {
    for (const auto& e : run.entries) {
      out << run.query_id << " Q0 " << e.id << ' ' << e.rank << ' '
          << real_text(e.score) << ' ' << tag << '\n';
    }
  }
}

std::vector<RankedList> read_trec_run(std::istream& in) {
  std::vector<RankedList> runs;
  std::unordered_map<std::string, std::size_t> slot;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = fields(line);
    if (f.empty()) continue;
    long long rank = 0;
    const auto bad = [&] {
      return Error(ErrorCode::parse, "malformed run line " + std::to_string(line_no));
    };
    if (f.size() != 6 || !parse_int(f[3], rank) || rank < 1) throw bad();
    double score = 0.0;
    try {
      std::size_t used = 0;
      score = std::stod(f[4], &used);
      if (used != f[4].size()) throw bad();
    } catch (const std::logic_error&) {
      throw bad();
    }
    auto [it, inserted] = slot.emplace(f[0], runs.size());
    if (inserted) runs.push_back({f[0], {}});
    auto& run = runs[it->second];
    if (!run.entries.empty() && std::size_t(rank) <= run.entries.back().rank) {
      throw Error(ErrorCode::parse, "run line " + std::to_string(line_no) +
                                        ": ranks must increase within a query");
    }
    run.entries.push_back({f[2], score, std::size_t(rank)});
  }
  return runs;
}

std::vector<RankedList> load_trec_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open run " + path);
  return read_trec_run(in);
}

}  // namespace activerank
