#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "activerank/ranking.hpp"
#include "activerank/types.hpp"

namespace activerank {

/// Graded judgments keyed by (query id, passage id).
class Qrels {
 public:
  /// Throws on a negative grade or a repeated (query, passage) key.
  void add(const std::string& query_id, const std::string& passage_id, int grade);

  bool has_query(std::string_view query_id) const;
  /// Grade of a judged pair; unjudged pairs have no value.
  std::optional<int> grade(std::string_view query_id,
                           std::string_view passage_id) const;
  /// Judgments of one query; throws missing_query when absent.
  const std::map<std::string, int, std::less<>>& judged(
      std::string_view query_id) const;
  std::vector<std::string> query_ids() const;
  std::size_t size() const;

 private:
  std::map<std::string, std::map<std::string, int, std::less<>>, std::less<>> by_query_;
};

enum class GainKind { linear, exponential };

GainKind parse_gain_kind(std::string_view name);
std::string_view to_string(GainKind gain);

/// DCG over the top k with discount 1/log2(rank + 1), normalized by the
/// ideal DCG of the query's full judged set truncated at k. 0 when the
/// query has no positive judgment.
double ndcg_at_k(const RankedList& ranking, const Qrels& qrels, std::size_t k,
                 GainKind gain = GainKind::linear);

/// Fraction of passages graded >= threshold that appear in the top k; 0
/// when the query has none.
double recall_at_k(const RankedList& ranking, const Qrels& qrels, std::size_t k,
                   int relevance_threshold = 1);

/// Number of judgments graded >= threshold for a query.
std::size_t relevant_count(const Qrels& qrels, std::string_view query_id,
                           int relevance_threshold = 1);

struct EvalOptions {
  std::vector<std::size_t> cutoffs = {10, 50};
  GainKind gain = GainKind::linear;
  int relevance_threshold = 1;
};

struct QueryMetrics {
  std::string query_id;
  // "ndcg@k" and "recall@k" for every cutoff.
  std::map<std::string, double> values;
};

struct MetricReport {
  std::vector<std::string> metric_names;  // column order
  std::vector<QueryMetrics> per_query;    // queries that count toward means
  std::map<std::string, double> mean;
  std::vector<std::string> no_relevant;   // judged, but nothing relevant
  std::vector<std::string> missing;       // ranked, absent from qrels
};

MetricReport evaluate(const std::vector<RankedList>& runs, const Qrels& qrels,
                      const EvalOptions& opts = {});

/// Per-query rows, a "mean" row, then comment lines for skipped queries.
void write_report_tsv(std::ostream& out, const MetricReport& report);
void write_report_json(std::ostream& out, const MetricReport& report);

// TREC interchange: qrels lines "qid 0 docid grade", run lines
// "qid Q0 docid rank score tag".
Qrels read_qrels(std::istream& in);
Qrels load_qrels(const std::string& path);

/// Throws when ranks are not 1, 2, ... or scores increase within a query.
void write_trec_run(std::ostream& out, const std::vector<RankedList>& runs,
                    std::string_view tag);
/// Queries in first-appearance order; entries in file order.
std::vector<RankedList> read_trec_run(std::istream& in);
std::vector<RankedList> load_trec_run(const std::string& path);

}  // namespace activerank
