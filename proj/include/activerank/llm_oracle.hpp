#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "activerank/oracle.hpp"

namespace activerank {

/// Pointwise 0-3 relevance prompt. `{query}` and `{passage}` are replaced
/// verbatim.
extern const std::string_view kScoringPromptTemplate;

struct OracleConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string prompt_template = std::string(kScoringPromptTemplate);
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{1000};
  double backoff_factor = 2.0;
  double missing_logit_fill = -100.0;
  int top_logprobs = 5;
  std::string api_key_env = "ORACLE_API_KEY";

  void validate() const;
};

struct HttpRequest {
  std::string url;
  std::string body;
  std::map<std::string, std::string> headers;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Throws Error(oracle_transport) on connection failure or timeout.
using HttpTransport = std::function<HttpResponse(const HttpRequest&)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

HttpTransport make_http_transport(std::chrono::milliseconds timeout);

std::string render_prompt(std::string_view tmpl, std::string_view query,
                          std::string_view passage);

/// Chat-completions request body: one user message, temperature 0,
/// first-token log-probabilities with top_logprobs alternatives.
std::string build_request_body(const OracleConfig& cfg, std::string_view prompt);

struct LabelEvidence {
  // Per-label logits, missing labels filled; absent when no label token was
  // among the returned alternatives.
  std::optional<std::vector<double>> logits;
  // Integer parsed from the generated text, when it is a valid label.
  std::optional<int> parsed_label;
};

/// Extracts label evidence from a chat-completions response. A label token
/// matches when its whitespace-stripped text equals the label digit; the
/// first match per label wins.
LabelEvidence parse_label_evidence(std::string_view response_body,
                                   const RelevanceLabelSet& labels,
                                   double missing_logit_fill);

/// One oracle call: renders the prompt, posts it with retries and
/// exponential backoff, and scalarizes the label logits. Charges the ledger
/// exactly once on success and not at all on failure.
RelevanceScore llm_score(const QueryRecord& query, std::string_view passage_text,
                         const OracleConfig& cfg, ScoringMode mode,
                         const RelevanceLabelSet& labels, BudgetLedger& ledger,
                         const HttpTransport& transport,
                         const Sleeper& sleep = {});

/// RelevanceOracle over an LLM endpoint; passage texts are looked up by id.
class LlmOracle : public RelevanceOracle {
 public:
  LlmOracle(OracleConfig cfg, std::unordered_map<std::string, std::string> texts,
            ScoringMode mode, RelevanceLabelSet labels,
            HttpTransport transport = {}, Sleeper sleep = {});

  RelevanceScore score(const QueryRecord& query, const PassageRef& passage,
                       BudgetLedger& ledger) override;

 private:
  OracleConfig cfg_;
  std::unordered_map<std::string, std::string> texts_;
  ScoringMode mode_;
  RelevanceLabelSet labels_;
  HttpTransport transport_;
  Sleeper sleep_;
};

/// Reads {"id": ..., "text": ...} lines.
std::unordered_map<std::string, std::string> load_passage_texts(
    const std::string& path);

}  // namespace activerank
