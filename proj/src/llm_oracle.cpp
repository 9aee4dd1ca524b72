#include "activerank/llm_oracle.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace activerank {

using nlohmann::json;

const std::string_view kScoringPromptTemplate =
    "Given a query and a list of passages, you must provide a score on an "
    "integer scale of 0 to 3 with the following meanings:\n"
    "0 = represent that the passage has nothing to do with the query,\n"
    "1 = represents that the passage seems related to the query but does not "
    "answer it,\n"
    "2 = represents that the passage has some answer for the query, but the "
    "answer may be a bit unclear, or hidden amongst extraneous information "
    "and\n"
    "3 = represents that the passage is dedicated to the query and contains "
    "the exact answer.\n"
    "Important Instruction: Assign category 1 if the passage is somewhat "
    "related to the topic but not completely, category 2 if passage presents "
    "something very important related to the entire topic but also has some "
    "extra information and category 3 if the passage only and entirely "
    "refers to the topic. If none of the above satisfies give it category 0.\n"
    "Query: {query}\n"
    "Passage: {passage}\n"
    "Split this problem into steps:\n"
    "Consider the underlying intent of the search.\n"
    "Measure how well the content matches a likely intent of the query (M).\n"
    "Measure how trustworthy the passage is (T).\n"
    "Consider the aspects above and the relative importance of each, and "
    "decide on a final score (O). Final score must be an integer value only.\n"
    "Do not provide any code or reasoning in result. Provide only the score "
    "without any explanation.\n"
    "##final score:";

namespace {

std::string strip(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw Error(ErrorCode::invalid_argument, "bad endpoint URL '" + url + "'");
  }
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

void OracleConfig::validate() const {
  if (prompt_template.find("{query}") == std::string::npos ||
      prompt_template.find("{passage}") == std::string::npos) {
    throw Error(ErrorCode::invalid_argument,
                "prompt template must contain {query} and {passage}");
  }
  if (max_retries < 0) {
    throw Error(ErrorCode::invalid_argument, "max_retries must be >= 0");
  }
  if (top_logprobs < 1) {
    throw Error(ErrorCode::invalid_argument, "top_logprobs must be >= 1");
  }
  if (!std::isfinite(missing_logit_fill)) {
    throw Error(ErrorCode::invalid_argument, "missing_logit_fill must be finite");
  }
}

HttpTransport make_http_transport(std::chrono::milliseconds timeout) {
  return [timeout](const HttpRequest& req) -> HttpResponse {
    const auto url = split_url(req.url);
    httplib::Client client(url.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs =
        std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    for (const auto& [k, v] : req.headers) headers.emplace(k, v);
    auto res = client.Post(url.path, headers, req.body, "application/json");
    if (!res) {
      throw Error(ErrorCode::oracle_transport,
                  "request to " + req.url + " failed: " +
                      httplib::to_string(res.error()));
    }
    return {res->status, res->body};
  };
}

std::string render_prompt(std::string_view tmpl, std::string_view query,
                          std::string_view passage) {
  std::string out;
  out.reserve(tmpl.size() + query.size() + passage.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    if (tmpl.compare(pos, 7, "{query}") == 0) {
      out.append(query);
      pos += 7;
    } else if (tmpl.compare(pos, 9, "{passage}") == 0) {
      out.append(passage);
      pos += 9;
    } else {
      out.push_back(tmpl[pos++]);
    }
  }
  return out;
}

std::string build_request_body(const OracleConfig& cfg, std::string_view prompt) {
  json body;
  body["model"] = cfg.model;
  body["messages"] = json::array({{{"role", "user"}, {"content", std::string(prompt)}}});
  body["temperature"] = 0;
  body["max_tokens"] = 1;
  body["logprobs"] = true;
  body["top_logprobs"] = cfg.top_logprobs;
  return body.dump();
}

LabelEvidence parse_label_evidence(std::string_view response_body,
                                   const RelevanceLabelSet& labels,
                                   double missing_logit_fill) {
  json doc;
  try {
    doc = json::parse(response_body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::oracle_format,
                std::string("oracle response is not JSON: ") + e.what());
  }
  LabelEvidence out;
  if (!doc.contains("choices") || !doc["choices"].is_array() ||
      doc["choices"].empty()) {
    return out;
  }
  const json& choice = doc["choices"][0];

  std::vector<std::pair<std::string, double>> alternatives;
  if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
      choice["logprobs"].contains("content") &&
      choice["logprobs"]["content"].is_array() &&
      !choice["logprobs"]["content"].empty()) {
    const json& first = choice["logprobs"]["content"][0];
    if (first.contains("top_logprobs") && first["top_logprobs"].is_array()) {
      for (const auto& alt : first["top_logprobs"]) {
        if (alt.contains("token") && alt["token"].is_string() &&
            alt.contains("logprob") && alt["logprob"].is_number()) {
          alternatives.emplace_back(alt["token"].get<std::string>(),
                                    alt["logprob"].get<double>());
        }
      }
    }
    if (first.contains("token") && first["token"].is_string() &&
        first.contains("logprob") && first["logprob"].is_number()) {
      alternatives.emplace_back(first["token"].get<std::string>(),
                                first["logprob"].get<double>());
    }
  }

  std::vector<double> logits(std::size_t(labels.k), missing_logit_fill);
  std::vector<bool> found(std::size_t(labels.k), false);
  bool any = false;
  for (const auto& [token, logprob] : alternatives) {
    const std::string t = strip(token);
    for (int k = 0; k < labels.k; ++k) {
      if (!found[std::size_t(k)] && t == std::to_string(k)) {
        found[std::size_t(k)] = true;
        logits[std::size_t(k)] = logprob;
        any = true;
      }
    }
  }
  if (any) out.logits = std::move(logits);

  if (choice.contains("message") && choice["message"].is_object() &&
      choice["message"].contains("content") &&
      choice["message"]["content"].is_string()) {
    const std::string text = choice["message"]["content"].get<std::string>();
    static const std::regex digits(R"((\d+))");
    std::smatch m;
    if (std::regex_search(text, m, digits)) {
      const long v = std::strtol(m[1].str().c_str(), nullptr, 10);
      if (v >= 0 && v < labels.k) out.parsed_label = int(v);
    }
  }
  return out;
}

RelevanceScore llm_score(const QueryRecord& query, std::string_view passage_text,
                         const OracleConfig& cfg, ScoringMode mode,
                         const RelevanceLabelSet& labels, BudgetLedger& ledger,
                         const HttpTransport& transport, const Sleeper& sleep) {
  cfg.validate();
  labels.validate();
  if (passage_text.empty()) {
    throw Error(ErrorCode::invalid_argument, "llm_score: empty passage text");
  }
  // Guard first: an exhausted ledger issues no request.
  auto reservation = ledger.reserve();

  HttpRequest req;
  req.url = cfg.endpoint;
  req.body = build_request_body(cfg, render_prompt(cfg.prompt_template,
                                                   query.text, passage_text));
  req.headers["Content-Type"] = "application/json";
  if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key) {
    req.headers["Authorization"] = std::string("Bearer ") + key;
  }

  auto delay = cfg.backoff_base;
  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      if (sleep) {
        sleep(delay);
      } else {
        std::this_thread::sleep_for(delay);
      }
      delay = std::chrono::milliseconds(
          static_cast<long long>(double(delay.count()) * cfg.backoff_factor));
    }
    HttpResponse res;
    try {
      res = transport(req);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::oracle_transport) throw;
      last_error = e.what();
      continue;
    }
    if (res.status < 200 || res.status >= 300) {
      last_error = "HTTP status " + std::to_string(res.status);
      if (retryable(res.status)) continue;
      throw Error(ErrorCode::oracle_transport,
                  "oracle request rejected: " + last_error);
    }
    const auto evidence =
        parse_label_evidence(res.body, labels, cfg.missing_logit_fill);
    RelevanceScore score;
    if (evidence.logits) {
      score = scalarize(*evidence.logits, labels, mode);
    } else if (evidence.parsed_label) {
      std::vector<double> one_hot(std::size_t(labels.k), cfg.missing_logit_fill);
      one_hot[std::size_t(*evidence.parsed_label)] = 0.0;
      score = scalarize(one_hot, labels, mode);
    } else {
      throw Error(ErrorCode::oracle_format,
                  "oracle response has no label token and no parsable label");
    }
    reservation.commit();
    return score;
  }
  throw Error(ErrorCode::oracle_transport,
              "oracle request failed after " + std::to_string(cfg.max_retries) +
                  " retries: " + last_error);
}

LlmOracle::LlmOracle(OracleConfig cfg,
                     std::unordered_map<std::string, std::string> texts,
                     ScoringMode mode, RelevanceLabelSet labels,
                     HttpTransport transport, Sleeper sleep)
    : cfg_(std::move(cfg)), texts_(std::move(texts)), mode_(mode),
      labels_(labels), transport_(std::move(transport)),
      sleep_(std::move(sleep)) {
  cfg_.validate();
  if (!transport_) transport_ = make_http_transport(cfg_.timeout);
}

RelevanceScore LlmOracle::score(const QueryRecord& query,
                                const PassageRef& passage,
                                BudgetLedger& ledger) {
  const auto it = texts_.find(std::string(passage.id));
  if (it == texts_.end()) {
    throw Error(ErrorCode::invalid_argument,
                "no passage text for id=" + std::string(passage.id));
  }
  return llm_score(query, it->second, cfg_, mode_, labels_, ledger, transport_,
                   sleep_);
}

std::unordered_map<std::string, std::string> load_passage_texts(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::unordered_map<std::string, std::string> texts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error&) {
      throw Error(ErrorCode::parse,
                  "malformed passage record at line " + std::to_string(line_no));
    }
    if (!rec.contains("id") || !rec["id"].is_string() || !rec.contains("text") ||
        !rec["text"].is_string()) {
      throw Error(ErrorCode::parse,
                  "malformed passage record at line " + std::to_string(line_no));
    }
    texts[rec["id"].get<std::string>()] = rec["text"].get<std::string>();
  }
  return texts;
}

}  // namespace activerank
