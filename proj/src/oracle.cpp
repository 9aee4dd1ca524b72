#include "activerank/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "activerank/rng.hpp"

namespace activerank {

namespace {

void require_logits(std::span<const double> logits,
                    const RelevanceLabelSet& labels) {
  labels.validate();
  if (logits.size() != std::size_t(labels.k)) {
    throw Error(ErrorCode::invalid_argument,
                "logit vector length " + std::to_string(logits.size()) +
                    " does not match label count " + std::to_string(labels.k));
  }
  for (double z : logits) {
    if (!std::isfinite(z)) {
      throw Error(ErrorCode::invalid_argument, "non-finite logit");
    }
  }
}

std::uint64_t hash_text(std::string_view s) {
  // FNV-1a; std::hash is not stable across standard libraries.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

std::string_view to_string(ScoringMode mode) {
  return mode == ScoringMode::er ? "er" : "pr";
}

ScoringMode parse_scoring_mode(std::string_view name) {
  if (name == "er") return ScoringMode::er;
  if (name == "pr") return ScoringMode::pr;
  throw Error(ErrorCode::invalid_argument,
              "unknown scoring mode '" + std::string(name) + "'");
}

RelevanceScore score_er(std::span<const double> logits,
                        const RelevanceLabelSet& labels) {
  require_logits(logits, labels);
  const double top = *std::max_element(logits.begin(), logits.end());
  double norm = 0.0;
  double weighted = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double w = std::exp(logits[k] - top);
    norm += w;
    weighted += w * double(k);
  }
  const double value = std::clamp(weighted / norm, 0.0, double(labels.max_label()));
  return {value, ScoringMode::er};
}

RelevanceScore score_pr(std::span<const double> logits,
                        const RelevanceLabelSet& labels) {
  require_logits(logits, labels);
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.size(); ++k) {
    if (logits[k] > logits[best]) best = k;
  }
  return {double(best), ScoringMode::pr};
}

RelevanceScore scalarize(std::span<const double> logits,
                         const RelevanceLabelSet& labels, ScoringMode mode) {
  return mode == ScoringMode::er ? score_er(logits, labels)
                                 : score_pr(logits, labels);
}

BudgetLedger::BudgetLedger(int total) : total_(total) {
  if (total < 0) {
    throw Error(ErrorCode::invalid_argument, "budget total must be >= 0");
  }
}

BudgetLedger::BudgetLedger(const BudgetLedger& other) {
  std::lock_guard lock(other.mu_);
  total_ = other.total_;
  spent_ = other.spent_;
}

BudgetLedger& BudgetLedger::operator=(const BudgetLedger& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  total_ = other.total_;
  spent_ = other.spent_;
  pending_ = 0;
  return *this;
}

int BudgetLedger::total() const {
  std::lock_guard lock(mu_);
  return total_;
}

int BudgetLedger::spent() const {
  std::lock_guard lock(mu_);
  return spent_;
}

int BudgetLedger::remaining() const {
  std::lock_guard lock(mu_);
  return total_ - spent_ - pending_;
}

BudgetLedger::Reservation BudgetLedger::reserve() {
  std::lock_guard lock(mu_);
  if (spent_ + pending_ >= total_) {
    throw Error(ErrorCode::budget_exhausted,
                "budget exhausted (" + std::to_string(spent_) + "/" +
                    std::to_string(total_) + " spent)");
  }
  ++pending_;
  return Reservation(this);
}

BudgetLedger::Reservation::Reservation(Reservation&& other) noexcept
    : ledger_(other.ledger_) {
  other.ledger_ = nullptr;
}

BudgetLedger::Reservation::~Reservation() {
  if (!ledger_) return;
  std::lock_guard lock(ledger_->mu_);
  --ledger_->pending_;
}

void BudgetLedger::Reservation::commit() {
  if (!ledger_) return;
  {
    std::lock_guard lock(ledger_->mu_);
    --ledger_->pending_;
    ++ledger_->spent_;
  }
  ledger_ = nullptr;
}

void Landscape::validate() const {
  labels.validate();
  if (components.empty()) {
    throw Error(ErrorCode::invalid_argument, "landscape has no components");
  }
  for (const auto& c : components) {
    if (c.center.size() != dim()) {
      throw Error(ErrorCode::dimension_mismatch,
                  "landscape components disagree on dimension");
    }
    if (!(c.width > 0.0) || !c.center.allFinite()) {
      throw Error(ErrorCode::invalid_argument,
                  "landscape component needs finite center and width > 0");
    }
  }
}

double landscape_relevance(const Landscape& landscape,
                           const Eigen::Ref<const VectorXd>& x) {
  if (x.size() != landscape.dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "landscape dimension " + std::to_string(landscape.dim()) +
                    " vs embedding dimension " + std::to_string(x.size()));
  }
  double best = 0.0;
  for (const auto& c : landscape.components) {
    const double r2 = (x - c.center).squaredNorm();
    best = std::max(best, std::exp(-r2 / (2.0 * c.width * c.width)));
  }
  return double(landscape.labels.max_label()) * best;
}

std::size_t dominant_component(const Landscape& landscape,
                               const Eigen::Ref<const VectorXd>& x) {
  std::size_t best = 0;
  double best_value = -1.0;
  for (std::size_t j = 0; j < landscape.components.size(); ++j) {
    const auto& c = landscape.components[j];
    const double v = std::exp(-(x - c.center).squaredNorm() / (2.0 * c.width * c.width));
    if (v > best_value) {
      best_value = v;
      best = j;
    }
  }
  return best;
}

SyntheticOracle::SyntheticOracle(Landscape landscape, ScoringMode mode,
                                 double logit_noise, std::uint64_t seed)
    : landscape_(std::move(landscape)), mode_(mode),
      logit_noise_(logit_noise), seed_(seed) {
  landscape_.validate();
  if (!(logit_noise_ >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "logit noise must be >= 0");
  }
}

RelevanceScore SyntheticOracle::evaluate(const QueryRecord& query,
                                         const PassageRef& passage) const {
  const double g = landscape_relevance(landscape_, passage.embedding);
  const auto& labels = landscape_.labels;
  if (logit_noise_ == 0.0) {
    if (mode_ == ScoringMode::er) return {g, ScoringMode::er};
    const double label =
        std::clamp(std::round(g), 0.0, double(labels.max_label()));
    return {label, ScoringMode::pr};
  }
  auto rng = make_rng(seed_ ^ hash_text(query.query_id), RngStream::oracle_noise,
                      hash_text(passage.id));
  std::normal_distribution<double> noise(0.0, logit_noise_);
  std::vector<double> logits(std::size_t(labels.k));
  for (int k = 0; k < labels.k; ++k) {
    logits[std::size_t(k)] = -(double(k) - g) * (double(k) - g) + noise(rng);
  }
  return scalarize(logits, labels, mode_);
}

RelevanceScore SyntheticOracle::score(const QueryRecord& query,
                                      const PassageRef& passage,
                                      BudgetLedger& ledger) {
  auto reservation = ledger.reserve();
  const auto result = evaluate(query, passage);
  reservation.commit();
  return result;
}

RelevanceScore synthetic_score(const Eigen::Ref<const VectorXd>& p_embedding,
                               const Landscape& landscape, ScoringMode mode,
                               BudgetLedger& ledger) {
  SyntheticOracle oracle(landscape, mode);
  const QueryRecord query;
  return oracle.score(query, {"", p_embedding}, ledger);
}

}  // namespace activerank
