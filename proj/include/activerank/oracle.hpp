#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "activerank/corpus.hpp"
#include "activerank/types.hpp"

namespace activerank {

struct RelevanceLabelSet {
  int k = 4;  // labels are 0..k-1

  void validate() const {
    if (k < 2) throw Error(ErrorCode::invalid_argument, "label count must be >= 2");
  }
  int max_label() const { return k - 1; }
};

enum class ScoringMode { er, pr };

std::string_view to_string(ScoringMode mode);
ScoringMode parse_scoring_mode(std::string_view name);

struct RelevanceScore {
  double value = 0.0;
  ScoringMode mode = ScoringMode::er;
};

/// Expected relevance: softmax(z) weighted sum of the labels.
RelevanceScore score_er(std::span<const double> logits,
                        const RelevanceLabelSet& labels);

/// Peak relevance: label of the largest logit, lowest label on ties.
RelevanceScore score_pr(std::span<const double> logits,
                        const RelevanceLabelSet& labels);

RelevanceScore scalarize(std::span<const double> logits,
                         const RelevanceLabelSet& labels, ScoringMode mode);

/// Oracle-call accounting. Charging goes through a Reservation so the
/// remaining-budget check and the claim happen under one lock; a
/// reservation that is never committed hands its unit back.
class BudgetLedger {
 public:
  class Reservation {
   public:
    Reservation(Reservation&& other) noexcept;
    Reservation& operator=(Reservation&&) = delete;
    Reservation(const Reservation&) = delete;
    ~Reservation();

    void commit();

   private:
    friend class BudgetLedger;
    explicit Reservation(BudgetLedger* ledger) : ledger_(ledger) {}
    BudgetLedger* ledger_;
  };

  explicit BudgetLedger(int total = 0);
  BudgetLedger(const BudgetLedger& other);
  BudgetLedger& operator=(const BudgetLedger& other);

  int total() const;
  int spent() const;
  int remaining() const;

  /// Claims one unit or throws budget_exhausted.
  Reservation reserve();

 private:
  mutable std::mutex mu_;
  int total_ = 0;
  int spent_ = 0;
  int pending_ = 0;
};

/// One passage as the oracle sees it.
struct PassageRef {
  std::string_view id;
  Eigen::Ref<const VectorXd> embedding;
};

class RelevanceOracle {
 public:
  virtual ~RelevanceOracle() = default;

  /// Scores one (query, passage) pair and charges exactly one budget unit
  /// on success.
  virtual RelevanceScore score(const QueryRecord& query,
                               const PassageRef& passage,
                               BudgetLedger& ledger) = 0;
};

/// Mixture of Gaussian bumps defining true relevance on the embedding
/// space: g(p) = (K-1) * max_j exp(-|p - c_j|^2 / (2 w_j^2)).
struct LandscapeComponent {
  VectorXd center;
  double width = 0.1;
  bool near_query = false;
};

struct Landscape {
  std::vector<LandscapeComponent> components;
  RelevanceLabelSet labels;

  Eigen::Index dim() const {
    return components.empty() ? 0 : components.front().center.size();
  }
  void validate() const;
};

double landscape_relevance(const Landscape& landscape,
                           const Eigen::Ref<const VectorXd>& x);

/// Index of the component attaining the max in landscape_relevance.
std::size_t dominant_component(const Landscape& landscape,
                               const Eigen::Ref<const VectorXd>& x);

/// Deterministic oracle backed by a Landscape.
///
/// Without noise, ER returns g(p) and PR returns round(g(p)) clamped to the
/// label range. With logit_noise > 0 the score is instead derived from
/// logits z_k = -(k - g)^2 plus Gaussian noise; the noise is seeded from
/// (seed, query id, passage id) so repeated calls agree.
class SyntheticOracle : public RelevanceOracle {
 public:
  SyntheticOracle(Landscape landscape, ScoringMode mode,
                  double logit_noise = 0.0, std::uint64_t seed = 0);

  RelevanceScore score(const QueryRecord& query, const PassageRef& passage,
                       BudgetLedger& ledger) override;

  /// Pure scoring without budget accounting.
  RelevanceScore evaluate(const QueryRecord& query,
                          const PassageRef& passage) const;

  const Landscape& landscape() const { return landscape_; }

 private:
  Landscape landscape_;
  ScoringMode mode_;
  double logit_noise_;
  std::uint64_t seed_;
};

/// Convenience: score through a SyntheticOracle-style landscape directly.
RelevanceScore synthetic_score(const Eigen::Ref<const VectorXd>& p_embedding,
                               const Landscape& landscape, ScoringMode mode,
                               BudgetLedger& ledger);

}  // namespace activerank
