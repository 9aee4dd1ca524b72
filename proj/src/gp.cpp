#include "activerank/gp.hpp"

namespace activerank {

std::vector<PoolPrediction> predict_batch(
    const FittedGP<double>& gp, const CorpusIndex& pool,
    const std::unordered_set<std::string>& exclude) {
  const auto all = predict_rows(gp, pool.vectors());
  std::vector<PoolPrediction> out;
  out.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!exclude.empty() && exclude.count(pool.id(i)) != 0) continue;
    const auto r = Eigen::Index(i);
    out.push_back({i, {all.mu[r], all.sigma[r]}});
  }
  return out;
}

}  // namespace activerank
