#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpsdss/errors.hpp"
#include "cpsdss/impact.hpp"
#include "cpsdss/optimiser.hpp"
#include "cpsdss/pareto.hpp"

namespace cpsdss {

struct RankReport {
  std::vector<std::pair<NodeId, double>> average_rank;  // portfolio order
  std::size_t run_count = 0;
  std::size_t trials_per_run = 0;

  double rank_of(std::string_view id) const {
    for (const auto& [n, r] : average_rank) {
      if (n == id) return r;
    }
    throw NotFoundError("no rank for \"" + std::string(id) + "\"");
  }

  // Ids sorted by ascending average rank (most effective first).
  std::vector<NodeId> ordered() const {
    auto v = average_rank;
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    std::vector<NodeId> out;
    for (auto& [id, r] : v) out.push_back(std::move(id));
    return out;
  }
};

// Ranks 1..n within one portfolio: highest mitigation probability first,
// ties by lexicographic id.
inline std::vector<std::size_t> portfolio_ranks(const Portfolio& p) {
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (p.values[a] != p.values[b]) return p.values[a] > p.values[b];
    return p.ids[a] < p.ids[b];
  });
  std::vector<std::size_t> rank(p.size());
  for (std::size_t r = 0; r < idx.size(); ++r) rank[idx[r]] = r + 1;
  return rank;
}

// Average rank position of each vulnerability across the top portfolios of
// repeated runs.
inline RankReport frequency_rank(std::span<const Portfolio> top_portfolios, std::size_t trials_per_run = 0) {
  if (top_portfolios.empty()) throw DomainError("frequency_rank needs at least one portfolio");
  const auto& ids = top_portfolios.front().ids;
  std::vector<double> sum(ids.size(), 0.0);
  for (const auto& p : top_portfolios) {
    if (p.ids != ids) throw DomainError("portfolios cover different vulnerability sets");
    auto r = portfolio_ranks(p);
    for (std::size_t k = 0; k < r.size(); ++k) sum[k] += static_cast<double>(r[k]);
  }
  RankReport report;
  report.run_count = top_portfolios.size();
  report.trials_per_run = trials_per_run;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    report.average_rank.emplace_back(ids[k], sum[k] / static_cast<double>(top_portfolios.size()));
  }
  return report;
}

// Percentage of a ranked group's mitigations that were implemented.
inline double effectiveness_fraction(long implemented, long group_size) {
  if (group_size < 1) throw DomainError("ranked group size must be at least 1");
  if (implemented < 0 || implemented > group_size) throw DomainError("implemented count outside [0, group size]");
  return 100.0 * static_cast<double>(implemented) / static_cast<double>(group_size);
}

struct HeuristicStudy {
  std::vector<TrialRecord> top;  // one per run
  std::vector<ParetoFront> fronts;
  RankReport report;
};

// `runs` independent optimisations (seeds base, base+1, ...) followed by
// frequency ranking of each run's top portfolio.
inline HeuristicStudy run_heuristics(const BnModel& model, const OptimisationConfig& base, std::size_t runs,
                                     const ScoringContext& ctx = {}) {
  if (runs < 1) throw DomainError("runs must be at least 1");
  HeuristicStudy study;
  std::vector<Portfolio> tops;
  for (std::size_t r = 0; r < runs; ++r) {
    OptimisationConfig cfg = base;
    cfg.seed = run_seed(base.seed, r);
    auto res = run_optimisation(model, cfg, ctx);
    const auto& top = select_top_portfolio(res.front);
    study.top.push_back(top);
    tops.push_back(top.portfolio);
    study.fronts.push_back(std::move(res.front));
  }
  study.report = frequency_rank(tops, base.trial_count);
  return study;
}

}  // namespace cpsdss
