#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "cpsdss/errors.hpp"
#include "cpsdss/impact.hpp"
#include "cpsdss/inference.hpp"

namespace cpsdss {

struct TrialRecord {
  std::uint64_t trial_id = 0;
  Portfolio portfolio;
  Objectives objectives;

  bool operator==(const TrialRecord&) const = default;
};

struct ParetoFront {
  std::vector<TrialRecord> members;  // ascending trial_id
  std::uint64_t run_seed = 0;
  std::size_t trial_count = 0;

  bool operator==(const ParetoFront&) const = default;
};

// a dominates b: no worse on every objective (likelihood and impact
// minimised, availability maximised) and strictly better on at least one.
inline bool dominates(const Objectives& a, const Objectives& b) {
  if (a.likelihood > b.likelihood || a.impact > b.impact || a.availability < b.availability) return false;
  return a.likelihood < b.likelihood || a.impact < b.impact || a.availability > b.availability;
}

// Indices of the nondominated records. After a lexicographic sort on
// (likelihood, impact, -availability) nothing can be dominated by a later
// element, so one sweep against the accepted set is exact.
inline std::vector<std::size_t> nondominated_indices(std::span<const TrialRecord> trials) {
  std::vector<std::size_t> idx(trials.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
    const auto& a = trials[x].objectives;
    const auto& b = trials[y].objectives;
    if (a.likelihood != b.likelihood) return a.likelihood < b.likelihood;
    if (a.impact != b.impact) return a.impact < b.impact;
    if (a.availability != b.availability) return a.availability > b.availability;
    return trials[x].trial_id < trials[y].trial_id;
  });

  std::vector<std::size_t> kept;
  for (std::size_t i : idx) {
    const auto& cand = trials[i].objectives;
    bool dominated = std::any_of(kept.begin(), kept.end(),
                                 [&](std::size_t k) { return dominates(trials[k].objectives, cand); });
    if (!dominated) kept.push_back(i);
  }
  std::sort(kept.begin(), kept.end(),
            [&](std::size_t x, std::size_t y) { return trials[x].trial_id < trials[y].trial_id; });
  return kept;
}

// Exact nondominated subset. Records tied on all three objectives are all kept.
inline ParetoFront pareto_filter(std::span<const TrialRecord> trials, std::uint64_t run_seed = 0) {
  if (trials.empty()) throw DomainError("pareto_filter needs at least one trial");
  ParetoFront front;
  front.run_seed = run_seed;
  front.trial_count = trials.size();
  for (std::size_t i : nondominated_indices(trials)) front.members.push_back(trials[i]);
  return front;
}

// Front member minimising the equally weighted sum of min-max normalised
// likelihood, impact and (1 - availability); ties go to the lowest trial id.
// An objective that is constant over the front contributes zero.
inline const TrialRecord& select_top_portfolio(std::span<const TrialRecord> front) {
  if (front.empty()) throw DomainError("cannot select from an empty front");
  auto range = [&](auto get) {
    double lo = get(front[0]), hi = lo;
    for (const auto& t : front) {
      lo = std::min(lo, get(t));
      hi = std::max(hi, get(t));
    }
    return std::pair{lo, hi};
  };
  auto norm = [](double x, std::pair<double, double> r) {
    return r.second > r.first ? (x - r.first) / (r.second - r.first) : 0.0;
  };
  auto lik = [](const TrialRecord& t) { return t.objectives.likelihood; };
  auto imp = [](const TrialRecord& t) { return t.objectives.impact; };
  auto una = [](const TrialRecord& t) { return 1.0 - t.objectives.availability; };
  const auto rl = range(lik), ri = range(imp), ru = range(una);

  const TrialRecord* best = nullptr;
  double best_score = 0.0;
  for (const auto& t : front) {
    double s = norm(lik(t), rl) + norm(imp(t), ri) + norm(una(t), ru);
    if (best == nullptr || s < best_score || (s == best_score && t.trial_id < best->trial_id)) {
      best = &t;
      best_score = s;
    }
  }
  return *best;
}

inline const TrialRecord& select_top_portfolio(const ParetoFront& front) {
  return select_top_portfolio(std::span<const TrialRecord>(front.members));
}

}  // namespace cpsdss
