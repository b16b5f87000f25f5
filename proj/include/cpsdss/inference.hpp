#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cpsdss/errors.hpp"
#include "cpsdss/factor.hpp"
#include "cpsdss/impact.hpp"
#include "cpsdss/model.hpp"
#include "cpsdss/scoring.hpp"

namespace cpsdss {

// Exposure and impact are separate networks over one shared structure.
enum class Dimension { Exposure, Impact };

inline std::string_view to_string(Dimension d) { return d == Dimension::Exposure ? "exposure" : "impact"; }

// Which state of the goal node is reported as "attack succeeded" / "severe
// impact". One is the conventional reading; Zero mirrors tables that report
// the narrative probability at state (0).
enum class SuccessState { One = 1, Zero = 0 };

struct QueryResult {
  NodeId node;
  Dimension dimension = Dimension::Exposure;
  Marginal marginal{};
};

namespace detail {

// OR-gate CPT: a root is active with probability p; otherwise the node is
// active with probability p when any parent is active and never when none is.
inline IndexedFactor or_gate_cpt(int node, std::span<const int> parents, double p) {
  IndexedFactor f;
  f.vars.reserve(parents.size() + 1);
  f.vars.push_back(node);
  f.vars.insert(f.vars.end(), parents.begin(), parents.end());
  const std::size_t n = std::size_t{1} << f.vars.size();
  f.table.resize(n);
  for (std::size_t idx = 0; idx < n; idx += 2) {
    const bool root = parents.empty();
    const bool any_parent = (idx >> 1) != 0;
    const double on = root || any_parent ? p : 0.0;
    f.table[idx] = 1.0 - on;
    f.table[idx + 1] = on;
  }
  return f;
}

// Portfolio-independent part of each node's activation value, document order.
// Exposure: vulnerability attack probability (mitigation applied later),
// asset baseline decay failure, hazard 1. Impact: CVSS CIA impact for
// vulnerabilities, child-count share for assets and hazards.
inline std::vector<double> base_activations(const BnModel& model, Dimension dim, const ScoringContext& ctx) {
  std::vector<double> out;
  out.reserve(model.nodes.size());
  for (const auto& n : model.nodes) {
    switch (n.kind()) {
      case NodeKind::Vulnerability:
        if (dim == Dimension::Exposure) {
          out.push_back(vuln_attack_probability(model, n, ctx));
        } else {
          if (!n.vuln().cvss_vector) {
            throw DomainError("impact network needs a CVSS vector on vulnerability \"" + n.id + "\"");
          }
          out.push_back(vuln_impact(*n.vuln().cvss_vector));
        }
        break;
      case NodeKind::Asset:
        out.push_back(dim == Dimension::Exposure ? asset_failure_probability(n.asset(), model.evaluation_date)
                                                 : structural_impact(n.id, model));
        break;
      case NodeKind::Hazard:
        out.push_back(dim == Dimension::Exposure ? 1.0 : structural_impact(n.id, model));
        break;
    }
  }
  return out;
}

struct IndexedModel {
  std::vector<std::string> names;
  std::vector<std::vector<int>> parents;
  std::map<NodeId, int> index;

  explicit IndexedModel(const BnModel& model) {
    for (const auto& n : model.nodes) {
      index.emplace(n.id, static_cast<int>(names.size()));
      names.push_back(n.id);
    }
    parents.resize(names.size());
    for (const auto& e : model.edges) parents[index.at(e.child)].push_back(index.at(e.parent));
  }

  int at(std::string_view id) const {
    auto it = index.find(std::string(id));
    if (it == index.end()) throw NotFoundError("unknown node \"" + std::string(id) + "\"");
    return it->second;
  }
};

// Activation values with the portfolio applied: in the exposure network a
// vulnerability's attack probability is scaled by (1 - P(M_i)).
inline std::vector<double> activations(const BnModel& model, const Portfolio& portfolio, Dimension dim,
                                       const ScoringContext& ctx) {
  portfolio.check_against(model);
  auto p = base_activations(model, dim, ctx);
  if (dim == Dimension::Exposure) {
    std::size_t slot = 0;
    for (std::size_t k = 0; k < model.nodes.size(); ++k) {
      if (model.nodes[k].is(NodeKind::Vulnerability)) p[k] *= 1.0 - portfolio.values[slot++];
    }
  }
  return p;
}

}  // namespace detail

// One OR-gate CPT per node for the requested network. Each factor's scope is
// (node, parents...).
inline std::vector<Factor> build_cpts(const BnModel& model, const Portfolio& portfolio, Dimension dim,
                                      const ScoringContext& ctx = {}) {
  detail::IndexedModel im(model);
  auto p = detail::activations(model, portfolio, dim, ctx);
  std::vector<Factor> out;
  out.reserve(model.nodes.size());
  for (std::size_t k = 0; k < model.nodes.size(); ++k) {
    auto f = detail::or_gate_cpt(static_cast<int>(k), im.parents[k], p[k]);
    Factor g;
    for (int v : f.vars) g.scope.push_back(im.names[v]);
    g.table = std::move(f.table);
    out.push_back(std::move(g));
  }
  return out;
}

inline QueryResult query_node(const BnModel& model, const Portfolio& portfolio, Dimension dim, std::string_view node,
                              const EvidenceSet& evidence, const ScoringContext& ctx = {},
                              const EliminationOrder& order = EliminationOrder::min_degree()) {
  model.at(node);
  auto factors = build_cpts(model, portfolio, dim, ctx);
  return {std::string(node), dim, variable_elimination(factors, node, evidence, order)};
}

struct PosteriorReport {
  QueryResult exposure;
  QueryResult impact;
  RiskSummary risk;
};

inline PosteriorReport posterior_report(const BnModel& model, const Portfolio& portfolio, const EvidenceSet& evidence,
                                        const ScoringContext& ctx = {}, SuccessState success = SuccessState::One) {
  const Node* goal = model.goal();
  if (goal == nullptr) throw DomainError("model has no goal node");
  auto e = query_node(model, portfolio, Dimension::Exposure, goal->id, evidence, ctx);
  auto i = query_node(model, portfolio, Dimension::Impact, goal->id, evidence, ctx);
  const auto s = static_cast<std::size_t>(success);
  return {e, i, RiskSummary::from(e.marginal[s], i.marginal[s])};
}

// Posterior attack likelihood and severe impact at the goal node, and their
// product.
inline RiskSummary posterior_risk(const BnModel& model, const Portfolio& portfolio, const EvidenceSet& evidence,
                                  const ScoringContext& ctx = {}, SuccessState success = SuccessState::One) {
  return posterior_report(model, portfolio, evidence, ctx, success).risk;
}

struct Objectives {
  double likelihood = 0.0;    // minimise
  double impact = 0.0;        // minimise
  double availability = 0.0;  // maximise

  bool operator==(const Objectives&) const = default;
};

// Model compiled for repeated objective evaluation over many portfolios with
// fixed evidence. Thread-safe for concurrent evaluate() calls.
class Evaluator {
 public:
  Evaluator(const BnModel& model, const ScoringContext& ctx, EvidenceSet evidence,
            SuccessState success = SuccessState::One)
      : indexed_(model), success_(success), vulnerability_ids_(model.vulnerability_ids()) {
    const Node* goal = model.goal();
    if (goal == nullptr) throw DomainError("model has no goal node");
    goal_ = indexed_.at(goal->id);

    base_exposure_ = detail::base_activations(model, Dimension::Exposure, ctx);
    slot_.assign(model.nodes.size(), -1);
    int slot = 0;
    for (std::size_t k = 0; k < model.nodes.size(); ++k) {
      if (model.nodes[k].is(NodeKind::Vulnerability)) slot_[k] = slot++;
    }

    for (const auto& [id, state] : evidence) {
      if (state != 0 && state != 1) throw DomainError("evidence state must be 0 or 1");
      evidence_.emplace_back(indexed_.at(id), state);
    }

    // Only ancestors of the goal and evidence nodes influence the query.
    std::vector<bool> keep(model.nodes.size(), false);
    std::vector<int> stack{goal_};
    for (const auto& [v, s] : evidence_) stack.push_back(v);
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      if (keep[v]) continue;
      keep[v] = true;
      for (int p : indexed_.parents[v]) stack.push_back(p);
    }
    for (int v = 0; v < static_cast<int>(keep.size()); ++v) {
      if (keep[v]) relevant_.push_back(v);
    }

    std::vector<std::vector<int>> scopes;
    std::vector<int> hidden;
    for (int v : relevant_) {
      std::vector<int> s{v};
      s.insert(s.end(), indexed_.parents[v].begin(), indexed_.parents[v].end());
      std::erase_if(s, [&](int u) { return u != goal_ && is_evidence(u); });
      scopes.push_back(std::move(s));
      if (v != goal_ && !is_evidence(v)) hidden.push_back(v);
    }
    order_ = detail::min_degree_order(std::move(scopes), std::move(hidden), indexed_.names);

    // Impact activations do not depend on the portfolio.
    auto impact_p = detail::base_activations(model, Dimension::Impact, ctx);
    impact_marginal_ = solve(impact_p);

    for (std::size_t k = 0; k < model.nodes.size(); ++k) {
      const Node& n = model.nodes[k];
      if (!n.is(NodeKind::Asset)) continue;
      AssetTerm t;
      t.kappa = n.asset().kappa;
      t.decay = base_exposure_[k];
      t.rating = impact_rating(n.asset().impact_factors);
      for (const auto& vid : associated_vulnerabilities(n.id, model)) {
        t.vulns.emplace_back(slot_[indexed_.at(vid)], model.at(vid).vuln().mitigation_failure_prob);
      }
      rating_total_ += t.rating;
      assets_.push_back(std::move(t));
    }
    if (assets_.empty()) throw DomainError("availability needs at least one asset node");
  }

  const std::vector<NodeId>& vulnerability_ids() const { return vulnerability_ids_; }
  Marginal impact_marginal() const { return impact_marginal_; }

  Marginal exposure_marginal(std::span<const double> mitigation) const {
    check(mitigation);
    std::vector<double> p = base_exposure_;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (slot_[k] >= 0) p[k] *= 1.0 - mitigation[static_cast<std::size_t>(slot_[k])];
    }
    return solve(p);
  }

  double availability(std::span<const double> mitigation) const {
    check(mitigation);
    if (!(rating_total_ > 0.0)) return 1.0;
    double weighted = 0.0;
    std::vector<double> applied, fail;
    for (const auto& a : assets_) {
      applied.clear();
      fail.clear();
      for (const auto& [slot, f] : a.vulns) {
        applied.push_back(mitigation[static_cast<std::size_t>(slot)]);
        fail.push_back(f);
      }
      weighted += a.rating * combine_failures(a.decay, mitigation_induced_failure(a.kappa, applied, fail));
    }
    return std::clamp(1.0 - weighted / rating_total_, 0.0, 1.0);
  }

  Objectives evaluate(std::span<const double> mitigation) const {
    const auto s = static_cast<std::size_t>(success_);
    return {exposure_marginal(mitigation)[s], impact_marginal_[s], availability(mitigation)};
  }

 private:
  struct AssetTerm {
    double kappa = 1.0;
    double decay = 0.0;
    double rating = 0.0;
    std::vector<std::pair<int, double>> vulns;  // (portfolio slot, mitigation failure prob)
  };

  bool is_evidence(int v) const {
    return std::any_of(evidence_.begin(), evidence_.end(), [v](const auto& e) { return e.first == v; });
  }

  void check(std::span<const double> mitigation) const {
    if (mitigation.size() != vulnerability_ids_.size()) throw DomainError("portfolio size mismatch");
    for (double m : mitigation) {
      if (!(m >= 0.0 && m <= 1.0)) throw DomainError("mitigation probability outside [0,1]");
    }
  }

  Marginal solve(const std::vector<double>& activation) const {
    std::vector<detail::IndexedFactor> factors;
    factors.reserve(relevant_.size());
    for (int v : relevant_) factors.push_back(detail::or_gate_cpt(v, indexed_.parents[v], activation[v]));
    factors = detail::apply_evidence(std::move(factors), evidence_, goal_);
    return detail::normalised_marginal(detail::eliminate(std::move(factors), order_), goal_);
  }

  detail::IndexedModel indexed_;
  SuccessState success_;
  std::vector<NodeId> vulnerability_ids_;
  int goal_ = -1;
  std::vector<double> base_exposure_;
  std::vector<int> slot_;
  std::vector<std::pair<int, int>> evidence_;
  std::vector<int> relevant_;
  std::vector<int> order_;
  Marginal impact_marginal_{};
  std::vector<AssetTerm> assets_;
  double rating_total_ = 0.0;
};

}  // namespace cpsdss
