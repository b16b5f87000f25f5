#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "cpsdss/errors.hpp"
#include "cpsdss/model.hpp"
#include "cpsdss/scoring.hpp"

namespace cpsdss {

// Per-vulnerability mitigation probabilities, ordered as the model lists its
// vulnerability nodes.
struct Portfolio {
  std::vector<NodeId> ids;
  std::vector<double> values;

  std::size_t size() const { return ids.size(); }

  double at(std::string_view id) const {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (ids[k] == id) return values[k];
    }
    throw NotFoundError("portfolio has no entry for \"" + std::string(id) + "\"");
  }

  // The mitigation probabilities currently stored on the model.
  static Portfolio from_model(const BnModel& model) {
    Portfolio p;
    for (const auto& n : model.nodes) {
      if (n.is(NodeKind::Vulnerability)) {
        p.ids.push_back(n.id);
        p.values.push_back(n.vuln().mitigation_prob);
      }
    }
    return p;
  }

  static Portfolio uniform(const BnModel& model, double value) {
    Portfolio p = from_model(model);
    std::fill(p.values.begin(), p.values.end(), value);
    return p;
  }

  // Throws unless this covers exactly the model's vulnerabilities, in order,
  // with values in [0,1].
  void check_against(const BnModel& model) const {
    if (ids != model.vulnerability_ids()) {
      throw DomainError("portfolio does not cover exactly the model's vulnerability nodes");
    }
    if (values.size() != ids.size()) throw DomainError("portfolio ids/values length mismatch");
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (!(values[k] >= 0.0 && values[k] <= 1.0)) {
        throw DomainError("mitigation probability for " + ids[k] + " outside [0,1]");
      }
    }
  }

  bool operator==(const Portfolio&) const = default;
};

// Writes a portfolio's values back onto the model's mitigation attributes.
inline BnModel apply_portfolio(const BnModel& model, const Portfolio& portfolio) {
  portfolio.check_against(model);
  BnModel out = model;
  std::size_t k = 0;
  for (auto& n : out.nodes) {
    if (auto* v = std::get_if<VulnAttrs>(&n.attrs)) v->mitigation_prob = portfolio.values[k++];
  }
  return out;
}

struct RiskSummary {
  double attack_likelihood = 0.0;
  double severe_impact = 0.0;
  double composite_risk = 0.0;

  static RiskSummary from(double likelihood, double impact) { return {likelihood, impact, likelihood * impact}; }
};

// Share of the graph directly downstream of an asset or hazard.
inline double structural_impact(std::string_view node, const BnModel& model) {
  const Node& n = model.at(node);
  if (n.is(NodeKind::Vulnerability)) throw DomainError("structural impact applies to assets and hazards only");
  return static_cast<double>(model.children(node).size()) / static_cast<double>(model.nodes.size());
}

// Sum of factor x criticality normalised by the factor sum, so the rating is
// a weighted mean criticality in [0,1].
inline double impact_rating(const ImpactFactors& f) {
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < 5; ++j) {
    num += f.factor[j] * f.criticality[j];
    den += f.factor[j];
  }
  if (!(den > 0.0)) throw DomainError("impact factors sum to zero");
  return num / den;
}

// Vulnerabilities joined to `asset` by an edge in either direction.
inline std::vector<NodeId> associated_vulnerabilities(std::string_view asset, const BnModel& model) {
  std::vector<NodeId> out;
  for (const auto& e : model.edges) {
    const NodeId* other = e.parent == asset ? &e.child : e.child == asset ? &e.parent : nullptr;
    if (other == nullptr) continue;
    const Node* n = model.find(*other);
    if (n != nullptr && n->is(NodeKind::Vulnerability) &&
        std::find(out.begin(), out.end(), *other) == out.end()) {
      out.push_back(*other);
    }
  }
  return out;
}

// Failure induced by applying mitigations: min(1, kappa * sum(applied_i * fail_i)).
inline double mitigation_induced_failure(double kappa, std::span<const double> applied,
                                         std::span<const double> failure_probs) {
  double sum = 0.0;
  for (std::size_t k = 0; k < applied.size(); ++k) sum += applied[k] * failure_probs[k];
  return std::min(1.0, kappa * sum);
}

// Noisy union of independent failure sources.
inline double combine_failures(double decay, double induced) { return 1.0 - (1.0 - decay) * (1.0 - induced); }

// Asset failure probability under `portfolio`: baseline time decay combined
// with the risk introduced by mitigating the asset's vulnerabilities.
inline double risk_adjusted_failure(std::string_view asset, const BnModel& model, const Portfolio& portfolio) {
  const Node* n = model.find(asset);
  if (n == nullptr) throw NotFoundError("unknown asset \"" + std::string(asset) + "\"");
  if (!n->is(NodeKind::Asset)) throw DomainError("\"" + std::string(asset) + "\" is not an asset node");
  const auto& a = n->asset();

  std::vector<double> applied, fail;
  for (const auto& vid : associated_vulnerabilities(asset, model)) {
    applied.push_back(portfolio.at(vid));
    fail.push_back(model.at(vid).vuln().mitigation_failure_prob);
  }
  double induced = mitigation_induced_failure(a.kappa, applied, fail);
  double decay = asset_failure_probability(a, model.evaluation_date);
  return combine_failures(decay, induced);
}

// 1 - impact-rating-weighted mean asset failure probability.
inline double availability(const BnModel& model, const Portfolio& portfolio) {
  double weighted = 0.0, total = 0.0;
  bool any_asset = false;
  for (const auto& n : model.nodes) {
    if (!n.is(NodeKind::Asset)) continue;
    any_asset = true;
    double r = impact_rating(n.asset().impact_factors);
    weighted += r * risk_adjusted_failure(n.id, model, portfolio);
    total += r;
  }
  if (!any_asset) throw DomainError("availability needs at least one asset node");
  if (!(total > 0.0)) return 1.0;
  return std::clamp(1.0 - weighted / total, 0.0, 1.0);
}

}  // namespace cpsdss
