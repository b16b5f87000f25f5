#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cpsdss/cvss.hpp"
#include "cpsdss/errors.hpp"

namespace cpsdss {

using NodeId = std::string;

enum class NodeKind { Asset, Vulnerability, Hazard };

inline std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Asset: return "asset";
    case NodeKind::Vulnerability: return "vulnerability";
    case NodeKind::Hazard: return "hazard";
  }
  return "?";
}

// Calendar date with day resolution.
struct Date {
  std::chrono::sys_days days{};

  static Date from_ymd(int y, unsigned m, unsigned d) {
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw ParseError("invalid calendar date");
    return Date{std::chrono::sys_days{ymd}};
  }

  // ISO-8601 "YYYY-MM-DD".
  static Date parse(std::string_view text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    std::string buf(text);
    if (buf.size() != 10 || std::sscanf(buf.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3 || buf[4] != '-' ||
        buf[7] != '-') {
      throw ParseError("expected ISO-8601 date YYYY-MM-DD, got \"" + buf + "\"");
    }
    return from_ymd(y, m, d);
  }

  std::string to_iso() const {
    std::chrono::year_month_day ymd{days};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
  }

  // Whole days from `earlier` to this date (negative if `earlier` is later).
  long days_since(const Date& earlier) const { return (days - earlier.days).count(); }

  auto operator<=>(const Date&) const = default;
};

// Impact dimensions in the order Safety, Financial, Informational,
// Operational, staging (C).
inline constexpr std::array<std::string_view, 5> kImpactDimensions = {"S", "F", "I", "O", "C"};

struct ImpactFactors {
  std::array<double, 5> factor{};
  std::array<double, 5> criticality{};

  bool operator==(const ImpactFactors&) const = default;
};

struct VulnAttrs {
  std::optional<std::string> cve_id;
  std::optional<CvssVector> cvss_vector;
  std::optional<double> epss_override;
  double mitigation_prob = 0.0;
  double mitigation_failure_prob = 0.0;
  std::optional<double> attack_feasibility;  // per-node override of the model-level factor

  bool operator==(const VulnAttrs&) const = default;
};

struct AssetAttrs {
  double failure_rate = 0.0;  // lambda, per day
  Date in_service_date{};
  double kappa = 1.0;
  ImpactFactors impact_factors{};

  bool operator==(const AssetAttrs&) const = default;
};

struct HazardAttrs {
  std::optional<ImpactFactors> impact_factors;
  bool is_goal = false;

  bool operator==(const HazardAttrs&) const = default;
};

using NodeAttrs = std::variant<AssetAttrs, VulnAttrs, HazardAttrs>;

struct Node {
  NodeId id;
  std::string label;
  NodeAttrs attrs;

  NodeKind kind() const { return static_cast<NodeKind>(attrs.index()); }
  bool is(NodeKind k) const { return kind() == k; }

  const VulnAttrs& vuln() const { return std::get<VulnAttrs>(attrs); }
  const AssetAttrs& asset() const { return std::get<AssetAttrs>(attrs); }
  const HazardAttrs& hazard() const { return std::get<HazardAttrs>(attrs); }

  bool operator==(const Node&) const = default;
};

struct Edge {
  NodeId parent;
  NodeId child;

  auto operator<=>(const Edge&) const = default;
};

// Observed binary node states.
using EvidenceSet = std::map<NodeId, int>;

// Typed Bayesian-network model of a CPS. A plain value: copying is cheap at
// desk scale and every update produces a new value.
struct BnModel {
  std::string name;
  std::vector<Node> nodes;  // document order
  std::vector<Edge> edges;
  double attack_feasibility = 1.0;
  Date evaluation_date{};
  EvidenceSet evidence;

  const Node* find(std::string_view id) const {
    for (const auto& n : nodes) {
      if (n.id == id) return &n;
    }
    return nullptr;
  }

  const Node& at(std::string_view id) const {
    const Node* n = find(id);
    if (n == nullptr) throw NotFoundError("unknown node \"" + std::string(id) + "\"");
    return *n;
  }

  std::vector<NodeId> parents(std::string_view id) const {
    std::vector<NodeId> out;
    for (const auto& e : edges) {
      if (e.child == id) out.push_back(e.parent);
    }
    return out;
  }

  std::vector<NodeId> children(std::string_view id) const {
    std::vector<NodeId> out;
    for (const auto& e : edges) {
      if (e.parent == id) out.push_back(e.child);
    }
    return out;
  }

  std::vector<NodeId> ids_of(NodeKind k) const {
    std::vector<NodeId> out;
    for (const auto& n : nodes) {
      if (n.is(k)) out.push_back(n.id);
    }
    return out;
  }

  // Vulnerability ids in document order; this is the portfolio order.
  std::vector<NodeId> vulnerability_ids() const { return ids_of(NodeKind::Vulnerability); }

  const Node* goal() const {
    for (const auto& n : nodes) {
      if (n.is(NodeKind::Hazard) && n.hazard().is_goal) return &n;
    }
    return nullptr;
  }

  bool operator==(const BnModel&) const = default;
};

namespace detail {

inline bool in_unit(double p) { return p >= 0.0 && p <= 1.0; }

inline void check_impact_factors(const ImpactFactors& f, const NodeId& id, std::vector<Diagnostic>& out) {
  double sum = 0.0;
  for (std::size_t j = 0; j < 5; ++j) {
    if (!in_unit(f.factor[j]) || !in_unit(f.criticality[j])) {
      out.push_back({"impact-factor-range", id,
                     "impact factor/criticality for " + std::string(kImpactDimensions[j]) + " outside [0,1]"});
    }
    sum += f.factor[j];
  }
  if (!(sum > 0.0)) out.push_back({"impact-factor-sum", id, "impact factors must have a positive sum"});
}

// Kahn's algorithm with a lexicographic ready queue. Returns the order of all
// nodes that could be placed; fewer than nodes.size() means a cycle.
inline std::vector<NodeId> kahn_order(const BnModel& model) {
  std::map<NodeId, std::size_t> in_degree;
  std::map<NodeId, std::vector<NodeId>> out_edges;
  for (const auto& n : model.nodes) in_degree.emplace(n.id, 0);
  for (const auto& e : model.edges) {
    if (!in_degree.contains(e.parent) || !in_degree.contains(e.child)) continue;
    ++in_degree[e.child];
    out_edges[e.parent].push_back(e.child);
  }

  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (const auto& [id, deg] : in_degree) {
    if (deg == 0) ready.push(id);
  }

  std::vector<NodeId> order;
  order.reserve(in_degree.size());
  while (!ready.empty()) {
    NodeId id = ready.top();
    ready.pop();
    order.push_back(id);
    for (const auto& c : out_edges[id]) {
      if (--in_degree[c] == 0) ready.push(c);
    }
  }
  return order;
}

}  // namespace detail

// Checks every model invariant. Returns one diagnostic per violation; empty
// means the model is valid.
inline std::vector<Diagnostic> validate(const BnModel& model) {
  std::vector<Diagnostic> out;
  std::set<NodeId> ids;

  for (const auto& n : model.nodes) {
    if (n.id.empty()) {
      out.push_back({"empty-id", n.id, "node id must be nonempty"});
    } else if (!ids.insert(n.id).second) {
      out.push_back({"duplicate-id", n.id, "node id \"" + n.id + "\" is not unique"});
    }
  }

  if (!(model.attack_feasibility >= 0.0)) {
    out.push_back({"attack-feasibility", "", "attack feasibility must be nonnegative"});
  }

  std::set<Edge> seen_edges;
  for (const auto& e : model.edges) {
    const std::string subject = e.parent + "->" + e.child;
    if (!ids.contains(e.parent) || !ids.contains(e.child)) {
      out.push_back({"dangling-edge", subject, "edge endpoint does not exist"});
    }
    if (!seen_edges.insert(e).second) {
      out.push_back({"duplicate-edge", subject, "edge listed more than once"});
    }
  }

  // Duplicate ids make the Kahn count meaningless, so cycles are only checked
  // over a sound id set.
  if (ids.size() == model.nodes.size() && detail::kahn_order(model).size() != model.nodes.size()) {
    out.push_back({"cycle", "", "graph contains a directed cycle"});
  }

  std::size_t goals = 0;
  for (const auto& n : model.nodes) {
    if (const auto* v = std::get_if<VulnAttrs>(&n.attrs)) {
      if (!v->cve_id && !v->cvss_vector && !v->epss_override) {
        out.push_back({"scoring-source", n.id, "vulnerability needs a CVE id, a CVSS vector or an EPSS override"});
      }
      if (v->epss_override && !detail::in_unit(*v->epss_override)) {
        out.push_back({"probability-range", n.id, "epss_override outside [0,1]"});
      }
      if (!detail::in_unit(v->mitigation_prob)) {
        out.push_back({"probability-range", n.id, "mitigation_prob outside [0,1]"});
      }
      if (!detail::in_unit(v->mitigation_failure_prob)) {
        out.push_back({"probability-range", n.id, "mitigation_failure_prob outside [0,1]"});
      }
      if (v->attack_feasibility && !(*v->attack_feasibility >= 0.0)) {
        out.push_back({"attack-feasibility", n.id, "per-node attack feasibility must be nonnegative"});
      }
    } else if (const auto* a = std::get_if<AssetAttrs>(&n.attrs)) {
      if (!(a->failure_rate >= 0.0)) out.push_back({"failure-rate", n.id, "failure rate must be nonnegative"});
      if (!(a->kappa > 0.0 && a->kappa <= 1.0)) out.push_back({"kappa-range", n.id, "kappa must lie in (0,1]"});
      if (a->in_service_date > model.evaluation_date) {
        out.push_back({"in-service-date", n.id, "in-service date is after the evaluation date"});
      }
      detail::check_impact_factors(a->impact_factors, n.id, out);
    } else {
      const auto& h = n.hazard();
      if (h.impact_factors) detail::check_impact_factors(*h.impact_factors, n.id, out);
      if (h.is_goal) {
        ++goals;
        if (!model.children(n.id).empty()) out.push_back({"goal-children", n.id, "goal node must not have children"});
      }
      if (model.parents(n.id).empty()) out.push_back({"hazard-parents", n.id, "hazard node has no parents"});
    }
  }
  if (goals != 1) {
    out.push_back({"goal-count", "", "model must have exactly one goal node, found " + std::to_string(goals)});
  }

  for (const auto& [id, state] : model.evidence) {
    if (!ids.contains(id)) out.push_back({"evidence-node", id, "evidence names an unknown node"});
    if (state != 0 && state != 1) out.push_back({"evidence-state", id, "evidence state must be 0 or 1"});
  }
  return out;
}

// Non-fatal observations; currently only attack feasibility above 1, where
// attack probabilities get clamped.
inline std::vector<Diagnostic> warnings(const BnModel& model) {
  std::vector<Diagnostic> out;
  if (model.attack_feasibility > 1.0) {
    out.push_back({"attack-feasibility-clamp", "", "attack feasibility > 1; attack probabilities are clamped to 1"});
  }
  for (const auto& n : model.nodes) {
    if (const auto* v = std::get_if<VulnAttrs>(&n.attrs); v && v->attack_feasibility && *v->attack_feasibility > 1.0) {
      out.push_back({"attack-feasibility-clamp", n.id, "per-node attack feasibility > 1; clamped"});
    }
  }
  return out;
}

inline void require_valid(const BnModel& model) {
  auto diags = validate(model);
  if (!diags.empty()) throw ValidationError(std::move(diags));
}

// Parents precede children; ready nodes are taken in lexicographic id order.
inline std::vector<NodeId> topological_order(const BnModel& model) {
  auto order = detail::kahn_order(model);
  if (order.size() != model.nodes.size()) {
    throw ValidationError({{"cycle", "", "graph contains a directed cycle"}});
  }
  return order;
}

// Field-wise attribute delta for one node. Unset fields are left untouched.
struct NodePatch {
  std::optional<std::string> label;
  // vulnerability
  std::optional<std::optional<std::string>> cve_id;
  std::optional<std::optional<CvssVector>> cvss_vector;
  std::optional<std::optional<double>> epss_override;
  std::optional<double> mitigation_prob;
  std::optional<double> mitigation_failure_prob;
  std::optional<std::optional<double>> attack_feasibility;
  // asset
  std::optional<double> failure_rate;
  std::optional<Date> in_service_date;
  std::optional<double> kappa;
  std::optional<ImpactFactors> impact_factors;
  // hazard
  std::optional<bool> is_goal;
  // evidence: set to 0/1, or nullopt inside to clear
  std::optional<std::optional<int>> evidence;
};

// Returns a copy of `model` with `patch` applied to `node`, revalidated in
// full. The input is never modified.
inline BnModel update_attribute(const BnModel& model, std::string_view node, const NodePatch& patch) {
  BnModel out = model;
  auto it = std::find_if(out.nodes.begin(), out.nodes.end(), [&](const Node& n) { return n.id == node; });
  if (it == out.nodes.end()) throw NotFoundError("unknown node \"" + std::string(node) + "\"");
  Node& n = *it;

  auto mismatch = [&](std::string_view field) {
    throw DomainError("attribute \"" + std::string(field) + "\" does not apply to " + std::string(to_string(n.kind())) +
                      " node \"" + n.id + "\"");
  };

  if (patch.label) n.label = *patch.label;

  const bool vuln_fields = patch.cve_id || patch.cvss_vector || patch.epss_override || patch.mitigation_prob ||
                           patch.mitigation_failure_prob || patch.attack_feasibility;
  const bool asset_fields = patch.failure_rate || patch.in_service_date || patch.kappa;

  if (auto* v = std::get_if<VulnAttrs>(&n.attrs)) {
    if (asset_fields) mismatch("asset attribute");
    if (patch.impact_factors) mismatch("impact_factors");
    if (patch.is_goal) mismatch("is_goal");
    if (patch.cve_id) v->cve_id = *patch.cve_id;
    if (patch.cvss_vector) v->cvss_vector = *patch.cvss_vector;
    if (patch.epss_override) v->epss_override = *patch.epss_override;
    if (patch.mitigation_prob) v->mitigation_prob = *patch.mitigation_prob;
    if (patch.mitigation_failure_prob) v->mitigation_failure_prob = *patch.mitigation_failure_prob;
    if (patch.attack_feasibility) v->attack_feasibility = *patch.attack_feasibility;
  } else if (auto* a = std::get_if<AssetAttrs>(&n.attrs)) {
    if (vuln_fields) mismatch("vulnerability attribute");
    if (patch.is_goal) mismatch("is_goal");
    if (patch.failure_rate) a->failure_rate = *patch.failure_rate;
    if (patch.in_service_date) a->in_service_date = *patch.in_service_date;
    if (patch.kappa) a->kappa = *patch.kappa;
    if (patch.impact_factors) a->impact_factors = *patch.impact_factors;
  } else {
    auto& h = std::get<HazardAttrs>(n.attrs);
    if (vuln_fields) mismatch("vulnerability attribute");
    if (asset_fields) mismatch("asset attribute");
    if (patch.impact_factors) h.impact_factors = *patch.impact_factors;
    if (patch.is_goal) h.is_goal = *patch.is_goal;
  }

  if (patch.evidence) {
    if (*patch.evidence) {
      out.evidence[n.id] = **patch.evidence;
    } else {
      out.evidence.erase(n.id);
    }
  }

  require_valid(out);
  return out;
}

struct ModelPatch {
  std::optional<double> attack_feasibility;
  std::optional<Date> evaluation_date;
  std::optional<EvidenceSet> evidence;  // replaces the whole set
};

inline BnModel update_model(const BnModel& model, const ModelPatch& patch) {
  BnModel out = model;
  if (patch.attack_feasibility) out.attack_feasibility = *patch.attack_feasibility;
  if (patch.evaluation_date) out.evaluation_date = *patch.evaluation_date;
  if (patch.evidence) out.evidence = *patch.evidence;
  require_valid(out);
  return out;
}

}  // namespace cpsdss
