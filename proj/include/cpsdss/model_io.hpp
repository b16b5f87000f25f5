#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "cpsdss/cvss.hpp"
#include "cpsdss/errors.hpp"
#include "cpsdss/model.hpp"

namespace cpsdss {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> known, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ParseError(where + ": unknown key \"" + key + "\"");
    }
  }
}

inline const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing \"" + key + "\"");
  return *it;
}

inline double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  return v.get<double>();
}

inline std::string text(const json& v, const std::string& where) {
  if (!v.is_string()) throw ParseError(where + ": expected a string");
  return v.get<std::string>();
}

inline ImpactFactors impact_factors_from_json(const json& v, const std::string& where) {
  if (!v.is_object()) throw ParseError(where + ": impact_factors must be an object");
  reject_unknown_keys(v, {"S", "F", "I", "O", "C"}, where + ".impact_factors");
  ImpactFactors f;
  for (std::size_t j = 0; j < kImpactDimensions.size(); ++j) {
    const std::string key(kImpactDimensions[j]);
    const json& pair = require(v, key.c_str(), where + ".impact_factors");
    if (!pair.is_array() || pair.size() != 2) {
      throw ParseError(where + ".impact_factors." + key + ": expected [factor, criticality]");
    }
    f.factor[j] = number(pair[0], where + ".impact_factors." + key);
    f.criticality[j] = number(pair[1], where + ".impact_factors." + key);
  }
  return f;
}

inline json impact_factors_to_json(const ImpactFactors& f) {
  json out = json::object();
  for (std::size_t j = 0; j < kImpactDimensions.size(); ++j) {
    out[std::string(kImpactDimensions[j])] = {f.factor[j], f.criticality[j]};
  }
  return out;
}

inline std::optional<double> optional_number(const json& attrs, const char* key, const std::string& where) {
  auto it = attrs.find(key);
  if (it == attrs.end() || it->is_null()) return std::nullopt;
  return number(*it, where + "." + key);
}

inline VulnAttrs vuln_from_json(const json& a, const std::string& where) {
  reject_unknown_keys(a, {"cve_id", "cvss_vector", "epss_override", "mitigation_prob", "mitigation_failure_prob",
                          "attack_feasibility"},
                      where);
  VulnAttrs v;
  if (auto it = a.find("cve_id"); it != a.end() && !it->is_null()) v.cve_id = text(*it, where + ".cve_id");
  if (auto it = a.find("cvss_vector"); it != a.end() && !it->is_null()) {
    v.cvss_vector = parse_cvss_vector(text(*it, where + ".cvss_vector"));
  }
  v.epss_override = optional_number(a, "epss_override", where);
  v.mitigation_prob = optional_number(a, "mitigation_prob", where).value_or(0.0);
  v.mitigation_failure_prob = optional_number(a, "mitigation_failure_prob", where).value_or(0.0);
  v.attack_feasibility = optional_number(a, "attack_feasibility", where);
  return v;
}

inline AssetAttrs asset_from_json(const json& a, const std::string& where) {
  reject_unknown_keys(a, {"failure_rate", "in_service_date", "kappa", "impact_factors"}, where);
  AssetAttrs out;
  out.failure_rate = number(require(a, "failure_rate", where), where + ".failure_rate");
  out.in_service_date = Date::parse(text(require(a, "in_service_date", where), where + ".in_service_date"));
  out.kappa = optional_number(a, "kappa", where).value_or(1.0);
  out.impact_factors = impact_factors_from_json(require(a, "impact_factors", where), where);
  return out;
}

inline HazardAttrs hazard_from_json(const json& a, const std::string& where) {
  reject_unknown_keys(a, {"impact_factors", "is_goal"}, where);
  HazardAttrs h;
  if (auto it = a.find("impact_factors"); it != a.end() && !it->is_null()) {
    h.impact_factors = impact_factors_from_json(*it, where);
  }
  if (auto it = a.find("is_goal"); it != a.end()) {
    if (!it->is_boolean()) throw ParseError(where + ".is_goal: expected a boolean");
    h.is_goal = it->get<bool>();
  }
  return h;
}

inline EvidenceSet evidence_from_json(const json& v, const std::string& where) {
  if (!v.is_object()) throw ParseError(where + ": evidence must be an object of node -> 0|1");
  EvidenceSet ev;
  for (const auto& [id, state] : v.items()) {
    if (!state.is_number_integer()) throw ParseError(where + "." + id + ": evidence state must be 0 or 1");
    ev[id] = state.get<int>();
  }
  return ev;
}

}  // namespace detail

// Builds a model from a parsed document without validating invariants.
inline BnModel model_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("model document must be an object");
  detail::reject_unknown_keys(doc, {"name", "nodes", "edges", "attack_feasibility", "evaluation_date", "evidence"},
                              "model");
  BnModel m;
  if (auto it = doc.find("name"); it != doc.end()) m.name = detail::text(*it, "name");
  m.attack_feasibility = detail::optional_number(doc, "attack_feasibility", "model").value_or(1.0);
  m.evaluation_date = Date::parse(detail::text(detail::require(doc, "evaluation_date", "model"), "evaluation_date"));

  const json& nodes = detail::require(doc, "nodes", "model");
  if (!nodes.is_array()) throw ParseError("nodes must be an array");
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const json& jn = nodes[k];
    const std::string where = "nodes[" + std::to_string(k) + "]";
    if (!jn.is_object()) throw ParseError(where + ": expected an object");
    detail::reject_unknown_keys(jn, {"id", "kind", "label", "attrs"}, where);
    Node n;
    n.id = detail::text(detail::require(jn, "id", where), where + ".id");
    if (auto it = jn.find("label"); it != jn.end()) n.label = detail::text(*it, where + ".label");
    const std::string kind = detail::text(detail::require(jn, "kind", where), where + ".kind");
    const json attrs = jn.contains("attrs") ? jn.at("attrs") : json::object();
    if (!attrs.is_object()) throw ParseError(where + ".attrs: expected an object");
    const std::string aw = where + ".attrs";
    if (kind == "vulnerability") {
      n.attrs = detail::vuln_from_json(attrs, aw);
    } else if (kind == "asset") {
      n.attrs = detail::asset_from_json(attrs, aw);
    } else if (kind == "hazard") {
      n.attrs = detail::hazard_from_json(attrs, aw);
    } else {
      throw ParseError(where + ": unknown node kind \"" + kind + "\"");
    }
    m.nodes.push_back(std::move(n));
  }

  const json& edges = detail::require(doc, "edges", "model");
  if (!edges.is_array()) throw ParseError("edges must be an array");
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const json& e = edges[k];
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
      throw ParseError("edges[" + std::to_string(k) + "]: expected [parent, child]");
    }
    m.edges.push_back({e[0].get<std::string>(), e[1].get<std::string>()});
  }

  if (auto it = doc.find("evidence"); it != doc.end()) m.evidence = detail::evidence_from_json(*it, "evidence");
  return m;
}

// Parses and validates a model document. Throws ParseError for malformed
// text or schema, ValidationError for violated invariants.
inline BnModel parse_model(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model document syntax error: ") + e.what(), e.byte);
  }
  BnModel m;
  try {
    m = model_from_json(doc);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model document schema error: ") + e.what());
  }
  require_valid(m);
  return m;
}

inline json to_json(const BnModel& m) {
  json doc;
  if (!m.name.empty()) doc["name"] = m.name;
  doc["attack_feasibility"] = m.attack_feasibility;
  doc["evaluation_date"] = m.evaluation_date.to_iso();
  json nodes = json::array();
  for (const auto& n : m.nodes) {
    json jn;
    jn["id"] = n.id;
    jn["kind"] = std::string(to_string(n.kind()));
    if (!n.label.empty()) jn["label"] = n.label;
    json a = json::object();
    if (const auto* v = std::get_if<VulnAttrs>(&n.attrs)) {
      if (v->cve_id) a["cve_id"] = *v->cve_id;
      if (v->cvss_vector) a["cvss_vector"] = to_string(*v->cvss_vector);
      if (v->epss_override) a["epss_override"] = *v->epss_override;
      a["mitigation_prob"] = v->mitigation_prob;
      a["mitigation_failure_prob"] = v->mitigation_failure_prob;
      if (v->attack_feasibility) a["attack_feasibility"] = *v->attack_feasibility;
    } else if (const auto* as = std::get_if<AssetAttrs>(&n.attrs)) {
      a["failure_rate"] = as->failure_rate;
      a["in_service_date"] = as->in_service_date.to_iso();
      a["kappa"] = as->kappa;
      a["impact_factors"] = detail::impact_factors_to_json(as->impact_factors);
    } else {
      const auto& h = n.hazard();
      if (h.impact_factors) a["impact_factors"] = detail::impact_factors_to_json(*h.impact_factors);
      a["is_goal"] = h.is_goal;
    }
    jn["attrs"] = std::move(a);
    nodes.push_back(std::move(jn));
  }
  doc["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const auto& e : m.edges) edges.push_back({e.parent, e.child});
  doc["edges"] = std::move(edges);
  if (!m.evidence.empty()) {
    json ev = json::object();
    for (const auto& [id, s] : m.evidence) ev[id] = s;
    doc["evidence"] = std::move(ev);
  }
  return doc;
}

inline std::string serialize_model(const BnModel& m) { return to_json(m).dump(2); }

// Attribute delta from a JSON object. `null` clears optional attributes;
// "evidence": null clears the node's evidence.
inline NodePatch node_patch_from_json(const json& p) {
  if (!p.is_object()) throw ParseError("patch must be an object");
  detail::reject_unknown_keys(p, {"label", "cve_id", "cvss_vector", "epss_override", "mitigation_prob",
                                  "mitigation_failure_prob", "attack_feasibility", "failure_rate", "in_service_date",
                                  "kappa", "impact_factors", "is_goal", "evidence"},
                              "patch");
  NodePatch out;
  const std::string w = "patch";
  try {
    if (p.contains("label")) out.label = detail::text(p["label"], w + ".label");
    if (p.contains("cve_id")) {
      out.cve_id = p["cve_id"].is_null() ? std::optional<std::string>{} : detail::text(p["cve_id"], w + ".cve_id");
    }
    if (p.contains("cvss_vector")) {
      out.cvss_vector = p["cvss_vector"].is_null()
                            ? std::optional<CvssVector>{}
                            : std::optional<CvssVector>(parse_cvss_vector(detail::text(p["cvss_vector"], w)));
    }
    auto nullable_number = [&](const char* key) -> std::optional<std::optional<double>> {
      if (!p.contains(key)) return std::nullopt;
      if (p[key].is_null()) return std::optional<double>{};
      return std::optional<double>(detail::number(p[key], w + "." + key));
    };
    auto plain_number = [&](const char* key) -> std::optional<double> {
      if (!p.contains(key)) return std::nullopt;
      return detail::number(p[key], w + "." + key);
    };
    out.epss_override = nullable_number("epss_override");
    out.attack_feasibility = nullable_number("attack_feasibility");
    out.mitigation_prob = plain_number("mitigation_prob");
    out.mitigation_failure_prob = plain_number("mitigation_failure_prob");
    out.failure_rate = plain_number("failure_rate");
    out.kappa = plain_number("kappa");
    if (p.contains("in_service_date")) out.in_service_date = Date::parse(detail::text(p["in_service_date"], w));
    if (p.contains("impact_factors")) out.impact_factors = detail::impact_factors_from_json(p["impact_factors"], w);
    if (p.contains("is_goal")) {
      if (!p["is_goal"].is_boolean()) throw ParseError("patch.is_goal: expected a boolean");
      out.is_goal = p["is_goal"].get<bool>();
    }
    if (p.contains("evidence")) {
      const json& e = p["evidence"];
      if (e.is_null()) {
        out.evidence = std::optional<int>{};
      } else if (e.is_number_integer()) {
        out.evidence = std::optional<int>(e.get<int>());
      } else {
        throw ParseError("patch.evidence: expected 0, 1 or null");
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("patch schema error: ") + e.what());
  }
  return out;
}

inline ModelPatch model_patch_from_json(const json& p) {
  if (!p.is_object()) throw ParseError("patch must be an object");
  detail::reject_unknown_keys(p, {"attack_feasibility", "evaluation_date", "evidence"}, "patch");
  ModelPatch out;
  if (p.contains("attack_feasibility")) out.attack_feasibility = detail::number(p["attack_feasibility"], "patch");
  if (p.contains("evaluation_date")) out.evaluation_date = Date::parse(detail::text(p["evaluation_date"], "patch"));
  if (p.contains("evidence")) out.evidence = detail::evidence_from_json(p["evidence"], "patch.evidence");
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json to_json(const Diagnostic& d) {
  return {{"invariant", d.invariant}, {"subject", d.subject}, {"message", d.message}};
}

}  // namespace cpsdss
