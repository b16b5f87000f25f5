#pragma once

#include <filesystem>
#include <string>

#include "cpsdss/cpsdss.hpp"

#ifndef CPSDSS_FIXTURE_DIR
#error "CPSDSS_FIXTURE_DIR must be defined by the build"
#endif

namespace testsupport {

inline std::string fixture_path(const std::string& name) { return std::string(CPSDSS_FIXTURE_DIR) + "/" + name; }

struct Loaded {
  cpsdss::BnModel model;
  cpsdss::ScoringContext ctx;
};

inline Loaded load_fixture(const std::string& name) {
  Loaded l;
  l.model = cpsdss::parse_model(cpsdss::read_text_file(fixture_path(name) + "/model.json"));
  l.ctx.snapshot = cpsdss::load_epss_csv(fixture_path(name) + "/epss.csv");
  return l;
}

inline cpsdss::Node vuln(const std::string& id, double epss, double m = 0.0, double f = 0.0,
                         const char* vector = "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H") {
  cpsdss::VulnAttrs a;
  a.epss_override = epss;
  a.cvss_vector = cpsdss::parse_cvss_vector(vector);
  a.mitigation_prob = m;
  a.mitigation_failure_prob = f;
  return {id, id, a};
}

inline cpsdss::ImpactFactors flat_factors(double c = 0.5) {
  cpsdss::ImpactFactors f;
  f.factor = {1, 1, 1, 1, 1};
  f.criticality = {c, c, c, c, c};
  return f;
}

inline cpsdss::Node asset(const std::string& id, double rate, double kappa = 1.0,
                          cpsdss::ImpactFactors f = flat_factors()) {
  cpsdss::AssetAttrs a;
  a.failure_rate = rate;
  a.in_service_date = cpsdss::Date::from_ymd(2024, 1, 1);
  a.kappa = kappa;
  a.impact_factors = f;
  return {id, id, a};
}

inline cpsdss::Node hazard(const std::string& id, bool goal = false) {
  cpsdss::HazardAttrs h;
  h.is_goal = goal;
  return {id, id, h};
}

// V1, V2 -> A1 -> H1 (goal); 100 days of service at evaluation.
inline cpsdss::BnModel tiny_model(double e1 = 0.4, double e2 = 0.3, double rate = 0.001) {
  cpsdss::BnModel m;
  m.name = "tiny";
  m.evaluation_date = cpsdss::Date::from_ymd(2024, 4, 10);
  m.nodes = {vuln("V1", e1, 0.0, 0.2), vuln("V2", e2, 0.0, 0.4), asset("A1", rate), hazard("H1", true)};
  m.edges = {{"V1", "A1"}, {"V2", "A1"}, {"A1", "H1"}};
  return m;
}

}  // namespace testsupport
