#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpsdss/epss.hpp"
#include "cpsdss/errors.hpp"
#include "cpsdss/impact.hpp"
#include "cpsdss/pareto.hpp"
#include "cpsdss/ranking.hpp"
#include "cpsdss/stability.hpp"

namespace cpsdss {

namespace detail {

// Shortest text that parses back to the same double.
inline void append_double(std::string& out, double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, p);
}

inline double parse_exact_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw ParseError("CSV line " + std::to_string(line) + ": bad number \"" + std::string(s) + "\"");
  }
  return v;
}

}  // namespace detail

// `trial_id,likelihood,impact,availability,V1,...,Vn`, one row per record.
inline std::string trials_to_csv(std::span<const TrialRecord> records, std::span<const NodeId> vulnerability_ids) {
  std::string out = "trial_id,likelihood,impact,availability";
  for (const auto& id : vulnerability_ids) {
    out += ',';
    out += id;
  }
  out += '\n';
  for (const auto& r : records) {
    if (r.portfolio.ids.size() != vulnerability_ids.size()) throw DomainError("record portfolio size mismatch");
    out += std::to_string(r.trial_id);
    for (double v : {r.objectives.likelihood, r.objectives.impact, r.objectives.availability}) {
      out += ',';
      detail::append_double(out, v);
    }
    for (double v : r.portfolio.values) {
      out += ',';
      detail::append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

inline std::string front_to_csv(const ParetoFront& front, std::span<const NodeId> vulnerability_ids) {
  return trials_to_csv(front.members, vulnerability_ids);
}

inline std::vector<TrialRecord> trials_from_csv(std::string_view text) {
  std::vector<TrialRecord> out;
  std::vector<NodeId> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto fields = detail::split_commas(line);
    if (line_no == 1) {
      if (fields.size() < 4 || fields[0] != "trial_id" || fields[1] != "likelihood" || fields[2] != "impact" ||
          fields[3] != "availability") {
        throw ParseError("front CSV: expected header trial_id,likelihood,impact,availability,...");
      }
      for (std::size_t k = 4; k < fields.size(); ++k) ids.emplace_back(fields[k]);
      continue;
    }
    if (fields.size() != ids.size() + 4) {
      throw ParseError("front CSV line " + std::to_string(line_no) + ": wrong number of fields");
    }
    TrialRecord r;
    std::uint64_t id = 0;
    auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), id);
    if (ec != std::errc{} || p != fields[0].data() + fields[0].size()) {
      throw ParseError("front CSV line " + std::to_string(line_no) + ": bad trial id");
    }
    r.trial_id = id;
    r.objectives.likelihood = detail::parse_exact_double(fields[1], line_no);
    r.objectives.impact = detail::parse_exact_double(fields[2], line_no);
    r.objectives.availability = detail::parse_exact_double(fields[3], line_no);
    r.portfolio.ids = ids;
    for (std::size_t k = 4; k < fields.size(); ++k) {
      r.portfolio.values.push_back(detail::parse_exact_double(fields[k], line_no));
    }
    out.push_back(std::move(r));
  }
  if (line_no == 0) throw ParseError("front CSV: empty input");
  return out;
}

// Run metadata is not part of the CSV; callers supply it (run directories
// keep it in run.json).
inline ParetoFront front_from_csv(std::string_view text, std::uint64_t run_seed, std::size_t trial_count) {
  return ParetoFront{trials_from_csv(text), run_seed, trial_count};
}

inline nlohmann::json to_json(const Objectives& o) {
  return {{"likelihood", o.likelihood}, {"impact", o.impact}, {"availability", o.availability}};
}

inline nlohmann::json to_json(const Portfolio& p) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t k = 0; k < p.size(); ++k) out.push_back({{"id", p.ids[k]}, {"mitigation", p.values[k]}});
  return out;
}

inline Portfolio portfolio_from_json(const nlohmann::json& j) {
  Portfolio p;
  if (j.is_array()) {
    for (const auto& e : j) {
      if (!e.is_object() || !e.contains("id") || !e.contains("mitigation")) {
        throw ParseError("portfolio entries must be {\"id\", \"mitigation\"}");
      }
      p.ids.push_back(e.at("id").get<std::string>());
      p.values.push_back(e.at("mitigation").get<double>());
    }
  } else if (j.is_object()) {
    // {"V1": 0.3, ...}; order is resolved against a model by the caller.
    for (const auto& [k, v] : j.items()) {
      if (!v.is_number()) throw ParseError("portfolio value for " + k + " must be a number");
      p.ids.push_back(k);
      p.values.push_back(v.get<double>());
    }
  } else {
    throw ParseError("portfolio must be an array or an object");
  }
  return p;
}

// Reorders a name-keyed portfolio to the model's vulnerability order; absent
// entries take the model's stored mitigation probability.
inline Portfolio resolve_portfolio(const BnModel& model, const Portfolio& partial) {
  Portfolio p = Portfolio::from_model(model);
  for (std::size_t k = 0; k < partial.size(); ++k) {
    auto it = std::find(p.ids.begin(), p.ids.end(), partial.ids[k]);
    if (it == p.ids.end()) throw NotFoundError("portfolio names unknown vulnerability \"" + partial.ids[k] + "\"");
    p.values[static_cast<std::size_t>(it - p.ids.begin())] = partial.values[k];
  }
  p.check_against(model);
  return p;
}

inline nlohmann::json to_json(const TrialRecord& t) {
  return {{"trial_id", t.trial_id}, {"objectives", to_json(t.objectives)}, {"portfolio", to_json(t.portfolio)}};
}

inline nlohmann::json to_json(const ParetoFront& f) {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& t : f.members) members.push_back(to_json(t));
  return {{"run_seed", f.run_seed}, {"trial_count", f.trial_count}, {"members", std::move(members)}};
}

inline nlohmann::json to_json(const RankReport& r) {
  nlohmann::json ranks = nlohmann::json::array();
  for (const auto& [id, v] : r.average_rank) ranks.push_back({{"id", id}, {"average_rank", v}});
  return {{"run_count", r.run_count}, {"trials_per_run", r.trials_per_run}, {"average_rank", std::move(ranks)}};
}

inline RankReport rank_report_from_json(const nlohmann::json& j) {
  RankReport r;
  r.run_count = j.at("run_count").get<std::size_t>();
  r.trials_per_run = j.at("trials_per_run").get<std::size_t>();
  for (const auto& e : j.at("average_rank")) {
    r.average_rank.emplace_back(e.at("id").get<std::string>(), e.at("average_rank").get<double>());
  }
  return r;
}

inline nlohmann::json to_json(const StabilityMetrics& m) {
  return {{"average_density", m.average_density}, {"min_density", m.min_density},
          {"max_density", m.max_density},         {"density_variance", m.density_variance},
          {"density_entropy", m.density_entropy}, {"points", m.points},
          {"bandwidth", m.bandwidth}};
}

inline nlohmann::json to_json(const RiskSummary& r) {
  return {{"attack_likelihood", r.attack_likelihood},
          {"severe_impact", r.severe_impact},
          {"composite_risk", r.composite_risk}};
}

}  // namespace cpsdss
