#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cpsdss/errors.hpp"
#include "cpsdss/model.hpp"

namespace cpsdss {

struct EpssRecord {
  std::string cve_id;
  double score = 0.0;
  double percentile = 0.0;
  std::optional<Date> snapshot_date;

  bool operator==(const EpssRecord&) const = default;
};

// Offline cache of the FIRST EPSS feed, keyed by CVE id.
struct EpssSnapshot {
  std::map<std::string, EpssRecord> records;
  std::optional<Date> snapshot_date;

  bool empty() const { return records.empty(); }

  // Inserts or replaces a record after range checks.
  void put(EpssRecord r) {
    if (r.cve_id.empty()) throw DomainError("EPSS record without CVE id");
    if (!(r.score >= 0.0 && r.score <= 1.0)) throw DomainError("EPSS score outside [0,1] for " + r.cve_id);
    if (!(r.percentile >= 0.0 && r.percentile <= 1.0)) {
      throw DomainError("EPSS percentile outside [0,1] for " + r.cve_id);
    }
    if (!r.snapshot_date) r.snapshot_date = snapshot_date;
    records.insert_or_assign(r.cve_id, std::move(r));
  }

  // Later records win; used to fold live-fetched scores into a file snapshot.
  void merge(const EpssSnapshot& other) {
    for (const auto& [id, r] : other.records) records.insert_or_assign(id, r);
    if (other.snapshot_date && (!snapshot_date || *other.snapshot_date > *snapshot_date)) {
      snapshot_date = other.snapshot_date;
    }
  }
};

// Raw EPSS score for `cve`; throws NotFoundError when absent so callers can
// fall back to the CVSS path.
inline double epss_lookup(std::string_view cve, const EpssSnapshot& snapshot) {
  auto it = snapshot.records.find(std::string(cve));
  if (it == snapshot.records.end()) throw NotFoundError("no EPSS score for " + std::string(cve));
  return it->second.score;
}

namespace detail {

inline double parse_double_field(std::string_view s, std::size_t line) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '"' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw ParseError("EPSS CSV line " + std::to_string(line) + ": bad number \"" + std::string(s) + "\"");
  }
  return v;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t c = line.find(',', pos);
    out.push_back(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
    if (c == std::string_view::npos) break;
    pos = c + 1;
  }
  return out;
}

}  // namespace detail

// Reads the FIRST CSV export: optional "#model_version:...,score_date:..."
// comment line, then a `cve,epss,percentile` header and one row per CVE.
inline EpssSnapshot parse_epss_csv(std::istream& in) {
  EpssSnapshot snap;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      auto k = line.find("score_date:");
      if (k != std::string::npos) snap.snapshot_date = Date::parse(std::string_view(line).substr(k + 11, 10));
      continue;
    }
    auto fields = detail::split_commas(line);
    if (!header_seen) {
      if (fields.size() < 3 || fields[0] != "cve" || fields[1] != "epss" || fields[2] != "percentile") {
        throw ParseError("EPSS CSV line " + std::to_string(line_no) + ": expected header cve,epss,percentile");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() < 3) throw ParseError("EPSS CSV line " + std::to_string(line_no) + ": expected 3 fields");
    EpssRecord r;
    r.cve_id = std::string(fields[0]);
    r.score = detail::parse_double_field(fields[1], line_no);
    r.percentile = detail::parse_double_field(fields[2], line_no);
    if (snap.records.contains(r.cve_id)) {
      throw ParseError("EPSS CSV line " + std::to_string(line_no) + ": duplicate CVE " + r.cve_id);
    }
    try {
      snap.put(std::move(r));
    } catch (const DomainError& e) {
      throw ParseError("EPSS CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header_seen) throw ParseError("EPSS CSV: missing header");
  return snap;
}

inline EpssSnapshot load_epss_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open EPSS snapshot " + path);
  return parse_epss_csv(in);
}

}  // namespace cpsdss
