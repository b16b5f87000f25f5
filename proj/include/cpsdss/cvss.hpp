#pragma once

#include <array>
#include <string>
#include <string_view>

#include "cpsdss/errors.hpp"

namespace cpsdss {

// CVSS 3.1 base metrics. Enumerators carry the letter used in vector strings.
enum class AttackVector : char { Network = 'N', Adjacent = 'A', Local = 'L', Physical = 'P' };
enum class AttackComplexity : char { Low = 'L', High = 'H' };
enum class PrivilegesRequired : char { None = 'N', Low = 'L', High = 'H' };
enum class UserInteraction : char { None = 'N', Required = 'R' };
enum class Scope : char { Unchanged = 'U', Changed = 'C' };
enum class CiaImpact : char { None = 'N', Low = 'L', High = 'H' };

struct CvssVector {
  AttackVector av{};
  AttackComplexity ac{};
  PrivilegesRequired pr{};
  UserInteraction ui{};
  Scope s{};
  CiaImpact c{};
  CiaImpact i{};
  CiaImpact a{};

  bool operator==(const CvssVector&) const = default;
};

// Numeric weights of the published CVSS 3.1 base table.
namespace cvss_weights {

constexpr double attack_vector(AttackVector v) {
  switch (v) {
    case AttackVector::Network: return 0.85;
    case AttackVector::Adjacent: return 0.62;
    case AttackVector::Local: return 0.55;
    case AttackVector::Physical: return 0.2;
  }
  return 0.0;
}

constexpr double attack_complexity(AttackComplexity v) {
  return v == AttackComplexity::Low ? 0.77 : 0.44;
}

// PR weights depend on scope: L and H are raised when the scope changes.
constexpr double privileges_required(PrivilegesRequired v, Scope s) {
  switch (v) {
    case PrivilegesRequired::None: return 0.85;
    case PrivilegesRequired::Low: return s == Scope::Changed ? 0.68 : 0.62;
    case PrivilegesRequired::High: return s == Scope::Changed ? 0.5 : 0.27;
  }
  return 0.0;
}

constexpr double user_interaction(UserInteraction v) {
  return v == UserInteraction::None ? 0.85 : 0.62;
}

constexpr double cia(CiaImpact v) {
  switch (v) {
    case CiaImpact::High: return 0.56;
    case CiaImpact::Low: return 0.22;
    case CiaImpact::None: return 0.0;
  }
  return 0.0;
}

}  // namespace cvss_weights

namespace detail {

inline bool one_of(char v, std::string_view allowed) {
  return allowed.find(v) != std::string_view::npos;
}

}  // namespace detail

// Parses a "CVSS:3.1/AV:_/AC:_/PR:_/UI:_/S:_/C:_/I:_/A:_" base vector. Metric
// order after the prefix is free; every base metric must appear exactly once.
inline CvssVector parse_cvss_vector(std::string_view text) {
  constexpr std::string_view prefix = "CVSS:3.1/";
  if (text.substr(0, prefix.size()) != prefix) {
    throw ParseError("CVSS vector must start with \"CVSS:3.1/\"", 0);
  }

  static constexpr std::array<std::string_view, 8> names = {"AV", "AC", "PR", "UI", "S", "C", "I", "A"};
  static constexpr std::array<std::string_view, 8> allowed = {"NALP", "LH", "NLH", "NR", "UC", "NLH", "NLH", "NLH"};
  std::array<char, 8> values{};

  std::size_t pos = prefix.size();
  if (text.back() == '/') throw ParseError("trailing '/' in CVSS vector", text.size() - 1);
  while (pos < text.size()) {
    std::size_t end = text.find('/', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view part = text.substr(pos, end - pos);
    std::size_t colon = part.find(':');
    if (colon == std::string_view::npos || colon + 2 != part.size()) {
      throw ParseError("malformed CVSS metric \"" + std::string(part) + "\"", pos);
    }
    std::string_view name = part.substr(0, colon);
    char value = part[colon + 1];

    std::size_t idx = 0;
    while (idx < names.size() && names[idx] != name) ++idx;
    if (idx == names.size()) {
      throw ParseError("unknown CVSS metric \"" + std::string(name) + "\"", pos);
    }
    if (values[idx] != 0) {
      throw ParseError("duplicate CVSS metric \"" + std::string(name) + "\"", pos);
    }
    if (!detail::one_of(value, allowed[idx])) {
      throw ParseError("invalid value '" + std::string(1, value) + "' for CVSS metric " + std::string(name), pos);
    }
    values[idx] = value;
    pos = end + 1;
  }

  for (std::size_t k = 0; k < names.size(); ++k) {
    if (values[k] == 0) {
      throw ParseError("missing CVSS metric " + std::string(names[k]));
    }
  }

  return CvssVector{static_cast<AttackVector>(values[0]),     static_cast<AttackComplexity>(values[1]),
                    static_cast<PrivilegesRequired>(values[2]), static_cast<UserInteraction>(values[3]),
                    static_cast<Scope>(values[4]),            static_cast<CiaImpact>(values[5]),
                    static_cast<CiaImpact>(values[6]),        static_cast<CiaImpact>(values[7])};
}

inline std::string to_string(const CvssVector& v) {
  std::string s = "CVSS:3.1/";
  s += "AV:";
  s += static_cast<char>(v.av);
  s += "/AC:";
  s += static_cast<char>(v.ac);
  s += "/PR:";
  s += static_cast<char>(v.pr);
  s += "/UI:";
  s += static_cast<char>(v.ui);
  s += "/S:";
  s += static_cast<char>(v.s);
  s += "/C:";
  s += static_cast<char>(v.c);
  s += "/I:";
  s += static_cast<char>(v.i);
  s += "/A:";
  s += static_cast<char>(v.a);
  return s;
}

// Exploitability proxy AV x AC x PR x UI, used as a fallback exposure
// probability for vulnerabilities without an EPSS score.
inline double exploitability_product(const CvssVector& v) {
  return cvss_weights::attack_vector(v.av) * cvss_weights::attack_complexity(v.ac) *
         cvss_weights::privileges_required(v.pr, v.s) * cvss_weights::user_interaction(v.ui);
}

// 1 - (1-C)(1-I)(1-A) over the CIA weights.
inline double vuln_impact(const CvssVector& v) {
  return 1.0 - (1.0 - cvss_weights::cia(v.c)) * (1.0 - cvss_weights::cia(v.i)) * (1.0 - cvss_weights::cia(v.a));
}

}  // namespace cpsdss
