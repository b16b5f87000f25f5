#pragma once

// Reference implementations used only by tests. They are deliberately naive
// and share no code with the engine beyond plain data types.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cpsdss/factor.hpp"
#include "cpsdss/pareto.hpp"

namespace oracle {

// CVSS 3.1 exploitability from the metric letters, straight off the table.
inline double exploitability(char av, char ac, char pr, char ui, char scope) {
  const std::map<char, double> AV{{'N', 0.85}, {'A', 0.62}, {'L', 0.55}, {'P', 0.2}};
  const std::map<char, double> AC{{'L', 0.77}, {'H', 0.44}};
  const std::map<char, double> UI{{'N', 0.85}, {'R', 0.62}};
  double p = pr == 'N' ? 0.85 : pr == 'L' ? (scope == 'C' ? 0.68 : 0.62) : (scope == 'C' ? 0.5 : 0.27);
  return AV.at(av) * AC.at(ac) * p * UI.at(ui);
}

// Precision-weighted Gaussian update written out longhand.
inline std::pair<double, double> gaussian_posterior(double mu0, double var0, const std::vector<std::pair<double, double>>& obs) {
  double precision = 1.0 / var0;
  double weighted = mu0 / var0;
  for (auto [x, v] : obs) {
    precision += 1.0 / v;
    weighted += x / v;
  }
  return {weighted / precision, 1.0 / precision};
}

// Marginal of `query` by summing the full joint over every assignment.
// Factors use the engine's layout: bit k of a table index is scope[k].
inline cpsdss::Marginal enumerate(const std::vector<cpsdss::Factor>& factors, const std::string& query,
                                  const std::map<std::string, int>& evidence) {
  std::vector<std::string> vars;
  for (const auto& f : factors) {
    for (const auto& v : f.scope) {
      if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
    }
  }
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < vars.size(); ++i) pos[vars[i]] = i;
  std::array<double, 2> acc{0.0, 0.0};
  const std::uint64_t n = std::uint64_t{1} << vars.size();
  for (std::uint64_t a = 0; a < n; ++a) {
    bool consistent = true;
    for (const auto& [v, s] : evidence) {
      if (static_cast<int>((a >> pos.at(v)) & 1) != s) consistent = false;
    }
    if (!consistent) continue;
    double w = 1.0;
    for (const auto& f : factors) {
      std::size_t idx = 0;
      for (std::size_t k = 0; k < f.scope.size(); ++k) idx |= ((a >> pos.at(f.scope[k])) & 1) << k;
      w *= f.table[idx];
      if (w == 0.0) break;
    }
    acc[(a >> pos.at(query)) & 1] += w;
  }
  double z = acc[0] + acc[1];
  return {acc[0] / z, acc[1] / z};
}

// O(n^2) nondominated set: trial ids not dominated by any other record.
inline std::set<std::uint64_t> brute_force_front(const std::vector<cpsdss::TrialRecord>& t) {
  auto dom = [](const cpsdss::Objectives& a, const cpsdss::Objectives& b) {
    bool no_worse = a.likelihood <= b.likelihood && a.impact <= b.impact && a.availability >= b.availability;
    bool better = a.likelihood < b.likelihood || a.impact < b.impact || a.availability > b.availability;
    return no_worse && better;
  };
  std::set<std::uint64_t> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < t.size() && !dominated; ++j) dominated = j != i && dom(t[j].objectives, t[i].objectives);
    if (!dominated) out.insert(t[i].trial_id);
  }
  return out;
}

// Random OR-gate network of n nodes with edges only from lower to higher
// index, so it is acyclic by construction.
struct RandomNetwork {
  std::vector<cpsdss::Factor> factors;
  std::vector<std::string> names;
};

inline RandomNetwork random_or_network(std::mt19937_64& rng, int n, double edge_prob, int max_parents = 4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RandomNetwork net;
  for (int i = 0; i < n; ++i) net.names.push_back("X" + std::to_string(i));
  for (int i = 0; i < n; ++i) {
    std::vector<int> parents;
    for (int j = 0; j < i; ++j) {
      if (static_cast<int>(parents.size()) < max_parents && u(rng) < edge_prob) parents.push_back(j);
    }
    double p = u(rng);
    cpsdss::Factor f;
    f.scope.push_back(net.names[i]);
    for (int j : parents) f.scope.push_back(net.names[j]);
    f.table.assign(std::size_t{1} << f.scope.size(), 0.0);
    for (std::size_t idx = 0; idx < f.table.size(); ++idx) {
      bool any = parents.empty() || (idx >> 1) != 0;
      double p1 = any ? p : 0.0;
      f.table[idx] = (idx & 1) ? p1 : 1.0 - p1;
    }
    net.factors.push_back(std::move(f));
  }
  return net;
}

}  // namespace oracle
