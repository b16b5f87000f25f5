#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpsdss/errors.hpp"
#include "cpsdss/model.hpp"

namespace cpsdss {

// A table over binary variables. Bit k of a table index is the state of
// scope[k], so table.size() == 2^scope.size().
struct Factor {
  std::vector<NodeId> scope;
  std::vector<double> table;

  bool operator==(const Factor&) const = default;
};

// (P(state 0), P(state 1)).
using Marginal = std::array<double, 2>;

namespace detail {

// Factor over integer variable ids; bit k of an index is the state of vars[k].
struct IndexedFactor {
  std::vector<int> vars;
  std::vector<double> table;

  int position(int v) const {
    for (std::size_t k = 0; k < vars.size(); ++k) {
      if (vars[k] == v) return static_cast<int>(k);
    }
    return -1;
  }
};

inline IndexedFactor multiply(const IndexedFactor& a, const IndexedFactor& b) {
  IndexedFactor out;
  out.vars = a.vars;
  std::vector<int> b_pos(b.vars.size());
  for (std::size_t k = 0; k < b.vars.size(); ++k) {
    int p = a.position(b.vars[k]);
    if (p < 0) {
      p = static_cast<int>(out.vars.size());
      out.vars.push_back(b.vars[k]);
    }
    b_pos[k] = p;
  }
  const std::size_t n = std::size_t{1} << out.vars.size();
  const std::size_t a_mask = (std::size_t{1} << a.vars.size()) - 1;
  out.table.resize(n);
  for (std::size_t u = 0; u < n; ++u) {
    std::size_t ib = 0;
    for (std::size_t k = 0; k < b_pos.size(); ++k) ib |= ((u >> b_pos[k]) & 1u) << k;
    out.table[u] = a.table[u & a_mask] * b.table[ib];
  }
  return out;
}

// Removes variable at position p, keeping entries with that variable in
// `state` (state >= 0) or summing over it (state < 0).
inline IndexedFactor drop_position(const IndexedFactor& f, int p, int state) {
  IndexedFactor out;
  out.vars = f.vars;
  out.vars.erase(out.vars.begin() + p);
  const std::size_t n = std::size_t{1} << out.vars.size();
  const std::size_t low_mask = (std::size_t{1} << p) - 1;
  out.table.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t i0 = ((r & ~low_mask) << 1) | (r & low_mask);
    std::size_t i1 = i0 | (std::size_t{1} << p);
    out.table[r] = state < 0 ? f.table[i0] + f.table[i1] : (state == 0 ? f.table[i0] : f.table[i1]);
  }
  return out;
}

inline IndexedFactor sum_out(const IndexedFactor& f, int v) { return drop_position(f, f.position(v), -1); }

inline IndexedFactor restrict_to(const IndexedFactor& f, int v, int state) {
  return drop_position(f, f.position(v), state);
}

// Greedy min-degree elimination order over the interaction graph of
// `scopes`: repeatedly take the variable with the fewest current neighbours,
// ties by name.
inline std::vector<int> min_degree_order(std::vector<std::vector<int>> scopes, std::vector<int> to_eliminate,
                                         std::span<const std::string> names) {
  std::vector<int> order;
  order.reserve(to_eliminate.size());
  while (!to_eliminate.empty()) {
    std::size_t best = 0;
    std::size_t best_degree = static_cast<std::size_t>(-1);
    std::vector<int> best_neighbours;
    for (std::size_t c = 0; c < to_eliminate.size(); ++c) {
      int v = to_eliminate[c];
      std::vector<int> nb;
      for (const auto& s : scopes) {
        if (std::find(s.begin(), s.end(), v) == s.end()) continue;
        for (int u : s) {
          if (u != v && std::find(nb.begin(), nb.end(), u) == nb.end()) nb.push_back(u);
        }
      }
      if (nb.size() < best_degree ||
          (nb.size() == best_degree && names[v] < names[to_eliminate[best]])) {
        best = c;
        best_degree = nb.size();
        best_neighbours = std::move(nb);
      }
    }
    int v = to_eliminate[best];
    order.push_back(v);
    to_eliminate.erase(to_eliminate.begin() + static_cast<std::ptrdiff_t>(best));
    std::erase_if(scopes, [v](const std::vector<int>& s) { return std::find(s.begin(), s.end(), v) != s.end(); });
    scopes.push_back(std::move(best_neighbours));
  }
  return order;
}

// Sums every variable in `order` out of the product of `factors`, then
// multiplies what remains. The result's scope is whatever was not eliminated.
inline IndexedFactor eliminate(std::vector<IndexedFactor> factors, std::span<const int> order) {
  for (int v : order) {
    IndexedFactor prod{{}, {1.0}};
    bool touched = false;
    std::vector<IndexedFactor> rest;
    rest.reserve(factors.size());
    for (auto& f : factors) {
      if (f.position(v) >= 0) {
        prod = touched ? multiply(prod, f) : std::move(f);
        touched = true;
      } else {
        rest.push_back(std::move(f));
      }
    }
    if (touched) rest.push_back(sum_out(prod, v));
    factors = std::move(rest);
  }
  IndexedFactor result{{}, {1.0}};
  for (const auto& f : factors) result = multiply(result, f);
  return result;
}

// Marginal of `query` from a product whose scope is {query} or empty.
inline Marginal normalised_marginal(const IndexedFactor& f, int query) {
  if (f.vars.size() != 1 || f.vars[0] != query) throw Error("elimination left variables besides the query");
  Marginal m{f.table[0], f.table[1]};
  double z = m[0] + m[1];
  if (!(z > 0.0) || !std::isfinite(z)) throw InconsistentEvidenceError("evidence has zero probability");
  m[0] /= z;
  m[1] /= z;
  return m;
}

// Reduces factors by evidence. Evidence on the query variable becomes an
// indicator factor so the query keeps its scope.
inline std::vector<IndexedFactor> apply_evidence(std::vector<IndexedFactor> factors,
                                                 const std::vector<std::pair<int, int>>& evidence, int query) {
  for (const auto& [v, state] : evidence) {
    if (v == query) {
      IndexedFactor ind{{v}, {state == 0 ? 1.0 : 0.0, state == 1 ? 1.0 : 0.0}};
      factors.push_back(std::move(ind));
      continue;
    }
    for (auto& f : factors) {
      if (f.position(v) >= 0) f = restrict_to(f, v, state);
    }
  }
  return factors;
}

}  // namespace detail

// Elimination order policy. An explicit order must name every non-query,
// non-evidence variable exactly once.
struct EliminationOrder {
  std::optional<std::vector<NodeId>> explicit_order;

  static EliminationOrder min_degree() { return {}; }
  static EliminationOrder given(std::vector<NodeId> order) { return {std::move(order)}; }
};

// Exact posterior marginal of `query` given `evidence` by variable elimination.
inline Marginal variable_elimination(std::span<const Factor> factors, std::string_view query,
                                     const EvidenceSet& evidence,
                                     const EliminationOrder& policy = EliminationOrder::min_degree()) {
  std::map<NodeId, int> index;
  std::vector<std::string> names;
  auto var = [&](const NodeId& id) {
    auto [it, fresh] = index.emplace(id, static_cast<int>(names.size()));
    if (fresh) names.push_back(id);
    return it->second;
  };

  std::vector<detail::IndexedFactor> ifs;
  ifs.reserve(factors.size());
  for (const auto& f : factors) {
    if (f.table.size() != (std::size_t{1} << f.scope.size())) {
      throw DomainError("factor table size does not match its scope");
    }
    detail::IndexedFactor g;
    for (const auto& id : f.scope) g.vars.push_back(var(id));
    g.table = f.table;
    ifs.push_back(std::move(g));
  }

  auto q = index.find(std::string(query));
  if (q == index.end()) throw NotFoundError("query node \"" + std::string(query) + "\" not in any factor");
  const int qv = q->second;

  std::vector<std::pair<int, int>> ev;
  for (const auto& [id, state] : evidence) {
    auto it = index.find(id);
    if (it == index.end()) throw NotFoundError("evidence node \"" + id + "\" not in any factor");
    if (state != 0 && state != 1) throw DomainError("evidence state must be 0 or 1");
    ev.emplace_back(it->second, state);
  }

  ifs = detail::apply_evidence(std::move(ifs), ev, qv);

  std::vector<int> order;
  if (policy.explicit_order) {
    std::set<int> expected;
    for (int v = 0; v < static_cast<int>(names.size()); ++v) {
      if (v != qv && !evidence.contains(names[v])) expected.insert(v);
    }
    for (const auto& id : *policy.explicit_order) {
      auto it = index.find(id);
      if (it == index.end() || !expected.erase(it->second)) {
        throw DomainError("elimination order entry \"" + id + "\" is unknown, repeated, the query or evidence");
      }
      order.push_back(it->second);
    }
    if (!expected.empty()) throw DomainError("elimination order does not cover every hidden variable");
  } else {
    std::vector<int> hidden;
    for (int v = 0; v < static_cast<int>(names.size()); ++v) {
      if (v != qv && !evidence.contains(names[v])) hidden.push_back(v);
    }
    std::vector<std::vector<int>> scopes;
    for (const auto& f : ifs) scopes.push_back(f.vars);
    order = detail::min_degree_order(std::move(scopes), std::move(hidden), names);
  }

  return detail::normalised_marginal(detail::eliminate(std::move(ifs), order), qv);
}

}  // namespace cpsdss
