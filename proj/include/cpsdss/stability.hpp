#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "cpsdss/errors.hpp"
#include "cpsdss/pareto.hpp"

namespace cpsdss {

using Point3 = std::array<double, 3>;

inline Point3 objective_point(const TrialRecord& t) {
  return {t.objectives.likelihood, t.objectives.impact, t.objectives.availability};
}

inline std::vector<Point3> objective_points(const ParetoFront& f) {
  std::vector<Point3> out;
  out.reserve(f.members.size());
  for (const auto& t : f.members) out.push_back(objective_point(t));
  return out;
}

struct StabilityMetrics {
  double average_density = 0.0;
  double min_density = 0.0;
  double max_density = 0.0;
  double density_variance = 0.0;
  double density_entropy = 0.0;
  std::size_t points = 0;
  std::array<double, 3> bandwidth{};  // 0 marks a dimension left out (no spread)
};

// KDE bandwidth: Scott's rule per dimension, or one explicit value.
struct Bandwidth {
  std::optional<double> value;

  static Bandwidth scott() { return {}; }
  static Bandwidth fixed(double h) { return {h}; }
};

// Product-Gaussian KDE evaluated at each front point. Under Scott's rule a
// dimension with zero spread carries no density information and is left out
// of the kernel; if every dimension is flat the bandwidth is zero and this
// throws. Entropy is the Shannon entropy (nats) of the normalised densities.
inline StabilityMetrics stability_metrics(std::span<const Point3> pts, Bandwidth bw = Bandwidth::scott()) {
  const std::size_t n = pts.size();
  if (n < 2) throw DomainError("stability metrics need at least two points");

  std::array<double, 3> h{};
  if (bw.value) {
    if (!(*bw.value > 0.0)) throw DomainError("KDE bandwidth must be positive");
    h.fill(*bw.value);
  } else {
    std::size_t active = 0;
    std::array<double, 3> sd{};
    for (std::size_t d = 0; d < 3; ++d) {
      double mean = 0.0;
      for (const auto& p : pts) mean += p[d];
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (const auto& p : pts) ss += (p[d] - mean) * (p[d] - mean);
      sd[d] = std::sqrt(ss / static_cast<double>(n - 1));
      if (sd[d] > 0.0) ++active;
    }
    if (active == 0) throw DomainError("KDE bandwidth is zero: all points coincide");
    const double factor = std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(active) + 4.0));
    for (std::size_t d = 0; d < 3; ++d) h[d] = sd[d] * factor;
  }

  double norm = 1.0;
  for (double hd : h) {
    if (hd > 0.0) norm *= 1.0 / (hd * std::sqrt(2.0 * std::numbers::pi));
  }

  std::vector<double> dens(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double q = 0.0;
      for (std::size_t d = 0; d < 3; ++d) {
        if (h[d] > 0.0) {
          double z = (pts[i][d] - pts[j][d]) / h[d];
          q += z * z;
        }
      }
      s += std::exp(-0.5 * q);
    }
    dens[i] = norm * s / static_cast<double>(n);
  }

  StabilityMetrics m;
  m.points = n;
  m.bandwidth = h;
  m.min_density = *std::min_element(dens.begin(), dens.end());
  m.max_density = *std::max_element(dens.begin(), dens.end());
  double total = 0.0;
  for (double v : dens) total += v;
  m.average_density = total / static_cast<double>(n);
  double var = 0.0;
  for (double v : dens) var += (v - m.average_density) * (v - m.average_density);
  m.density_variance = var / static_cast<double>(n);
  double ent = 0.0;
  for (double v : dens) {
    double p = v / total;
    if (p > 0.0) ent -= p * std::log(p);
  }
  m.density_entropy = ent;
  return m;
}

inline StabilityMetrics stability_metrics(const ParetoFront& front, Bandwidth bw = Bandwidth::scott()) {
  auto pts = objective_points(front);
  return stability_metrics(pts, bw);
}

inline double euclidean(const Point3& a, const Point3& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < 3; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return std::sqrt(s);
}

// Symmetric Hausdorff distance between two point sets in objective space.
inline double hausdorff_distance(std::span<const Point3> a, std::span<const Point3> b) {
  if (a.empty() || b.empty()) throw DomainError("Hausdorff distance needs nonempty sets");
  auto directed = [](std::span<const Point3> x, std::span<const Point3> y) {
    double worst = 0.0;
    for (const auto& p : x) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : y) best = std::min(best, euclidean(p, q));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

// Mean Hausdorff distance over all unordered pairs of fronts: run-to-run
// dispersion of the optimisation outcome.
inline double mean_pairwise_hausdorff(std::span<const ParetoFront> fronts) {
  if (fronts.size() < 2) throw DomainError("dispersion needs at least two fronts");
  std::vector<std::vector<Point3>> pts;
  for (const auto& f : fronts) pts.push_back(objective_points(f));
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      sum += hausdorff_distance(pts[i], pts[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

}  // namespace cpsdss
