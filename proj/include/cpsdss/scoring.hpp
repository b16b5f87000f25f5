#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpsdss/cvss.hpp"
#include "cpsdss/epss.hpp"
#include "cpsdss/errors.hpp"
#include "cpsdss/model.hpp"

namespace cpsdss {

struct GaussianBelief {
  double mean = 0.0;
  double variance = 1.0;

  bool operator==(const GaussianBelief&) const = default;
};

struct Observation {
  double value = 0.0;
  double variance = 1.0;
};

struct CalibrationConfig {
  double prior_mean = 0.5;
  double prior_variance = 0.0025;
  double cvss_variance = 0.04;
  double epss_variance = 0.01;

  void check() const {
    if (!(prior_variance > 0.0 && cvss_variance > 0.0 && epss_variance > 0.0)) {
      throw DomainError("calibration variances must be positive");
    }
    if (!(cvss_variance > epss_variance)) {
      throw DomainError("CVSS variance must exceed EPSS variance");
    }
  }

  GaussianBelief prior() const { return {prior_mean, prior_variance}; }
};

// How CVE-linked vulnerabilities are scored.
enum class ExposureMode {
  EpssDirect,  // raw EPSS when available, calibrated CVSS otherwise
  Hybrid,      // calibrate over every available observation
};

// Precision-weighted Gaussian update of a prior by independent observations
// of the same latent exposure. Empty `observations` returns the prior.
inline GaussianBelief calibrate(const GaussianBelief& prior, std::span<const Observation> observations) {
  if (!(prior.variance > 0.0)) throw DomainError("prior variance must be positive");
  double precision = 1.0 / prior.variance;
  double weighted = prior.mean / prior.variance;
  for (const auto& o : observations) {
    if (!(o.variance > 0.0)) throw DomainError("observation variance must be positive");
    precision += 1.0 / o.variance;
    weighted += o.value / o.variance;
  }
  return {weighted / precision, 1.0 / precision};
}

inline GaussianBelief calibrate(const GaussianBelief& prior, std::initializer_list<Observation> observations) {
  return calibrate(prior, std::span<const Observation>(observations.begin(), observations.size()));
}

struct ExposureEstimate {
  double probability = 0.0;
  std::optional<GaussianBelief> belief;  // set when the value came from calibration
  bool clamped = false;                  // posterior mean left [0,1]
};

// EPSS score for a vulnerability: the explicit override first, then the
// snapshot entry for its CVE.
inline std::optional<double> epss_score(const VulnAttrs& attrs, const EpssSnapshot& snapshot) {
  if (attrs.epss_override) return attrs.epss_override;
  if (attrs.cve_id) {
    auto it = snapshot.records.find(*attrs.cve_id);
    if (it != snapshot.records.end()) return it->second.score;
  }
  return std::nullopt;
}

inline ExposureEstimate vuln_exposure(const VulnAttrs& attrs, const CalibrationConfig& config,
                                      const EpssSnapshot& snapshot, ExposureMode mode = ExposureMode::EpssDirect) {
  config.check();
  const auto epss = epss_score(attrs, snapshot);
  const std::optional<double> cvss =
      attrs.cvss_vector ? std::optional<double>(exploitability_product(*attrs.cvss_vector)) : std::nullopt;

  if (!epss && !cvss) {
    throw NotFoundError(attrs.cve_id ? "no EPSS score for " + *attrs.cve_id + " and no CVSS vector"
                                     : std::string("vulnerability has no usable scoring source"));
  }

  if (mode == ExposureMode::EpssDirect && epss) return {*epss, std::nullopt, false};

  std::vector<Observation> obs;
  if (mode == ExposureMode::Hybrid && epss) obs.push_back({*epss, config.epss_variance});
  if (cvss) obs.push_back({*cvss, config.cvss_variance});
  GaussianBelief post = calibrate(config.prior(), obs);
  double p = std::clamp(post.mean, 0.0, 1.0);
  return {p, post, p != post.mean};
}

// Exposure scaled by attack feasibility, clamped to 1.
inline double attack_probability(double exposure, double feasibility) {
  if (!(exposure >= 0.0 && exposure <= 1.0)) throw DomainError("exposure outside [0,1]");
  if (!(feasibility >= 0.0)) throw DomainError("attack feasibility must be nonnegative");
  return std::min(1.0, exposure * feasibility);
}

// 1 - exp(-rate * duration): rate per day, duration in days.
inline double asset_failure_probability(double rate, double duration_days) {
  if (!(rate >= 0.0)) throw DomainError("failure rate must be nonnegative");
  if (!(duration_days >= 0.0)) throw DomainError("duration must be nonnegative");
  return -std::expm1(-rate * duration_days);
}

inline double asset_failure_probability(const AssetAttrs& asset, const Date& evaluation_date) {
  return asset_failure_probability(asset.failure_rate, static_cast<double>(evaluation_date.days_since(asset.in_service_date)));
}

// A hazard occurs iff any parent asset fails or any parent hazard occurs.
inline int hazard_exposure(std::span<const int> parent_states) {
  if (parent_states.empty()) throw DomainError("hazard nodes must have parents");
  return std::any_of(parent_states.begin(), parent_states.end(), [](int s) { return s != 0; }) ? 1 : 0;
}

inline int hazard_exposure(std::initializer_list<int> parent_states) {
  return hazard_exposure(std::span<const int>(parent_states.begin(), parent_states.size()));
}

// Settings shared by every evaluation of a model.
struct ScoringContext {
  CalibrationConfig calibration{};
  EpssSnapshot snapshot{};
  ExposureMode mode = ExposureMode::EpssDirect;
};

// Attack-success probability of a vulnerability node before mitigation.
inline double vuln_attack_probability(const BnModel& model, const Node& node, const ScoringContext& ctx) {
  const auto& v = node.vuln();
  double phi = v.attack_feasibility.value_or(model.attack_feasibility);
  return attack_probability(vuln_exposure(v, ctx.calibration, ctx.snapshot, ctx.mode).probability, phi);
}

}  // namespace cpsdss
