#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "cpsdss/errors.hpp"
#include "cpsdss/impact.hpp"
#include "cpsdss/inference.hpp"
#include "cpsdss/model.hpp"
#include "cpsdss/pareto.hpp"

namespace cpsdss {

enum class Sampler {
  Uniform,   // independent uniform draws in [0,1]^n
  Adaptive,  // Gaussian perturbations of archive members after a uniform warm-up
};

struct OptimisationConfig {
  std::size_t trial_count = 1000;
  std::uint64_t seed = 0;
  Sampler sampler = Sampler::Uniform;
  EvidenceSet evidence;  // objectives are unconditioned unless set
  std::size_t workers = 1;
  SuccessState success = SuccessState::One;
};

// Cooperative progress/cancellation hooks for long runs.
struct RunControl {
  std::atomic<std::size_t> completed{0};
  std::atomic<bool> cancel{false};
};

struct OptimisationResult {
  std::vector<TrialRecord> trials;  // ordered by trial_id
  ParetoFront front;
};

// A trial failed to evaluate; the run was aborted.
class TrialError : public Error {
 public:
  TrialError(std::uint64_t trial_id, const std::string& what)
      : Error("trial " + std::to_string(trial_id) + ": " + what), trial_id_(trial_id) {}
  std::uint64_t trial_id() const noexcept { return trial_id_; }

 private:
  std::uint64_t trial_id_;
};

class CancelledError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Child stream of the run seed for one trial; independent of scheduling.
inline std::mt19937_64 trial_stream(std::uint64_t seed, std::uint64_t trial_id) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(trial_id + 0x632BE59BD9B4E019ull)));
}

inline double unit_double(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Box-Muller on unit_double; portable across standard libraries.
inline double standard_normal(std::mt19937_64& rng) {
  double u1 = unit_double(rng);
  double u2 = unit_double(rng);
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double reflect_unit(double x) {
  x = std::fmod(std::abs(x), 2.0);
  return x > 1.0 ? 2.0 - x : x;
}

constexpr std::size_t kAdaptiveGeneration = 100;
constexpr double kAdaptiveExploreShare = 0.2;
constexpr double kAdaptiveSigma = 0.1;

// Runs body(i) for i in [begin, end) on `workers` threads. Returns the
// lowest failing index and its message, if any.
inline std::optional<std::pair<std::size_t, std::string>> parallel_for(std::size_t begin, std::size_t end,
                                                                       std::size_t workers, RunControl* control,
                                                                       const std::function<void(std::size_t)>& body) {
  std::atomic<std::size_t> next{begin};
  std::mutex err_mu;
  std::optional<std::pair<std::size_t, std::string>> first_error;
  std::atomic<bool> stop{false};

  auto work = [&] {
    while (!stop.load(std::memory_order_relaxed)) {
      if (control != nullptr && control->cancel.load(std::memory_order_relaxed)) return;
      std::size_t i = next.fetch_add(1);
      if (i >= end) return;
      try {
        body(i);
        if (control != nullptr) control->completed.fetch_add(1, std::memory_order_relaxed);
      } catch (const std::exception& e) {
        std::lock_guard lk(err_mu);
        if (!first_error || i < first_error->first) first_error = {i, e.what()};
        stop = true;
      }
    }
  };

  workers = std::max<std::size_t>(1, std::min(workers, end - begin));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return first_error;
}

}  // namespace detail

// Samples `trial_count` portfolios, evaluates the three objectives for each
// and returns every trial plus the nondominated subset. Results depend only
// on (model, context, seed, sampler, trial_count), never on worker count.
inline OptimisationResult run_optimisation(const BnModel& model, const OptimisationConfig& config,
                                           const ScoringContext& ctx = {}, RunControl* control = nullptr) {
  if (config.trial_count < 1) throw DomainError("trial_count must be at least 1");
  require_valid(model);
  const Evaluator eval(model, ctx, config.evidence, config.success);
  const auto& ids = eval.vulnerability_ids();
  const std::size_t dims = ids.size();

  OptimisationResult result;
  result.trials.resize(config.trial_count);

  std::vector<TrialRecord> archive;  // adaptive sampler parents, fixed per generation

  auto sample = [&](std::size_t i) {
    auto rng = detail::trial_stream(config.seed, i);
    std::vector<double> m(dims);
    const bool explore = config.sampler == Sampler::Uniform || archive.empty() ||
                         detail::unit_double(rng) < detail::kAdaptiveExploreShare;
    if (explore) {
      for (auto& x : m) x = detail::unit_double(rng);
    } else {
      const auto& parent = archive[static_cast<std::size_t>(rng() % archive.size())].portfolio.values;
      for (std::size_t d = 0; d < dims; ++d) {
        m[d] = detail::reflect_unit(parent[d] + detail::kAdaptiveSigma * detail::standard_normal(rng));
      }
    }
    return m;
  };

  auto body = [&](std::size_t i) {
    auto m = sample(i);
    TrialRecord& rec = result.trials[i];
    rec.trial_id = i;
    rec.objectives = eval.evaluate(m);
    rec.portfolio.ids = ids;
    rec.portfolio.values = std::move(m);
  };

  const std::size_t step = config.sampler == Sampler::Uniform ? config.trial_count : detail::kAdaptiveGeneration;
  for (std::size_t begin = 0; begin < config.trial_count; begin += step) {
    const std::size_t end = std::min(config.trial_count, begin + step);
    if (auto err = detail::parallel_for(begin, end, config.workers, control, body)) {
      throw TrialError(err->first, err->second);
    }
    if (control != nullptr && control->cancel.load()) throw CancelledError("optimisation cancelled");
    if (config.sampler == Sampler::Adaptive && end < config.trial_count) {
      archive = pareto_filter(std::span<const TrialRecord>(result.trials.data(), end)).members;
    }
  }

  result.front = pareto_filter(result.trials, config.seed);
  return result;
}

// Seed for run r of a multi-run study.
inline std::uint64_t run_seed(std::uint64_t base_seed, std::size_t run) { return base_seed + run; }

}  // namespace cpsdss
