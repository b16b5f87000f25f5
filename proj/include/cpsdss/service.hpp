#pragma once

#include <chrono>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cpsdss/cpsdss.hpp"

namespace cpsdss::service {

using json = nlohmann::json;

// Thrown when a request names a model revision that is no longer current.
class RevisionConflict : public Error {
 public:
  using Error::Error;
};

struct ServiceConfig {
  std::size_t workers = 1;             // trial workers per optimisation job
  std::string data_dir;                // empty: keep everything in memory
  ScoringContext scoring;
  std::size_t max_trials = 1'000'000;  // per job / heuristic run
  std::size_t max_runs = 1000;
};

namespace detail {

inline std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

inline Sampler sampler_from_string(const std::string& s) {
  if (s == "uniform") return Sampler::Uniform;
  if (s == "adaptive") return Sampler::Adaptive;
  throw ParseError("sampler must be \"uniform\" or \"adaptive\"");
}

inline std::string to_string(Sampler s) { return s == Sampler::Uniform ? "uniform" : "adaptive"; }

inline SuccessState success_from_json(const json& v) {
  if (v.is_string() && v == "one") return SuccessState::One;
  if (v.is_string() && v == "zero") return SuccessState::Zero;
  if (v.is_number_integer() && (v == 0 || v == 1)) return v == 1 ? SuccessState::One : SuccessState::Zero;
  throw ParseError("success_state must be \"one\" or \"zero\"");
}

}  // namespace detail

// Optimisation settings from a request body. `workers` is set by the service.
inline OptimisationConfig optimisation_config_from_json(const json& body) {
  if (!body.is_object()) throw ParseError("request body must be an object");
  cpsdss::detail::reject_unknown_keys(body, {"trial_count", "seed", "sampler", "evidence", "success_state", "revision",
                                             "runs"},
                                      "config");
  OptimisationConfig cfg;
  try {
    if (body.contains("trial_count")) cfg.trial_count = body.at("trial_count").get<std::size_t>();
    if (body.contains("seed")) cfg.seed = body.at("seed").get<std::uint64_t>();
    if (body.contains("sampler")) cfg.sampler = detail::sampler_from_string(body.at("sampler").get<std::string>());
    if (body.contains("evidence")) cfg.evidence = cpsdss::detail::evidence_from_json(body.at("evidence"), "evidence");
    if (body.contains("success_state")) cfg.success = detail::success_from_json(body.at("success_state"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("config schema error: ") + e.what());
  }
  return cfg;
}

inline json to_json(const OptimisationConfig& c) {
  json ev = json::object();
  for (const auto& [id, s] : c.evidence) ev[id] = s;
  return {{"trial_count", c.trial_count},
          {"seed", c.seed},
          {"sampler", detail::to_string(c.sampler)},
          {"evidence", ev},
          {"workers", c.workers},
          {"success_state", c.success == SuccessState::One ? "one" : "zero"}};
}

struct ModelSnapshot {
  std::string model_id;
  std::uint64_t revision = 0;
  std::shared_ptr<const BnModel> model;
};

// Model id -> revision history. Readers take an immutable snapshot; writers
// publish a whole new revision under the model's exclusive lock.
class ModelStore {
 public:
  explicit ModelStore(std::string data_dir = {}) : data_dir_(std::move(data_dir)) {}

  ModelSnapshot create(BnModel model) {
    require_valid(model);
    std::unique_lock lk(index_mu_);
    std::string id;
    do {
      id = "m" + std::to_string(++next_id_);
    } while (!data_dir_.empty() && std::filesystem::exists(std::filesystem::path(data_dir_) / "models" / id));
    auto entry = std::make_shared<Entry>();
    ModelSnapshot snap{id, 1, std::make_shared<const BnModel>(std::move(model))};
    entry->current = snap;
    persist(snap);
    entries_.emplace(id, std::move(entry));
    return snap;
  }

  ModelSnapshot get(const std::string& id) const {
    auto e = entry(id);
    std::shared_lock lk(e->mu);
    return e->current;
  }

  // Applies `fn` to the current model and publishes the result as a new
  // revision. `expected` guards against lost updates.
  template <class Fn>
  ModelSnapshot update(const std::string& id, Fn&& fn, std::optional<std::uint64_t> expected = std::nullopt) {
    auto e = entry(id);
    std::unique_lock lk(e->mu);
    if (expected && *expected != e->current.revision) {
      throw RevisionConflict("model " + id + " is at revision " + std::to_string(e->current.revision) +
                             ", request expected " + std::to_string(*expected));
    }
    BnModel next = fn(*e->current.model);
    ModelSnapshot snap{id, e->current.revision + 1, std::make_shared<const BnModel>(std::move(next))};
    persist(snap);
    e->current = snap;
    return snap;
  }

  std::size_t size() const {
    std::shared_lock lk(index_mu_);
    return entries_.size();
  }

 private:
  struct Entry {
    mutable std::shared_mutex mu;
    ModelSnapshot current;
  };

  std::shared_ptr<Entry> entry(const std::string& id) const {
    std::shared_lock lk(index_mu_);
    auto it = entries_.find(id);
    if (it == entries_.end()) throw NotFoundError("unknown model \"" + id + "\"");
    return it->second;
  }

  void persist(const ModelSnapshot& s) const {
    if (data_dir_.empty()) return;
    detail::write_file(std::filesystem::path(data_dir_) / "models" / s.model_id /
                           ("rev-" + std::to_string(s.revision) + ".json"),
                       serialize_model(*s.model) + "\n");
  }

  std::string data_dir_;
  mutable std::shared_mutex index_mu_;
  std::map<std::string, std::shared_ptr<Entry>> entries_;
  std::uint64_t next_id_ = 0;
};

enum class JobState { Queued, Running, Done, Failed };

inline std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
  }
  return "?";
}

struct JobDescriptor {
  std::string job_id;
  std::string model_id;
  std::uint64_t revision = 0;
  OptimisationConfig config;
  JobState state = JobState::Queued;
  std::size_t completed = 0;
  std::size_t total = 0;
  std::string created_at;
  std::string finished_at;
  std::string error;
};

inline json to_json(const JobDescriptor& j) {
  json out = {{"job_id", j.job_id},
              {"model_id", j.model_id},
              {"revision", j.revision},
              {"config", to_json(j.config)},
              {"state", to_string(j.state)},
              {"progress", {{"completed", j.completed}, {"total", j.total}}},
              {"created_at", j.created_at}};
  out["finished_at"] = j.finished_at.empty() ? json(nullptr) : json(j.finished_at);
  if (!j.error.empty()) out["error"] = j.error;
  return out;
}

// FIFO queue of optimisation jobs run one at a time by a dispatcher thread.
// Each job evaluates against the model snapshot taken at submission.
class JobManager {
 public:
  JobManager(ScoringContext scoring, std::size_t workers, std::string data_dir = {})
      : scoring_(std::move(scoring)), workers_(std::max<std::size_t>(1, workers)), data_dir_(std::move(data_dir)) {
    dispatcher_ = std::thread([this] { loop(); });
  }

  JobManager(const JobManager&) = delete;
  JobManager& operator=(const JobManager&) = delete;

  ~JobManager() { shutdown(); }

  JobDescriptor submit(const ModelSnapshot& snap, OptimisationConfig config) {
    if (config.trial_count < 1) throw DomainError("trial_count must be at least 1");
    config.workers = workers_;
    auto job = std::make_shared<Job>();
    job->snapshot = snap;
    job->desc.model_id = snap.model_id;
    job->desc.revision = snap.revision;
    job->desc.config = config;
    job->desc.total = config.trial_count;
    job->desc.created_at = detail::utc_now();
    std::lock_guard lk(mu_);
    if (stopping_) throw Error("service is shutting down");
    job->desc.job_id = "j" + std::to_string(++next_id_);
    jobs_.emplace(job->desc.job_id, job);
    queue_.push_back(job);
    persist_descriptor(*job);
    cv_.notify_all();
    return job->desc;
  }

  JobDescriptor describe(const std::string& id) const {
    auto job = find(id);
    std::lock_guard lk(mu_);
    JobDescriptor d = job->desc;
    if (d.state == JobState::Running) d.completed = std::max(d.completed, job->control.completed.load());
    return d;
  }

  // Front of a finished job plus the model revision it was computed on.
  std::pair<ParetoFront, JobDescriptor> front(const std::string& id) const {
    auto job = find(id);
    std::lock_guard lk(mu_);
    if (job->desc.state != JobState::Done) {
      throw RevisionConflict("job " + id + " is " + std::string(to_string(job->desc.state)) + ", no front yet");
    }
    return {job->front, job->desc};
  }

  std::vector<NodeId> vulnerability_ids(const std::string& id) const {
    return find(id)->snapshot.model->vulnerability_ids();
  }

  // Blocks until the job leaves queued/running or the timeout expires.
  JobDescriptor wait(const std::string& id, std::chrono::milliseconds timeout) const {
    auto job = find(id);
    std::unique_lock lk(mu_);
    done_cv_.wait_for(lk, timeout,
                      [&] { return job->desc.state == JobState::Done || job->desc.state == JobState::Failed; });
    return job->desc;
  }

  std::map<std::string, std::size_t> counts() const {
    std::lock_guard lk(mu_);
    std::map<std::string, std::size_t> out{{"queued", 0}, {"running", 0}, {"done", 0}, {"failed", 0}};
    for (const auto& [id, j] : jobs_) ++out[std::string(to_string(j->desc.state))];
    return out;
  }

  // Cancels the running job, fails everything still queued and stops the
  // dispatcher. No job is left queued or running afterwards.
  void shutdown() {
    {
      std::lock_guard lk(mu_);
      if (stopping_) {
        if (!dispatcher_.joinable()) return;
      }
      stopping_ = true;
      for (auto& [id, j] : jobs_) {
        if (j->desc.state == JobState::Running) j->control.cancel = true;
      }
      cv_.notify_all();
    }
    if (dispatcher_.joinable()) dispatcher_.join();
    std::lock_guard lk(mu_);
    for (auto& j : queue_) finish(*j, JobState::Failed, "service shut down before the job started");
    queue_.clear();
  }

 private:
  struct Job {
    JobDescriptor desc;
    ModelSnapshot snapshot;
    RunControl control;
    ParetoFront front;
  };

  std::shared_ptr<Job> find(const std::string& id) const {
    std::lock_guard lk(mu_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) throw NotFoundError("unknown job \"" + id + "\"");
    return it->second;
  }

  void loop() {
    while (true) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return stopping_ || !queue_.empty(); });
        if (stopping_) return;
        job = queue_.front();
        queue_.pop_front();
        job->desc.state = JobState::Running;
        persist_descriptor(*job);
      }
      run(*job);
    }
  }

  void run(Job& job) {
    try {
      auto result = run_optimisation(*job.snapshot.model, job.desc.config, scoring_, &job.control);
      if (!data_dir_.empty()) {
        auto ids = job.snapshot.model->vulnerability_ids();
        auto dir = std::filesystem::path(data_dir_) / "jobs" / job.desc.job_id;
        detail::write_file(dir / "trials.csv", trials_to_csv(result.trials, ids));
        detail::write_file(dir / "front.csv", front_to_csv(result.front, ids));
      }
      std::lock_guard lk(mu_);
      job.front = std::move(result.front);
      job.desc.completed = job.desc.total;
      finish(job, JobState::Done, "");
    } catch (const CancelledError&) {
      std::lock_guard lk(mu_);
      job.desc.completed = job.control.completed.load();
      finish(job, JobState::Failed, "service shut down while the job was running");
    } catch (const std::exception& e) {
      std::lock_guard lk(mu_);
      job.desc.completed = job.control.completed.load();
      finish(job, JobState::Failed, e.what());
    }
  }

  // Caller holds mu_.
  void finish(Job& job, JobState state, const std::string& error) {
    job.desc.state = state;
    job.desc.error = error;
    job.desc.finished_at = detail::utc_now();
    persist_descriptor(job);
    done_cv_.notify_all();
  }

  void persist_descriptor(const Job& job) const {
    if (data_dir_.empty()) return;
    try {
      detail::write_file(std::filesystem::path(data_dir_) / "jobs" / job.desc.job_id / "job.json",
                         to_json(job.desc).dump(2) + "\n");
    } catch (const std::exception&) {
      // Descriptor files are informational; the in-memory state is authoritative.
    }
  }

  ScoringContext scoring_;
  std::size_t workers_;
  std::string data_dir_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  mutable std::condition_variable done_cv_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::deque<std::shared_ptr<Job>> queue_;
  std::uint64_t next_id_ = 0;
  bool stopping_ = false;
  std::thread dispatcher_;
};

// HTTP front end. Owns the model store and job queue.
class Service {
 public:
  explicit Service(ServiceConfig config)
      : config_(std::move(config)),
        models_(config_.data_dir),
        jobs_(config_.scoring, config_.workers, config_.data_dir) {}

  ModelStore& models() { return models_; }
  JobManager& jobs() { return jobs_; }
  void shutdown() { jobs_.shutdown(); }

  void mount(httplib::Server& srv) {
    srv.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      json body = {{"status", "ok"}, {"models", models_.size()}, {"jobs", jobs_.counts()}};
      reply(res, 200, body);
    });

    srv.Post("/models", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto snap = models_.create(parse_model(req.body));
      reply(res, 201, describe(snap));
    }));

    srv.Get(R"(/models/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      reply(res, 200, describe(models_.get(req.matches[1])));
    }));

    srv.Patch(R"(/models/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      json body = parse_body(req);
      auto expected = take_revision(body);
      auto patch = model_patch_from_json(body);
      auto snap = models_.update(req.matches[1], [&](const BnModel& m) { return update_model(m, patch); }, expected);
      reply(res, 200, describe(snap));
    }));

    srv.Patch(R"(/models/([^/]+)/nodes/([^/]+))",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                json body = parse_body(req);
                auto expected = take_revision(body);
                auto patch = node_patch_from_json(body);
                const std::string node = req.matches[2];
                auto snap = models_.update(
                    req.matches[1], [&](const BnModel& m) { return update_attribute(m, node, patch); }, expected);
                reply(res, 200, describe(snap));
              }));

    srv.Post(R"(/models/([^/]+)/inference)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      json body = req.body.empty() ? json::object() : parse_body(req);
      auto expected = take_revision(body);
      cpsdss::detail::reject_unknown_keys(body, {"evidence", "portfolio", "success_state"}, "inference");
      auto snap = pinned(req.matches[1], expected);
      const BnModel& m = *snap.model;
      EvidenceSet ev = m.evidence;
      if (body.contains("evidence")) {
        for (const auto& [id, s] : cpsdss::detail::evidence_from_json(body["evidence"], "evidence")) ev[id] = s;
      }
      Portfolio p = body.contains("portfolio") ? resolve_portfolio(m, portfolio_from_json(body["portfolio"]))
                                               : Portfolio::from_model(m);
      SuccessState s = body.contains("success_state") ? detail::success_from_json(body["success_state"])
                                                      : SuccessState::One;
      auto rep = posterior_report(m, p, ev, config_.scoring, s);
      json evj = json::object();
      for (const auto& [id, st] : ev) evj[id] = st;
      reply(res, 200,
            {{"model_id", snap.model_id},
             {"revision", snap.revision},
             {"goal", rep.exposure.node},
             {"evidence", evj},
             {"portfolio", to_json(p)},
             {"risk", to_json(rep.risk)},
             {"marginals", {{"exposure", rep.exposure.marginal}, {"impact", rep.impact.marginal}}}});
    }));

    srv.Post(R"(/models/([^/]+)/optimise)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      json body = req.body.empty() ? json::object() : parse_body(req);
      auto expected = take_revision(body);
      auto cfg = optimisation_config_from_json(body);
      if (body.contains("runs")) throw ParseError("runs applies to heuristics, not optimise");
      check_limits(cfg.trial_count, 1);
      auto snap = pinned(req.matches[1], expected);
      reply(res, 202, to_json(jobs_.submit(snap, cfg)));
    }));

    srv.Get(R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      reply(res, 200, to_json(jobs_.describe(req.matches[1])));
    }));

    srv.Get(R"(/jobs/([^/]+)/front)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      auto [front, desc] = jobs_.front(id);
      if (req.has_param("revision")) {
        auto want = std::stoull(req.get_param_value("revision"));
        if (want != desc.revision) {
          throw RevisionConflict("job " + id + " ran on revision " + std::to_string(desc.revision) +
                                 ", request expected " + std::to_string(want));
        }
      }
      const std::string format = req.has_param("format") ? req.get_param_value("format") : "json";
      if (format == "csv") {
        res.status = 200;
        res.set_content(front_to_csv(front, jobs_.vulnerability_ids(id)), "text/csv");
      } else if (format == "json") {
        json body = to_json(front);
        body["job_id"] = id;
        body["model_id"] = desc.model_id;
        body["revision"] = desc.revision;
        reply(res, 200, body);
      } else {
        throw ParseError("format must be csv or json");
      }
    }));

    srv.Post(R"(/models/([^/]+)/heuristics)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      json body = req.body.empty() ? json::object() : parse_body(req);
      auto expected = take_revision(body);
      std::size_t runs = 10;
      if (body.contains("runs")) {
        if (!body["runs"].is_number_unsigned()) throw ParseError("runs must be a positive integer");
        runs = body["runs"].get<std::size_t>();
      }
      auto cfg = optimisation_config_from_json(body);
      check_limits(cfg.trial_count, runs);
      cfg.workers = config_.workers;
      auto snap = pinned(req.matches[1], expected);
      auto study = run_heuristics(*snap.model, cfg, runs, config_.scoring);
      json tops = json::array();
      for (const auto& t : study.top) tops.push_back(cpsdss::to_json(t));
      json body_out = cpsdss::to_json(study.report);
      body_out["model_id"] = snap.model_id;
      body_out["revision"] = snap.revision;
      body_out["base_seed"] = cfg.seed;
      body_out["top_portfolios"] = std::move(tops);
      reply(res, 200, body_out);
    }));
  }

 private:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void fail(httplib::Response& res, int status, const std::string& message, json extra = json::object()) {
    extra["error"] = message;
    reply(res, status, extra);
  }

  // Maps engine errors onto HTTP statuses.
  static Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const ValidationError& e) {
        json diags = json::array();
        for (const auto& d : e.diagnostics()) diags.push_back(cpsdss::to_json(d));
        fail(res, 400, e.what(), {{"diagnostics", diags}});
      } catch (const ParseError& e) {
        json extra = json::object();
        if (e.position() != ParseError::npos) extra["position"] = e.position();
        fail(res, 400, e.what(), extra);
      } catch (const NotFoundError& e) {
        fail(res, 404, e.what());
      } catch (const RevisionConflict& e) {
        fail(res, 409, e.what());
      } catch (const DomainError& e) {
        fail(res, 400, e.what());
      } catch (const InconsistentEvidenceError& e) {
        fail(res, 400, e.what());
      } catch (const json::exception& e) {
        fail(res, 400, std::string("malformed request: ") + e.what());
      } catch (const std::invalid_argument& e) {
        fail(res, 400, std::string("malformed request: ") + e.what());
      } catch (const std::exception& e) {
        fail(res, 500, e.what());
      }
    };
  }

  static json parse_body(const httplib::Request& req) {
    try {
      return json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("request body syntax error: ") + e.what(), e.byte);
    }
  }

  static std::optional<std::uint64_t> take_revision(json& body) {
    if (!body.is_object()) throw ParseError("request body must be an object");
    auto it = body.find("revision");
    if (it == body.end()) return std::nullopt;
    if (!it->is_number_unsigned()) throw ParseError("revision must be a nonnegative integer");
    auto r = it->get<std::uint64_t>();
    body.erase(it);
    return r;
  }

  ModelSnapshot pinned(const std::string& id, std::optional<std::uint64_t> expected) const {
    auto snap = models_.get(id);
    if (expected && *expected != snap.revision) {
      throw RevisionConflict("model " + id + " is at revision " + std::to_string(snap.revision) +
                             ", request expected " + std::to_string(*expected));
    }
    return snap;
  }

  void check_limits(std::size_t trials, std::size_t runs) const {
    if (trials < 1 || trials > config_.max_trials) {
      throw DomainError("trial_count must lie in [1, " + std::to_string(config_.max_trials) + "]");
    }
    if (runs < 1 || runs > config_.max_runs) {
      throw DomainError("runs must lie in [1, " + std::to_string(config_.max_runs) + "]");
    }
  }

  static json describe(const ModelSnapshot& s) {
    json w = json::array();
    for (const auto& d : warnings(*s.model)) w.push_back(cpsdss::to_json(d));
    return {{"model_id", s.model_id}, {"revision", s.revision}, {"model", cpsdss::to_json(*s.model)}, {"warnings", w}};
  }

  ServiceConfig config_;
  ModelStore models_;
  JobManager jobs_;
};

}  // namespace cpsdss::service
