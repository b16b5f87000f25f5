#pragma once

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cpsdss/cpsdss.hpp"
#include "cpsdss/service.hpp"

namespace cpsdss::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum Exit : int { kOk = 0, kInvalid = 1, kRuntime = 2 };

struct ModelInput {
  BnModel model;
  ScoringContext ctx;
};

// A model path is either a document or a directory holding model.json and,
// optionally, epss.csv. An explicit snapshot path replaces the directory one.
inline ModelInput load_model_input(const std::string& path, const std::string& epss_path, ExposureMode mode) {
  ModelInput in;
  fs::path p(path);
  fs::path doc = fs::is_directory(p) ? p / "model.json" : p;
  in.model = parse_model(read_text_file(doc.string()));
  if (!epss_path.empty()) {
    in.ctx.snapshot = load_epss_csv(epss_path);
  } else if (fs::is_directory(p) && fs::exists(p / "epss.csv")) {
    in.ctx.snapshot = load_epss_csv((p / "epss.csv").string());
  }
  in.ctx.mode = mode;
  return in;
}

inline EvidenceSet parse_evidence_args(const std::vector<std::string>& items) {
  EvidenceSet ev;
  for (const auto& s : items) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError("evidence must be node=0|1, got \"" + s + "\"");
    std::string v = s.substr(eq + 1);
    if (v != "0" && v != "1") throw ParseError("evidence state must be 0 or 1, got \"" + s + "\"");
    ev[s.substr(0, eq)] = v == "1" ? 1 : 0;
  }
  return ev;
}

// Command-line evidence is checked with the model's own invariants.
inline EvidenceSet merged_evidence(const BnModel& model, const std::vector<std::string>& items) {
  BnModel probe = model;
  for (const auto& [k, v] : parse_evidence_args(items)) probe.evidence[k] = v;
  require_valid(probe);
  return probe.evidence;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

inline std::vector<fs::path> run_dirs(const fs::path& root) {
  std::vector<fs::path> out;
  if (fs::exists(root / "front.csv")) return {root};
  if (!fs::is_directory(root)) throw NotFoundError("no run directory at " + root.string());
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && e.path().filename().string().rfind("run-", 0) == 0 && fs::exists(e.path() / "front.csv")) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw NotFoundError("no run-*/front.csv under " + root.string());
  return out;
}

// Front from a run directory (front.csv + run.json), a front CSV or a front
// JSON export.
inline ParetoFront load_front(const fs::path& path) {
  fs::path p = path;
  fs::path meta;
  if (fs::is_directory(p)) {
    meta = p / "run.json";
    p = p / "front.csv";
  } else if (p.extension() == ".csv" && fs::exists(p.parent_path() / "run.json")) {
    meta = p.parent_path() / "run.json";
  }
  const std::string text = read_text_file(p.string());
  if (p.extension() == ".json") {
    json j = json::parse(text);
    ParetoFront f;
    f.run_seed = j.at("run_seed").get<std::uint64_t>();
    f.trial_count = j.at("trial_count").get<std::size_t>();
    for (const auto& m : j.at("members")) {
      TrialRecord t;
      t.trial_id = m.at("trial_id").get<std::uint64_t>();
      const auto& o = m.at("objectives");
      t.objectives = {o.at("likelihood").get<double>(), o.at("impact").get<double>(),
                      o.at("availability").get<double>()};
      t.portfolio = portfolio_from_json(m.at("portfolio"));
      f.members.push_back(std::move(t));
    }
    return f;
  }
  std::uint64_t seed = 0;
  std::size_t count = 0;
  if (!meta.empty() && fs::exists(meta)) {
    json j = json::parse(read_text_file(meta.string()));
    seed = j.at("seed").get<std::uint64_t>();
    count = j.at("trial_count").get<std::size_t>();
  }
  return front_from_csv(text, seed, count);
}

inline std::string fmt(double v, int prec = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(prec) << v;
  return ss.str();
}

namespace detail {
inline std::atomic<httplib::Server*> g_server{nullptr};
extern "C" inline void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}
}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian attack-graph risk scoring and countermeasure portfolio optimisation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML configuration file");

  std::string epss_path;
  std::string mode_name = "epss-direct";
  auto add_scoring = [&](CLI::App* sub) {
    sub->add_option("--epss", epss_path, "EPSS snapshot CSV")->envname("CPSDSS_EPSS_SNAPSHOT");
    sub->add_option("--mode", mode_name, "exposure mode")->check(CLI::IsMember({"epss-direct", "hybrid"}));
  };
  auto mode = [&] { return mode_name == "hybrid" ? ExposureMode::Hybrid : ExposureMode::EpssDirect; };

  std::string model_path;

  auto* validate = app.add_subcommand("validate", "check a model document");
  validate->add_option("model", model_path, "model file or fixture directory")->required();

  auto* infer = app.add_subcommand("infer", "posterior attack likelihood, severe impact and risk at the goal");
  std::vector<std::string> evidence_args;
  std::string portfolio_path;
  std::string success_name = "one";
  bool infer_json = false;
  infer->add_option("model", model_path)->required();
  infer->add_option("--evidence", evidence_args, "node=0|1, repeatable");
  infer->add_option("--portfolio", portfolio_path, "JSON portfolio replacing stored mitigation probabilities");
  infer->add_option("--success-state", success_name)->check(CLI::IsMember({"one", "zero"}));
  infer->add_flag("--json", infer_json);
  add_scoring(infer);

  auto* optimise = app.add_subcommand("optimise", "sample countermeasure portfolios and keep the Pareto front");
  std::size_t trials = 1000, runs = 1, workers = 1;
  std::uint64_t seed = 0;
  std::string out_dir, sampler_name = "uniform";
  bool keep_trials = false;
  optimise->add_option("model", model_path)->required();
  optimise->add_option("--trials", trials)->check(CLI::PositiveNumber);
  optimise->add_option("--runs", runs)->check(CLI::PositiveNumber);
  optimise->add_option("--seed", seed);
  optimise->add_option("--out", out_dir, "write run-NNN/{front.csv,run.json} here");
  optimise->add_option("--workers", workers)->check(CLI::PositiveNumber)->envname("CPSDSS_WORKERS");
  optimise->add_option("--sampler", sampler_name)->check(CLI::IsMember({"uniform", "adaptive"}));
  optimise->add_option("--evidence", evidence_args, "node=0|1, repeatable");
  optimise->add_flag("--all-trials", keep_trials, "also write trials.csv for each run");
  add_scoring(optimise);

  auto* rank = app.add_subcommand("rank", "average rank of each mitigation across runs");
  std::string rank_dir;
  bool rank_json = false;
  rank->add_option("run-dir", rank_dir, "output directory of optimise")->required();
  rank->add_flag("--json", rank_json);

  auto* stability = app.add_subcommand("stability", "KDE density metrics of fronts and their dispersion");
  std::vector<std::string> front_files;
  double bandwidth = 0.0;
  bool stab_json = false;
  stability->add_option("fronts", front_files, "front CSV/JSON files or run directories")->required();
  stability->add_option("--bandwidth", bandwidth, "fixed KDE bandwidth (default: Scott's rule)");
  stability->add_flag("--json", stab_json);

  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  std::string addr = "127.0.0.1:8080", data_dir;
  std::size_t serve_workers = 1;
  serve->add_option("--addr", addr, "host:port")->envname("CPSDSS_ADDR");
  serve->add_option("--workers", serve_workers)->check(CLI::PositiveNumber)->envname("CPSDSS_WORKERS");
  serve->add_option("--data", data_dir, "persist models and job results here");
  add_scoring(serve);

  auto* exportc = app.add_subcommand("export", "convert a front between CSV and JSON");
  std::string export_in, export_out, format;
  exportc->add_option("input", export_in, "run directory, front CSV or front JSON")->required();
  exportc->add_option("--format", format)->required()->check(CLI::IsMember({"csv", "json"}));
  exportc->add_option("--out", export_out, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? kOk : kRuntime;
  }

  auto report_diagnostics = [&](const ValidationError& e) {
    for (const auto& d : e.diagnostics()) {
      err << "invalid: " << d.invariant << (d.subject.empty() ? "" : " [" + d.subject + "]") << ": " << d.message
          << "\n";
    }
  };

  try {
    if (*validate) {
      auto in = load_model_input(model_path, "", ExposureMode::EpssDirect);
      for (const auto& w : warnings(in.model)) err << "warning: " << w.invariant << ": " << w.message << "\n";
      out << "ok: " << in.model.nodes.size() << " nodes, " << in.model.edges.size() << " edges, "
          << in.model.vulnerability_ids().size() << " vulnerabilities, goal " << in.model.goal()->id << "\n";
      return kOk;
    }

    if (*infer) {
      auto in = load_model_input(model_path, epss_path, mode());
      EvidenceSet ev = merged_evidence(in.model, evidence_args);
      Portfolio p = portfolio_path.empty()
                        ? Portfolio::from_model(in.model)
                        : resolve_portfolio(in.model, portfolio_from_json(json::parse(read_text_file(portfolio_path))));
      auto rep = posterior_report(in.model, p, ev, in.ctx, success_name == "one" ? SuccessState::One : SuccessState::Zero);
      if (infer_json) {
        out << json{{"goal", rep.exposure.node},
                    {"risk", to_json(rep.risk)},
                    {"marginals", {{"exposure", rep.exposure.marginal}, {"impact", rep.impact.marginal}}}}
                   .dump(2)
            << "\n";
      } else {
        out << "goal " << rep.exposure.node << "\n"
            << "P(E) " << fmt(rep.risk.attack_likelihood) << "\n"
            << "P(I) " << fmt(rep.risk.severe_impact) << "\n"
            << "R    " << fmt(rep.risk.composite_risk) << "\n";
      }
      return kOk;
    }

    if (*optimise) {
      auto in = load_model_input(model_path, epss_path, mode());
      OptimisationConfig cfg;
      cfg.trial_count = trials;
      cfg.workers = workers;
      cfg.sampler = sampler_name == "adaptive" ? Sampler::Adaptive : Sampler::Uniform;
      cfg.evidence = merged_evidence(in.model, evidence_args);
      const auto ids = in.model.vulnerability_ids();
      std::vector<Portfolio> tops;
      for (std::size_t r = 0; r < runs; ++r) {
        OptimisationConfig c = cfg;
        c.seed = run_seed(seed, r);
        auto res = run_optimisation(in.model, c, in.ctx);
        const auto& top = select_top_portfolio(res.front);
        tops.push_back(top.portfolio);
        out << "run " << r << " seed " << c.seed << ": " << res.front.members.size() << " front members; top trial "
            << top.trial_id << " L=" << fmt(top.objectives.likelihood) << " I=" << fmt(top.objectives.impact)
            << " A=" << fmt(top.objectives.availability) << "\n";
        if (!out_dir.empty()) {
          std::ostringstream name;
          name << "run-" << std::setw(3) << std::setfill('0') << r;
          fs::path dir = fs::path(out_dir) / name.str();
          write_text(dir / "front.csv", front_to_csv(res.front, ids));
          if (keep_trials) write_text(dir / "trials.csv", trials_to_csv(res.trials, ids));
          json meta = {{"model", in.model.name},
                       {"run", r},
                       {"seed", c.seed},
                       {"trial_count", c.trial_count},
                       {"sampler", sampler_name},
                       {"mode", mode_name},
                       {"top_trial_id", top.trial_id}};
          write_text(dir / "run.json", meta.dump(2) + "\n");
        }
      }
      if (runs > 1) {
        auto report = frequency_rank(tops, trials);
        out << "average rank:";
        for (const auto& id : report.ordered()) out << " " << id << "=" << fmt(report.rank_of(id), 2);
        out << "\n";
      }
      return kOk;
    }

    if (*rank) {
      std::vector<Portfolio> tops;
      std::size_t per_run = 0;
      for (const auto& dir : run_dirs(rank_dir)) {
        auto front = load_front(dir);
        if (front.members.empty()) throw DomainError("empty front in " + dir.string());
        tops.push_back(select_top_portfolio(front).portfolio);
        per_run = front.trial_count;
      }
      auto report = frequency_rank(tops, per_run);
      if (rank_json) {
        out << to_json(report).dump(2) << "\n";
      } else {
        out << "runs " << report.run_count << "\n";
        for (const auto& id : report.ordered()) out << id << " " << fmt(report.rank_of(id), 2) << "\n";
      }
      return kOk;
    }

    if (*stability) {
      const Bandwidth bw = bandwidth > 0.0 ? Bandwidth::fixed(bandwidth) : Bandwidth::scott();
      std::vector<ParetoFront> fronts;
      json all = json::array();
      for (const auto& f : front_files) {
        fronts.push_back(load_front(f));
        auto m = stability_metrics(fronts.back(), bw);
        if (stab_json) {
          json j = to_json(m);
          j["front"] = f;
          all.push_back(j);
        } else {
          out << f << ": points " << m.points << " avg " << fmt(m.average_density, 3) << " min "
              << fmt(m.min_density, 3) << " max " << fmt(m.max_density, 3) << " var " << fmt(m.density_variance, 3)
              << " entropy " << fmt(m.density_entropy, 4) << "\n";
        }
      }
      std::optional<double> disp;
      if (fronts.size() > 1) disp = mean_pairwise_hausdorff(fronts);
      if (stab_json) {
        json j = {{"fronts", all}};
        if (disp) j["mean_pairwise_hausdorff"] = *disp;
        out << j.dump(2) << "\n";
      } else if (disp) {
        out << "mean pairwise Hausdorff " << fmt(*disp, 6) << "\n";
      }
      return kOk;
    }

    if (*exportc) {
      auto front = load_front(export_in);
      std::string text;
      if (format == "json") {
        text = to_json(front).dump(2) + "\n";
      } else {
        std::vector<NodeId> ids = front.members.empty() ? std::vector<NodeId>{} : front.members.front().portfolio.ids;
        text = front_to_csv(front, ids);
      }
      if (export_out.empty()) {
        out << text;
      } else {
        write_text(export_out, text);
      }
      return kOk;
    }

    if (*serve) {
      auto colon = addr.rfind(':');
      if (colon == std::string::npos) throw ParseError("--addr must be host:port");
      const std::string host = addr.substr(0, colon);
      const int port = std::stoi(addr.substr(colon + 1));
      service::ServiceConfig sc;
      sc.workers = serve_workers;
      sc.data_dir = data_dir;
      if (!epss_path.empty()) sc.scoring.snapshot = load_epss_csv(epss_path);
      sc.scoring.mode = mode();
      service::Service svc(sc);
      httplib::Server srv;
      svc.mount(srv);
      detail::g_server = &srv;
      std::signal(SIGINT, detail::on_signal);
      std::signal(SIGTERM, detail::on_signal);
      err << "listening on " << host << ":" << port << "\n";
      const bool ok = srv.listen(host, port);
      detail::g_server = nullptr;
      svc.shutdown();
      if (!ok) throw Error("cannot listen on " + addr);
      return kOk;
    }
  } catch (const ValidationError& e) {
    report_diagnostics(e);
    return kInvalid;
  } catch (const ParseError& e) {
    err << "invalid: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kRuntime;
}

}  // namespace cpsdss::cli
