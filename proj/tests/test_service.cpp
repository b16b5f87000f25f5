#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include "cpsdss/service.hpp"
#include "support.hpp"

using namespace cpsdss;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class ServiceTest : public ::testing::Test {
 protected:
  void start(service::ServiceConfig cfg) {
    svc_ = std::make_unique<service::Service>(std::move(cfg));
    svc_->mount(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(120, 0);
  }

  void SetUp() override {
    solar_ = testsupport::load_fixture("solar_pv");
    service::ServiceConfig cfg;
    cfg.scoring = solar_.ctx;
    cfg.workers = 2;
    start(std::move(cfg));
  }

  void TearDown() override {
    if (svc_) svc_->shutdown();
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  httplib::Result post(const std::string& path, const std::string& body) {
    return client_->Post(path, body, "application/json");
  }
  httplib::Result patch(const std::string& path, const std::string& body) {
    return client_->Patch(path, body, "application/json");
  }

  std::string create_solar() {
    auto r = post("/models", serialize_model(solar_.model));
    EXPECT_EQ(r->status, 201);
    return json::parse(r->body).at("model_id");
  }

  json wait_job(const std::string& id) {
    svc_->jobs().wait(id, std::chrono::seconds(120));
    auto r = client_->Get("/jobs/" + id);
    return json::parse(r->body);
  }

  testsupport::Loaded solar_;
  httplib::Server server_;
  std::unique_ptr<service::Service> svc_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace

TEST_F(ServiceTest, Health) {
  auto r = client_->Get("/health");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  auto j = json::parse(r->body);
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["models"], 0);
}

TEST_F(ServiceTest, ModelLifecycle) {
  auto id = create_solar();
  EXPECT_EQ(id, "m1");
  auto g = client_->Get("/models/" + id);
  EXPECT_EQ(g->status, 200);
  auto gj = json::parse(g->body);
  EXPECT_EQ(gj["revision"], 1);
  EXPECT_EQ(parse_model(gj["model"].dump()), solar_.model);

  auto p = patch("/models/" + id + "/nodes/V1", R"({"mitigation_prob":0.5,"revision":1})");
  EXPECT_EQ(p->status, 200);
  auto pj = json::parse(p->body);
  EXPECT_EQ(pj["revision"], 2);
  EXPECT_EQ(parse_model(pj["model"].dump()).at("V1").vuln().mitigation_prob, 0.5);

  // stale revision
  EXPECT_EQ(patch("/models/" + id + "/nodes/V1", R"({"mitigation_prob":0.6,"revision":1})")->status, 409);
  EXPECT_EQ(patch("/models/" + id, R"({"attack_feasibility":0.5,"revision":1})")->status, 409);
  auto mp = patch("/models/" + id, R"({"attack_feasibility":0.5,"revision":2})");
  EXPECT_EQ(mp->status, 200);
  EXPECT_EQ(json::parse(mp->body)["revision"], 3);
}

TEST_F(ServiceTest, ErrorStatuses) {
  EXPECT_EQ(client_->Get("/models/m9")->status, 404);
  EXPECT_EQ(client_->Get("/jobs/j9")->status, 404);
  auto id = create_solar();
  EXPECT_EQ(patch("/models/" + id + "/nodes/NOPE", R"({"mitigation_prob":0.5})")->status, 404);

  auto syntax = post("/models", "{\"nodes\": [");
  EXPECT_EQ(syntax->status, 400);
  EXPECT_TRUE(json::parse(syntax->body).contains("position"));

  auto cyclic = solar_.model;
  cyclic.edges.push_back({cyclic.goal()->id, "V1"});
  auto bad = post("/models", to_json(cyclic).dump());
  EXPECT_EQ(bad->status, 400);
  EXPECT_FALSE(json::parse(bad->body)["diagnostics"].empty());

  auto range = patch("/models/" + id + "/nodes/V1", R"({"mitigation_prob":1.5})");
  EXPECT_EQ(range->status, 400);
  EXPECT_EQ(patch("/models/" + id + "/nodes/V1", R"({"colour":"red"})")->status, 400);
  EXPECT_EQ(post("/models/" + id + "/optimise", R"({"trial_count":0})")->status, 400);
  EXPECT_EQ(post("/models/" + id + "/optimise", R"({"sampler":"annealing"})")->status, 400);
  EXPECT_EQ(post("/models/" + id + "/heuristics", R"({"runs":0,"trial_count":10})")->status, 400);
  EXPECT_EQ(post("/models/" + id + "/inference", R"({"evidence":{"V1":3}})")->status, 400);
}

TEST_F(ServiceTest, InferenceMatchesLibrary) {
  auto id = create_solar();
  auto r = post("/models/" + id + "/inference", R"({"evidence":{"V5":1},"portfolio":{"V1":0.4}})");
  ASSERT_EQ(r->status, 200);
  auto j = json::parse(r->body);
  Portfolio p = Portfolio::from_model(solar_.model);
  p.values[0] = 0.4;
  auto want = posterior_risk(solar_.model, p, {{"V5", 1}}, solar_.ctx);
  EXPECT_EQ(j["goal"], "H8_Power_Outage");
  EXPECT_DOUBLE_EQ(j["risk"]["attack_likelihood"].get<double>(), want.attack_likelihood);
  EXPECT_DOUBLE_EQ(j["marginals"]["exposure"][1].get<double>(), want.attack_likelihood);
  EXPECT_EQ(j["revision"], 1);
  EXPECT_EQ(post("/models/" + id + "/inference", R"({"revision":4})")->status, 409);
}

TEST_F(ServiceTest, OptimiseJobFrontMatchesLibraryAndPinsRevision) {
  auto id = create_solar();
  auto sub = post("/models/" + id + "/optimise", R"({"trial_count":600,"seed":11,"revision":1})");
  ASSERT_EQ(sub->status, 202);
  auto job = json::parse(sub->body);
  const std::string jid = job["job_id"];
  EXPECT_EQ(job["revision"], 1);

  // a concurrent edit must not affect the pinned job
  EXPECT_EQ(patch("/models/" + id + "/nodes/V1", R"({"mitigation_prob":0.9})")->status, 200);

  auto done = wait_job(jid);
  EXPECT_EQ(done["state"], "done");
  EXPECT_EQ(done["progress"]["completed"], 600);
  EXPECT_EQ(done["revision"], 1);

  OptimisationConfig cfg;
  cfg.trial_count = 600;
  cfg.seed = 11;
  auto want = run_optimisation(solar_.model, cfg, solar_.ctx);
  auto csv = client_->Get("/jobs/" + jid + "/front?format=csv");
  ASSERT_EQ(csv->status, 200);
  EXPECT_EQ(csv->body, front_to_csv(want.front, solar_.model.vulnerability_ids()));

  auto fj = client_->Get("/jobs/" + jid + "/front?revision=1");
  ASSERT_EQ(fj->status, 200);
  EXPECT_EQ(json::parse(fj->body)["members"].size(), want.front.members.size());
  EXPECT_EQ(client_->Get("/jobs/" + jid + "/front?revision=2")->status, 409);
  EXPECT_EQ(client_->Get("/jobs/" + jid + "/front?format=xml")->status, 400);

  // a request pinned to the old revision is refused
  EXPECT_EQ(post("/models/" + id + "/optimise", R"({"trial_count":10,"revision":1})")->status, 409);
}

TEST_F(ServiceTest, PollingReachesDone) {
  auto id = create_solar();
  auto sub = post("/models/" + id + "/optimise", R"({"trial_count":100})");
  ASSERT_EQ(sub->status, 202);
  const std::string jid = json::parse(sub->body)["job_id"];
  json j;
  for (int k = 0; k < 600; ++k) {
    j = json::parse(client_->Get("/jobs/" + jid)->body);
    if (j["state"] == "done" || j["state"] == "failed") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  EXPECT_EQ(j["state"], "done");
  EXPECT_EQ(j["progress"]["completed"], 100);
  EXPECT_EQ(j["progress"]["total"], 100);
}

TEST_F(ServiceTest, FrontOfUnfinishedJobConflicts) {
  auto id = create_solar();
  auto big = json::parse(post("/models/" + id + "/optimise", R"({"trial_count":400000})")->body);
  auto queued = json::parse(post("/models/" + id + "/optimise", R"({"trial_count":10})")->body);
  EXPECT_EQ(client_->Get("/jobs/" + std::string(queued["job_id"]) + "/front")->status, 409);
  svc_->shutdown();
  auto a = client_->Get("/jobs/" + std::string(big["job_id"]));
  auto b = client_->Get("/jobs/" + std::string(queued["job_id"]));
  EXPECT_EQ(json::parse(a->body)["state"], "failed");
  EXPECT_EQ(json::parse(b->body)["state"], "failed");
  auto counts = json::parse(client_->Get("/health")->body)["jobs"];
  EXPECT_EQ(counts["queued"], 0);
  EXPECT_EQ(counts["running"], 0);
  EXPECT_NE(post("/models/" + id + "/optimise", R"({"trial_count":10})")->status, 202);
}

TEST_F(ServiceTest, HeuristicsEndpoint) {
  auto id = create_solar();
  auto r = post("/models/" + id + "/heuristics", R"({"runs":3,"trial_count":150,"seed":5})");
  ASSERT_EQ(r->status, 200);
  auto j = json::parse(r->body);
  EXPECT_EQ(j["top_portfolios"].size(), 3u);
  EXPECT_EQ(j["base_seed"], 5);

  OptimisationConfig cfg;
  cfg.trial_count = 150;
  cfg.seed = 5;
  auto want = run_heuristics(solar_.model, cfg, 3, solar_.ctx);
  auto got = rank_report_from_json(j);
  EXPECT_EQ(got.average_rank, want.report.average_rank);
}

TEST_F(ServiceTest, ConcurrentPatchAndGet) {
  auto id = create_solar();
  constexpr int kWriters = 4, kEach = 10;
  std::atomic<bool> bad{false};
  std::atomic<bool> writing{true};
  std::vector<std::thread> ts;
  for (int w = 0; w < kWriters; ++w) {
    ts.emplace_back([&, w] {
      httplib::Client c("127.0.0.1", port_);
      for (int k = 0; k < kEach; ++k) {
        std::string body = "{\"mitigation_prob\":" + std::to_string(0.01 * (w * kEach + k)) + "}";
        auto r = c.Patch("/models/" + id + "/nodes/V" + std::to_string(w + 1), body, "application/json");
        if (!r || r->status != 200) bad = true;
      }
    });
  }
  std::thread reader([&] {
    httplib::Client c("127.0.0.1", port_);
    std::uint64_t last = 0;
    while (writing) {
      auto r = c.Get("/models/" + id);
      if (!r || r->status != 200) {
        bad = true;
        break;
      }
      auto j = json::parse(r->body);
      std::uint64_t rev = j["revision"];
      if (rev < last) bad = true;
      last = rev;
      if (!validate(parse_model(j["model"].dump())).empty()) bad = true;
    }
  });
  for (auto& t : ts) t.join();
  writing = false;
  reader.join();
  EXPECT_FALSE(bad);
  EXPECT_EQ(json::parse(client_->Get("/models/" + id)->body)["revision"], 1 + kWriters * kEach);
}

TEST(ServicePersistence, WritesModelsAndJobs) {
  auto dir = fs::temp_directory_path() / ("cpsdss-svc-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir / "models" / "m1");  // left over from an earlier process
  auto l = testsupport::load_fixture("cbtc");
  {
    service::ServiceConfig cfg;
    cfg.data_dir = dir.string();
    cfg.scoring = l.ctx;
    service::Service svc(cfg);
    auto snap = svc.models().create(l.model);
    EXPECT_EQ(snap.model_id, "m2");
    OptimisationConfig oc;
    oc.trial_count = 50;
    auto job = svc.jobs().submit(snap, oc);
    auto d = svc.jobs().wait(job.job_id, std::chrono::seconds(60));
    EXPECT_EQ(d.state, service::JobState::Done);
    svc.shutdown();
    EXPECT_TRUE(fs::exists(dir / "models" / "m2" / "rev-1.json"));
    EXPECT_TRUE(fs::exists(dir / "jobs" / job.job_id / "job.json"));
    EXPECT_TRUE(fs::exists(dir / "jobs" / job.job_id / "front.csv"));
    EXPECT_TRUE(fs::exists(dir / "jobs" / job.job_id / "trials.csv"));
    EXPECT_EQ(parse_model(read_text_file((dir / "models" / "m2" / "rev-1.json").string())), l.model);
  }
  fs::remove_all(dir);
}
