#include <gtest/gtest.h>

#include <random>

#include "cpsdss/front_io.hpp"
#include "support.hpp"

using namespace cpsdss;

TEST(FrontCsv, HeaderAndRows) {
  TrialRecord t;
  t.trial_id = 12;
  t.portfolio = {{"V1", "V2"}, {0.5, 0.1}};
  t.objectives = {0.25, 0.0, 1.0};
  std::vector<NodeId> ids{"V1", "V2"};
  std::string csv = trials_to_csv(std::vector<TrialRecord>{t}, ids);
  EXPECT_EQ(csv, "trial_id,likelihood,impact,availability,V1,V2\n12,0.25,0,1,0.5,0.1\n");
}

TEST(FrontCsv, RoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ParetoFront f;
  f.run_seed = 5;
  f.trial_count = 99;
  std::vector<NodeId> ids{"V1", "V2", "V3"};
  for (std::uint64_t i = 0; i < 40; ++i) {
    TrialRecord t;
    t.trial_id = i * 3;
    t.portfolio.ids = ids;
    for (int k = 0; k < 3; ++k) t.portfolio.values.push_back(u(rng));
    t.objectives = {u(rng) * 1e-7, u(rng), 1.0 - u(rng) * 1e-12};
    f.members.push_back(t);
  }
  auto text = front_to_csv(f, ids);
  auto back = front_from_csv(text, 5, 99);
  EXPECT_EQ(back, f);
  EXPECT_EQ(front_to_csv(back, ids), text);
}

TEST(FrontCsv, FixtureFrontRoundTrips) {
  auto l = testsupport::load_fixture("solar_pv");
  OptimisationConfig cfg;
  cfg.trial_count = 300;
  auto res = run_optimisation(l.model, cfg, l.ctx);
  auto ids = l.model.vulnerability_ids();
  EXPECT_EQ(front_from_csv(front_to_csv(res.front, ids), 0, 300), res.front);
}

TEST(FrontCsv, RejectsMalformed) {
  EXPECT_THROW(trials_from_csv("trial_id,likelihood,impact\n"), ParseError);
  EXPECT_THROW(trials_from_csv("trial_id,likelihood,impact,availability,V1\n1,0.1,0,1\n"), ParseError);
  EXPECT_THROW(trials_from_csv("trial_id,likelihood,impact,availability,V1\n1,0.1,0,x,0.5\n"), ParseError);
  EXPECT_TRUE(trials_from_csv("trial_id,likelihood,impact,availability,V1\n").empty());
}

TEST(PortfolioJson, ArrayAndObjectForms) {
  auto m = testsupport::tiny_model();
  auto a = portfolio_from_json(nlohmann::json::parse(R"([{"id":"V2","mitigation":0.4}])"));
  auto full = resolve_portfolio(m, a);
  EXPECT_EQ(full.values, (std::vector<double>{0.0, 0.4}));
  auto b = portfolio_from_json(nlohmann::json::parse(R"({"V1":0.3})"));
  EXPECT_EQ(resolve_portfolio(m, b).values, (std::vector<double>{0.3, 0.0}));
  auto c = portfolio_from_json(nlohmann::json::parse(R"({"V7":0.3})"));
  EXPECT_THROW(resolve_portfolio(m, c), NotFoundError);
}

TEST(RankJson, RoundTrip) {
  RankReport r;
  r.average_rank = {{"V1", 1.5}, {"V2", 2.25}};
  r.run_count = 4;
  r.trials_per_run = 100;
  auto back = rank_report_from_json(to_json(r));
  EXPECT_EQ(back.average_rank, r.average_rank);
  EXPECT_EQ(back.run_count, 4u);
  EXPECT_EQ(back.trials_per_run, 100u);
}
