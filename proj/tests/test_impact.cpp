#include <gtest/gtest.h>

#include "cpsdss/impact.hpp"
#include "support.hpp"

using namespace cpsdss;
using testsupport::tiny_model;

namespace {

ImpactFactors row(std::array<double, 5> f, std::array<double, 5> c) { return {f, c}; }

}  // namespace

TEST(ImpactRating, SolarComponentRows) {
  const std::array<double, 5> f{1, 0.25, 0.25, 0.75, 0.5};
  EXPECT_NEAR(impact_rating(row(f, {0, 0, 0.5, 0, 0.25})), 0.0909, 1e-4);
  EXPECT_NEAR(impact_rating(row(f, {0, 0, 0.5, 0.5, 0.5})), 0.2727, 1e-4);
  EXPECT_NEAR(impact_rating(row(f, {0, 0.25, 0.75, 0.75, 0.5})), 0.3864, 1e-4);
  EXPECT_NEAR(impact_rating(row(f, {0.5, 0.75, 0, 1, 0.75})), 0.6591, 1e-4);
}

TEST(ImpactRating, FixtureAssetsCarryReferenceRatings) {
  auto m = testsupport::load_fixture("solar_pv").model;
  const std::map<std::string, double> want{{"A1", 0.0909}, {"A2", 0.0909}, {"A3", 0.2727},
                                           {"A4", 0.2727}, {"A5", 0.3864}, {"A6", 0.6591}};
  for (const auto& [id, r] : want) EXPECT_NEAR(impact_rating(m.at(id).asset().impact_factors), r, 1e-4) << id;
}

TEST(ImpactRating, RejectsZeroWeights) { EXPECT_THROW(impact_rating(ImpactFactors{}), DomainError); }

TEST(StructuralImpact, ChildShare) {
  auto m = tiny_model();
  EXPECT_DOUBLE_EQ(structural_impact("A1", m), 0.25);
  EXPECT_DOUBLE_EQ(structural_impact("H1", m), 0.0);
  EXPECT_THROW(structural_impact("V1", m), DomainError);
}

TEST(Failure, RiskAdjustedCombinesDecayAndMitigation) {
  auto m = tiny_model(0.4, 0.3, 0.001);
  Portfolio p = Portfolio::from_model(m);
  p.values = {0.5, 1.0};
  const double decay = 1.0 - std::exp(-0.1);
  const double induced = 0.5 * 0.2 + 1.0 * 0.4;
  EXPECT_NEAR(risk_adjusted_failure("A1", m, p), 1.0 - (1.0 - decay) * (1.0 - induced), 1e-15);
  EXPECT_EQ(associated_vulnerabilities("A1", m), (std::vector<NodeId>{"V1", "V2"}));
}

TEST(Failure, InducedFailureCapsAtOne) {
  std::vector<double> m{1.0, 1.0}, f{0.8, 0.9};
  EXPECT_DOUBLE_EQ(mitigation_induced_failure(1.0, m, f), 1.0);
  EXPECT_DOUBLE_EQ(mitigation_induced_failure(0.5, m, f), 0.85);
}

TEST(Availability, WeightedByRatings) {
  auto m = tiny_model(0.4, 0.3, 0.0);
  Portfolio p = Portfolio::from_model(m);
  EXPECT_DOUBLE_EQ(availability(m, p), 1.0);
  p.values = {1.0, 0.0};
  EXPECT_NEAR(availability(m, p), 0.8, 1e-15);
}

TEST(Availability, NonincreasingInMitigationForFixtures) {
  for (const char* name : {"solar_pv", "blackenergy", "cbtc"}) {
    auto m = testsupport::load_fixture(name).model;
    Portfolio p = Portfolio::uniform(m, 0.2);
    double prev = availability(m, p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p.values[i] = 0.8;
      double a = availability(m, p);
      EXPECT_LE(a, prev + 1e-15) << name;
      prev = a;
    }
  }
}

TEST(Portfolio, CheckedAgainstModel) {
  auto m = tiny_model();
  Portfolio p = Portfolio::from_model(m);
  p.values[0] = -0.1;
  EXPECT_THROW(p.check_against(m), DomainError);
  Portfolio q{{"V2", "V1"}, {0.1, 0.2}};
  EXPECT_THROW(q.check_against(m), DomainError);
  EXPECT_THROW(Portfolio::from_model(m).at("V9"), NotFoundError);
  auto applied = apply_portfolio(m, Portfolio::uniform(m, 0.6));
  EXPECT_DOUBLE_EQ(applied.at("V2").vuln().mitigation_prob, 0.6);
}

TEST(RiskSummary, CompositeIsProduct) {
  auto a = RiskSummary::from(0.2555, 0.9153);
  EXPECT_NEAR(a.composite_risk, 0.2339, 1e-4);
  auto b = RiskSummary::from(0.8750, 0.2393);
  EXPECT_NEAR(b.composite_risk, 0.2094, 1e-4);
}
