#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "panelci/decomp.hpp"
#include "panelci/simgen.hpp"
#include "panelci/smooth.hpp"

using namespace panelci;
using fixture::make_panel;

namespace {

// Simulated panel with units 1..4 flagged LGB.
PanelDataset lgb_panel(std::uint64_t seed) {
  simgen::SimConfig c;
  c.n_units = 16;
  c.n_periods = 40;
  c.t_pre = 30;
  c.seed = seed;
  c.effect_path = simgen::EffectPath::constant;
  c.delta = -7;
  auto p = simgen::generate(c).panel;
  for (int i = 1; i <= 4; ++i) p.lgb_units.insert(p.units[static_cast<std::size_t>(i)]);
  return p;
}

std::set<std::string> lgb_members(const PanelDataset& p) { return p.lgb_units; }

}  // namespace

TEST(CompositeUnit, IdenticalMembersReproduceTheSeries) {
  const std::vector<double> s = {18.3, 19.7, 0.1, 22.9, 17.77, 21.05};
  auto p = make_panel({"T", "L1", "L2", "L3", "L4", "D1", "D2"}, {s, s, s, s, s, {1, 2, 3, 4, 5, 6}, {6, 5, 4, 3, 2, 1}},
                      "T", 4);
  p.lgb_units = {"L1", "L2", "L3", "L4"};
  auto c = decomp::composite_unit(p, p.lgb_units);
  const Eigen::VectorXd comp = c.series("composite");
  for (std::size_t t = 0; t < s.size(); ++t) EXPECT_EQ(comp(static_cast<Eigen::Index>(t)), s[t]);
}

TEST(CompositeUnit, ElementwiseMean) {
  auto p = make_panel({"T", "A", "B", "D"}, {{1, 1}, {0, 10}, {10, 0}, {3, 3}}, "T", 1);
  p.lgb_units = {"A", "B"};
  auto c = decomp::composite_unit(p, {"A", "B"});
  EXPECT_EQ(c.series("composite"), Eigen::Vector2d(5, 5));

  auto q = make_panel({"T", "A", "B", "C", "E", "D"},
                      {{0, 0, 0}, {1, 2, 3}, {4, 8, 12}, {-2, 0, 2}, {0.5, 0.25, 0.125}, {9, 9, 9}}, "T", 2);
  q.lgb_units = {"A", "B", "C", "E"};
  auto cq = decomp::composite_unit(q, q.lgb_units).series("composite");
  EXPECT_NEAR(cq(0), (1 + 4 - 2 + 0.5) / 4.0, 1e-15);
  EXPECT_NEAR(cq(1), (2 + 8 + 0 + 0.25) / 4.0, 1e-15);
  EXPECT_NEAR(cq(2), (3 + 12 + 2 + 0.125) / 4.0, 1e-15);
}

TEST(CompositeUnit, RejectsBadMembers) {
  auto p = make_panel({"T", "A", "D"}, {{1, 1}, {0, 10}, {3, 3}}, "T", 1);
  p.lgb_units = {"A"};
  EXPECT_THROW(decomp::composite_unit(p, {}), ValidationError);
  EXPECT_THROW(decomp::composite_unit(p, {"D"}), ValidationError);
}

TEST(CompositeUnit, CommutesWithSmoothing) {
  auto p = lgb_panel(3);
  const SmoothConfig sc;
  auto c = decomp::composite_unit(p, p.lgb_units);
  const Eigen::MatrixXd smoothed = smooth_rows(c.outcomes, sc, c.t_pre);
  Eigen::VectorXd mean_of_smoothed = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.n_periods()));
  for (const auto& m : p.lgb_units) mean_of_smoothed += smoothed.row(static_cast<Eigen::Index>(c.index_of(m))).transpose();
  mean_of_smoothed /= 4.0;
  const Eigen::VectorXd smoothed_mean = smoothed.row(static_cast<Eigen::Index>(c.index_of("composite"))).transpose();
  EXPECT_LE((smoothed_mean - mean_of_smoothed).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Decompose, IdentityHoldsAndDonorsExcludeMembers) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto p = lgb_panel(seed);
    scm::FitConfig cfg;
    cfg.smoothing = SmoothConfig{};
    auto r = decomp::decompose(p, lgb_members(p), cfg);
    ASSERT_EQ(r.tau_series.size(), 10);
    EXPECT_EQ(r.post_days.size(), 10u);
    for (Eigen::Index t = 0; t < r.tau_series.size(); ++t)
      EXPECT_NEAR(r.tau_c_series(t) + r.gamma_series(t), r.tau_series(t), 1e-12);
    EXPECT_NEAR(r.tau_c_avg, r.tau_c_series.mean(), 1e-12);
    for (const auto& lbl : r.gamma_fit.weights.donor_labels) {
      EXPECT_FALSE(p.lgb_units.count(lbl)) << lbl;
      EXPECT_NE(lbl, p.treated_unit);
    }
    for (const auto& lbl : r.tau_fit.weights.donor_labels) EXPECT_FALSE(p.lgb_units.count(lbl)) << lbl;
    EXPECT_FALSE(std::isnan(r.gamma_fit.ci_lo));
    EXPECT_NE(r.assumptions.sutva.find("SUTVA"), std::string::npos);
    EXPECT_NE(r.assumptions.homogeneity.find("homogeneity"), std::string::npos);
  }
}

TEST(Decompose, CompositeEqualToDonorGivesNoCampaignEffect) {
  // members straddle donor D1 by +-1, so the composite is D1 exactly
  std::vector<std::vector<double>> rows = {{10, 12, 11, 13, 12, 14, 5, 6},  // treated
                                           {3, 7, 1, 9, 4, 6, 8, 2},        // D1
                                           {5, 5, 9, 2, 8, 1, 3, 7},        // D2
                                           {1, 2, 3, 4, 5, 6, 7, 8},        // D3
                                           {4, 8, 2, 10, 5, 7, 9, 3},       // L1 = D1 + 1
                                           {2, 6, 0, 8, 3, 5, 7, 1}};       // L2 = D1 - 1
  auto p = make_panel({"T", "D1", "D2", "D3", "L1", "L2"}, rows, "T", 6);
  p.lgb_units = {"L1", "L2"};
  scm::FitConfig cfg;
  cfg.zeta = scm::ZetaSpec::zero();
  auto r = decomp::decompose(p, p.lgb_units, cfg);
  EXPECT_EQ(r.gamma_series, Eigen::VectorXd::Zero(2));
  EXPECT_EQ(r.tau_c_series, r.tau_series);
}

TEST(Decompose, NetEffectArithmetic) { EXPECT_NEAR(decomp::net_effect(-7.156, -0.149), -7.007, 1e-12); }
