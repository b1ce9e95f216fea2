#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "hybrid/design_weights.hpp"
#include "hybrid/sim_engine.hpp"

using namespace hybrid;

namespace {

// T decision points, all eligible, a alternating 1,0,..., p = 0.4 throughout,
// state covariate x(t) = off + t.
Trajectory traj(const std::string& id, int z1, int r, int z2, int T,
                double off) {
  Trajectory tr;
  tr.id = id;
  tr.z1 = z1;
  tr.r = r;
  tr.z2 = z2;
  tr.x_names = {"state"};
  tr.x = Mat::Zero(T, 1);
  for (int t = 1; t <= T; ++t) {
    tr.x(t - 1, 0) = off + t;
    tr.i_t.push_back(1);
    tr.a_t.push_back(t % 2);
    tr.p_t.push_back(0.4);
    tr.y_next.push_back(0.0);
  }
  return tr;
}

void knock_out(Trajectory& tr, int t) {
  tr.i_t[static_cast<size_t>(t - 1)] = 0;
  tr.a_t[static_cast<size_t>(t - 1)] = kNotRandomized;
  tr.p_t[static_cast<size_t>(t - 1)] = std::nan("");
}

DesignSpec small_design() {
  DesignSpec d;
  d.t_star = 2;
  d.t_max = 4;
  return d;
}

// A responder (consistent with both stage-2 options of its arm) plus one
// non-responder per remaining cell; x offsets make every regime mean distinct.
std::vector<Trajectory> four_person_fixture() {
  return {traj("A", 1, 1, 0, 4, 0.0), traj("B", 1, 0, -1, 4, 10.0),
          traj("C", -1, 0, 1, 4, -10.0), traj("D", -1, 0, -1, 4, 20.0)};
}

ModelSpec finalized_spec(const std::vector<Trajectory>& trajs,
                         const std::vector<std::string>& g,
                         const std::vector<std::string>& s) {
  auto spec = ModelSpec::from_strings(0.5, {"1"}, {"1"}, g, s);
  spec.finalize(trajs);
  return spec;
}

}  // namespace

TEST_CASE("design weights follow the inverse randomization probabilities") {
  const DesignSpec design;
  CHECK(smart_weight(design, 1, 1, 0) == 2.0);   // responder: 1/(0.5*1)
  CHECK(smart_weight(design, -1, 1, 0) == 2.0);
  CHECK(smart_weight(design, 1, 0, 1) == 4.0);   // non-responder: 1/(0.5*0.5)
  CHECK(smart_weight(design, -1, 0, -1) == 4.0);
  // A responder continuing with z2 = 1 has probability zero by design.
  CHECK_THROWS_AS(smart_weight(design, 1, 1, 1), ValidationError);
}

TEST_CASE("per-decision weight is rho/p on treated, (1-rho)/(1-p) otherwise") {
  CHECK(mrt_weight(0.5, 0.5, 1, true) == 1.0);
  CHECK(mrt_weight(0.5, 0.5, 0, true) == 1.0);
  CHECK(mrt_weight(0.5, 0.6, 1, true) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(mrt_weight(0.5, 0.6, 0, true) == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(mrt_weight(0.5, 0.9, 1, false) == 1.0);  // ineligible points get 1
}

TEST_CASE("row replication: one row per consistent regime and decision point") {
  const auto trajs = four_person_fixture();
  const auto design = small_design();
  const auto spec = finalized_spec(trajs, {"x(state)"}, {});
  const auto tab = build_rows(trajs, design, spec);

  REQUIRE(tab.n_rows() == 20);  // 2*4 + 4 + 4 + 4
  REQUIRE(tab.regimes.size() == 4);
  CHECK(tab.n_persons == 4);
  CHECK(tab.t_star == 2);

  // Person-major layout, regimes in design order, t innermost.
  CHECK(tab.person[0] == 0);
  CHECK(tab.person[7] == 0);
  CHECK(tab.person[8] == 1);
  CHECK(tab.regime_idx[0] == 0);   // A, regime (1, 1)
  CHECK(tab.regime_idx[4] == 1);   // A, regime (1, -1)
  CHECK(tab.regime_idx[8] == 1);   // B, regime (1, -1)
  CHECK(tab.regime_idx[12] == 2);  // C
  CHECK(tab.regime_idx[16] == 3);  // D
  CHECK(tab.t[5] == 2);
  CHECK(tab.person_id[8] == "B");

  // Responder rows carry ws = 2 (both replicates), non-responders ws = 4.
  for (int r = 0; r < 8; ++r) CHECK(tab.ws(r) == 2.0);
  for (int r = 8; r < 20; ++r) CHECK(tab.ws(r) == 4.0);

  // The two replicates of a responder share the same observed data.
  CHECK(tab.y(0) == tab.y(4));
  CHECK(tab.a(1) == tab.a(5));
  CHECK(tab.G(2, 0) == tab.G(6, 0));

  // Treatment and weight coding at p = 0.4.
  CHECK(tab.a(8) == 1.0);
  CHECK(tab.ac(8) == 0.5);
  CHECK(tab.wm(8) == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(tab.ac(9) == -0.5);
  CHECK(tab.wm(9) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("ineligible decision points are coded as no-ops") {
  auto trajs = four_person_fixture();
  knock_out(trajs[1], 3);  // person B, t = 3 -> replicated row 10
  const auto spec = finalized_spec(trajs, {"x(state)"}, {});
  const auto tab = build_rows(trajs, small_design(), spec);

  CHECK(tab.elig[10] == 0);
  CHECK(tab.a(10) == 0.5);   // rho
  CHECK(tab.ac(10) == 0.0);  // exactly zero: the row drops out of acF and acS
  CHECK(tab.wm(10) == 1.0);
  CHECK(tab.p(10) == 0.5);
  CHECK(tab.elig[9] == 1);
}

TEST_CASE("build_rows demands a finalized spec") {
  const auto trajs = four_person_fixture();
  const auto spec = ModelSpec::from_strings(0.5, {"1"}, {"1"}, {}, {});
  CHECK_THROWS_WITH_AS(build_rows(trajs, small_design(), spec),
                       "model spec must be finalized against the data",
                       ValidationError);
}

TEST_CASE("pooled centering means per regime match hand-computed values") {
  const auto trajs = four_person_fixture();
  const auto spec = finalized_spec(trajs, {"x(state)"}, {});
  const auto tab = build_rows(trajs, small_design(), spec);
  const Mat mu = compute_mu(tab);

  REQUIRE(mu.rows() == 4);
  REQUIRE(mu.cols() == 1);
  // (1,1): A alone, plain mean of {1,2,3,4}.
  CHECK(mu(0, 0) == doctest::Approx(2.5).epsilon(1e-12));
  // (1,-1): A (ws 2, sum 10) and B (ws 4, sum 50) pooled over t.
  CHECK(mu(1, 0) == doctest::Approx((2.0 * 10 + 4.0 * 50) / 24.0).epsilon(1e-12));
  CHECK(mu(2, 0) == doctest::Approx(-7.5).epsilon(1e-12));
  CHECK(mu(3, 0) == doctest::Approx(22.5).epsilon(1e-12));
}

TEST_CASE("a regime with no consistent person is a degenerate design") {
  // Without D the regime (-1,-1) has no replicated rows.
  std::vector<Trajectory> trajs = {traj("A", 1, 1, 0, 4, 0.0),
                                   traj("B", 1, 0, -1, 4, 10.0),
                                   traj("C", -1, 0, 1, 4, -10.0)};
  const auto spec = finalized_spec(trajs, {"x(state)"}, {});
  const auto tab = build_rows(trajs, small_design(), spec);
  CHECK_THROWS_WITH_AS(compute_mu(tab), "a regime carries no replicated rows",
                       NumericalError);
}

TEST_CASE("centered columns are weight-orthogonal within every cell") {
  const auto trajs = four_person_fixture();
  const auto spec = finalized_spec(trajs, {"x(state)"}, {});
  const auto tab = build_rows(trajs, small_design(), spec);

  for (const Centering mode : {Centering::kPooled, Centering::kPerTime}) {
    const auto cen = compute_centering(tab, mode);
    const size_t want = mode == Centering::kPooled ? 4u : 16u;  // 4 regimes x 4 t
    REQUIRE(cen.g_cells.size() == want);
    for (const auto& cell : cen.g_cells) {
      double moment = 0.0;
      for (const int r : cell.rows) moment += tab.ws(r) * cen.Gc(r, 0);
      CHECK(std::abs(moment) < 1e-10);
    }
  }

  // Per-time spot check: cell (t=1, regime (1,-1)) holds A's and B's rows.
  const auto cen = compute_centering(tab, Centering::kPerTime);
  const double m = (2.0 * 1 + 4.0 * 11) / 6.0;
  CHECK(cen.Gc(4, 0) == doctest::Approx(1.0 - m).epsilon(1e-12));
  CHECK(cen.Gc(8, 0) == doctest::Approx(11.0 - m).epsilon(1e-12));
}

TEST_CASE("auxiliary psi pools across regimes and over all rows") {
  const auto trajs = four_person_fixture();

  // Constant column: psi is exactly 1.
  {
    const auto spec = finalized_spec(trajs, {}, {"1"});
    const auto tab = build_rows(trajs, small_design(), spec);
    const Vec psi = compute_psi(tab);
    REQUIRE(psi.size() == 1);
    CHECK(psi(0) == 1.0);
  }

  // d1 = +1 rows and d1 = -1 rows carry equal total weight (16 + 16 each),
  // so pooling across regimes gives 0; per-regime means would be +-1.
  {
    const auto spec = finalized_spec(trajs, {}, {"d1"});
    const auto tab = build_rows(trajs, small_design(), spec);
    const auto cen = compute_centering(tab, Centering::kPooled);
    REQUIRE(cen.s_cells.size() == 1);
    CHECK(cen.s_cells[0].rows.size() == 20);
    CHECK(compute_psi(tab)(0) == doctest::Approx(0.0).epsilon(1e-12));
  }

  // Eligibility column with one knocked-out point: ineligible rows still
  // count in the pooled mean. ws-weighted eligible mass 60 of 64.
  {
    auto copy = trajs;
    knock_out(copy[1], 3);
    const auto spec = finalized_spec(copy, {}, {"i"});
    const auto tab = build_rows(copy, small_design(), spec);
    CHECK(compute_psi(tab)(0) == doctest::Approx(60.0 / 64.0).epsilon(1e-12));
  }
}

TEST_CASE("psi is one half when half the weighted rows are eligible") {
  auto e = traj("E", 1, 0, 1, 4, 0.0);
  auto f = traj("F", -1, 0, -1, 4, 0.0);
  for (int t = 1; t <= 4; ++t) knock_out(f, t);
  const std::vector<Trajectory> trajs = {e, f};
  const auto spec = finalized_spec(trajs, {}, {"i"});
  const auto tab = build_rows(trajs, small_design(), spec);
  CHECK(compute_psi(tab)(0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pooled regime means match the state-chain law of scenario 1") {
  SimConfig cfg;
  cfg.scenario = 1;
  cfg.n = 6000;
  cfg.seed = 31;
  const auto trajs = simulate_batch(cfg, stream_tag::kBenchmark, 0);
  const auto spec = finalized_spec(trajs, {"x(state)"}, {});
  const DesignSpec design;
  const auto tab = build_rows(trajs, design, spec);
  const Mat mu = compute_mu(tab);

  // Forward-solved chain: X_t in {-2, 2} with P(X_t = 2) = expit(-A_{t-1} +
  // 0.1 + 0.2 (1-R) Z2 1{t >= t*}) and A_{t-1} ~ Bern(1/2) under scenario 1.
  const double e1 = 4.0 * expit(0.1) - 2.0;
  const double epre = 2.0 * (expit(0.1) + expit(-0.9)) - 2.0;
  auto enr = [](int z2) {
    return 2.0 * (expit(0.1 + 0.2 * z2) + expit(-0.9 + 0.2 * z2)) - 2.0;
  };
  // Within a regime the responder share is P(R=1|Z1): the ws-weighted mix of
  // responder rows (weight 2) and matching non-responders (weight 4, half of
  // them) restores exactly that proportion.
  auto chain = [&](double pr, int z2) {
    const double post = pr * epre + (1.0 - pr) * enr(z2);
    return (e1 + 12.0 * epre + 37.0 * post) / 50.0;
  };
  const double expected[4] = {chain(0.6, 1), chain(0.6, -1), chain(0.45, 1),
                              chain(0.45, -1)};
  for (int k = 0; k < 4; ++k)
    CHECK(std::abs(mu(k, 0) - expected[k]) < 0.02);
}
