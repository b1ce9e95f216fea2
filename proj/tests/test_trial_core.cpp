#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "hybrid/sim_engine.hpp"
#include "hybrid/trial_core.hpp"

using namespace hybrid;

namespace {

Trajectory make_traj(const std::string& id, int z1, int r, int z2, int T) {
  Trajectory tr;
  tr.id = id;
  tr.z1 = z1;
  tr.r = r;
  tr.z2 = z2;
  tr.x_names = {"state"};
  tr.x = Mat::Zero(T, 1);
  for (int t = 0; t < T; ++t) {
    tr.i_t.push_back(1);
    tr.a_t.push_back(t % 2);
    tr.p_t.push_back(0.5);
    tr.x(t, 0) = t % 3 == 0 ? 2.0 : -2.0;
    tr.y_next.push_back(0.1 * t + (z1 == 1 ? 0.5 : -0.2));
  }
  return tr;
}

DesignSpec variant1_design() {
  DesignSpec d;
  d.smart_variant = SmartVariant::I;
  d.p_z2_given_r = {{0, {{1, 0.5}, {-1, 0.5}}}, {1, {{1, 0.5}, {-1, 0.5}}}};
  return d;
}

std::string temp_path(const char* stem) {
  return std::string("/tmp/hybrid_test_") + stem + ".csv";
}

}  // namespace

TEST_CASE("regimes enumerate in d1-desc, d2-desc order") {
  const DesignSpec design;
  const auto regimes = enumerate_regimes(design);
  REQUIRE(regimes.size() == 4);
  CHECK(regimes[0] == DtrRegime{1, 1});
  CHECK(regimes[1] == DtrRegime{1, -1});
  CHECK(regimes[2] == DtrRegime{-1, 1});
  CHECK(regimes[3] == DtrRegime{-1, -1});
  CHECK(enumerate_regimes(variant1_design()).size() == 4);
}

TEST_CASE("consistency sets under the restricted two-stage design") {
  const DesignSpec design;
  const auto resp = consistent_regimes(make_traj("r", 1, 1, 0, 3), design);
  REQUIRE(resp.size() == 2);
  CHECK(resp[0] == DtrRegime{1, 1});
  CHECK(resp[1] == DtrRegime{1, -1});

  const auto nr1 = consistent_regimes(make_traj("a", 1, 0, -1, 3), design);
  REQUIRE(nr1.size() == 1);
  CHECK(nr1[0] == DtrRegime{1, -1});

  const auto nr2 = consistent_regimes(make_traj("b", -1, 0, 1, 3), design);
  REQUIRE(nr2.size() == 1);
  CHECK(nr2[0] == DtrRegime{-1, 1});
}

TEST_CASE("consistency under the fully re-randomized design is an exact match") {
  const auto design = variant1_design();
  const auto got = consistent_regimes(make_traj("c", 1, 1, 1, 3), design);
  REQUIRE(got.size() == 1);
  CHECK(got[0] == DtrRegime{1, 1});
}

TEST_CASE("trajectory validation catches malformed records") {
  const DesignSpec design;
  auto ragged = make_traj("x", 1, 0, 1, 3);
  ragged.i_t.pop_back();
  CHECK_THROWS_AS(validate_trajectory(ragged, design), ValidationError);

  auto resp_z2 = make_traj("x", 1, 1, 1, 3);
  CHECK_THROWS_AS(validate_trajectory(resp_z2, design), ValidationError);

  auto nonresp_z0 = make_traj("x", 1, 0, 0, 3);
  CHECK_THROWS_AS(validate_trajectory(nonresp_z0, design), ValidationError);

  auto bad_p = make_traj("x", 1, 0, 1, 3);
  bad_p.p_t[1] = 0.0;
  CHECK_THROWS_WITH_AS(validate_trajectory(bad_p, design),
                       "positivity violated at id=x,t=2", ValidationError);

  auto sentinel = make_traj("x", 1, 0, 1, 3);
  sentinel.a_t[2] = kNotRandomized;  // i stays 1
  CHECK_THROWS_AS(validate_trajectory(sentinel, design), ValidationError);

  auto elig_off = make_traj("x", 1, 0, 1, 3);
  elig_off.i_t[2] = 0;
  elig_off.a_t[2] = kNotRandomized;
  elig_off.p_t[2] = std::nan("");
  CHECK_NOTHROW(validate_trajectory(elig_off, design));
}

TEST_CASE("design validation") {
  DesignSpec bad_pz1;
  bad_pz1.p_z1 = 0.0;
  CHECK_THROWS_AS(bad_pz1.validate(), ValidationError);

  DesignSpec resp_rerand;
  resp_rerand.p_z2_given_r[1] = {{0, 0.5}, {1, 0.5}};
  CHECK_THROWS_AS(resp_rerand.validate(), ValidationError);

  DesignSpec not_normalized;
  not_normalized.p_z2_given_r[0] = {{1, 0.4}, {-1, 0.4}};
  CHECK_THROWS_AS(not_normalized.validate(), ValidationError);

  DesignSpec v3;
  v3.smart_variant = SmartVariant::III;
  CHECK_THROWS_AS(v3.validate(), ValidationError);

  CHECK(DesignSpec{}.digest() != variant1_design().digest());
}

TEST_CASE("emit -> ingest round-trips every numeric field bit-exactly") {
  for (int scenario : {1, 2}) {
    SimConfig cfg;
    cfg.scenario = scenario;
    cfg.n = 8;
    cfg.seed = 11;
    const auto orig = simulate_batch(cfg, stream_tag::kBenchmark, 0);
    const auto path = temp_path("roundtrip");
    emit_csv(orig, path);
    const auto back = ingest_csv(path);
    REQUIRE(back.size() == orig.size());
    for (size_t i = 0; i < orig.size(); ++i) {
      const auto& a = orig[i];
      const auto& b = back[i];
      CHECK(a.id == b.id);
      CHECK(a.z1 == b.z1);
      CHECK(a.r == b.r);
      CHECK(a.z2 == b.z2);
      CHECK(a.x_names == b.x_names);
      REQUIRE(a.t_max() == b.t_max());
      for (int t = 0; t < a.t_max(); ++t) {
        CHECK(a.i_t[t] == b.i_t[t]);
        CHECK(a.a_t[t] == b.a_t[t]);
        if (a.i_t[t] == 1) CHECK(a.p_t[t] == b.p_t[t]);
        CHECK(a.y_next[t] == b.y_next[t]);
        for (int k = 0; k < a.x.cols(); ++k) CHECK(a.x(t, k) == b.x(t, k));
      }
    }
    std::remove(path.c_str());
  }
}

TEST_CASE("ingest rejects malformed files") {
  const auto path = temp_path("bad");
  auto write = [&](const std::string& body) {
    std::ofstream out(path);
    out << body;
  };

  write("id,t,z1,r,z2,i,a,p\n");  // y_next missing
  CHECK_THROWS_WITH_AS(ingest_csv(path), "missing mandatory column 'y_next'",
                       ValidationError);

  write("id,t,z1,r,z2,i,a,p,y_next\n"
        "1,1,1,0,1,1,1,0.5,0.2\n"
        "1,1,1,0,1,1,0,0.5,0.1\n");
  CHECK_THROWS_AS(ingest_csv(path), ValidationError);  // duplicate (id,t)

  write("id,t,z1,r,z2,i,a,p,y_next\n"
        "1,1,1,0,1,1,1,0.5,0.2\n"
        "1,3,1,0,1,1,0,0.5,0.1\n");
  CHECK_THROWS_AS(ingest_csv(path), ValidationError);  // non-monotone t

  write("id,t,z1,r,z2,i,a,p,y_next\n"
        "1,1,1,0,1,1,1,0,0.2\n");
  CHECK_THROWS_WITH_AS(ingest_csv(path), "positivity violated at id=1,t=1",
                       ValidationError);

  write("id,t,z1,r,z2,i,a,p,y_next\n"
        "1,1,1,0,1,0,1,0.5,0.2\n");
  CHECK_THROWS_AS(ingest_csv(path), ValidationError);  // a present with i=0

  write("id,t,z1,r,z2,i,a,p,y_next\n"
        "1,1,1,0,1,1,,,0.2\n");
  CHECK_THROWS_AS(ingest_csv(path), ValidationError);  // a empty with i=1
  std::remove(path.c_str());
}

TEST_CASE("eligibility sentinel honored through a file with i turning off") {
  const auto path = temp_path("elig");
  {
    std::ofstream out(path);
    out << "id,t,x0_age,z1,r,z2,x_state,i,a,p,y_next\n";
    // 2 persons, T=4; person 7 becomes ineligible at t=3.
    for (int t = 1; t <= 4; ++t) {
      const bool off = t >= 3;
      out << "7," << t << ",31,1,0,-1,2," << (off ? 0 : 1) << ','
          << (off ? "" : "1") << ',' << (off ? "" : "0.4") << ",0.5\n";
    }
    for (int t = 1; t <= 4; ++t)
      out << "9," << t << ",44,-1,1,0,-2,1,0,0.6,1.5\n";
  }
  const auto trajs = ingest_csv(path);
  REQUIRE(trajs.size() == 2);
  const auto& p7 = trajs[0];
  CHECK(p7.id == "7");
  CHECK(p7.x0_names == std::vector<std::string>{"age"});
  CHECK(p7.x0(0) == 31.0);
  CHECK(p7.a_t == std::vector<int>{1, 1, kNotRandomized, kNotRandomized});
  CHECK(p7.i_t == std::vector<int>{1, 1, 0, 0});
  const DesignSpec design;
  CHECK(consistent_regimes(p7, design).size() == 1);
  CHECK(consistent_regimes(trajs[1], design).size() == 2);
  std::remove(path.c_str());
}
