#pragma once

#include <map>
#include <string>

#include "hybrid/sim_engine.hpp"
#include "hybrid/trial_core.hpp"

namespace hybrid {

// Marginal responder probability P(R=1 | Z1=z1); scenario II integrates the
// responder logit over the stage-1 history distribution in closed form.
double resp_prob_true(int scenario, int z1);

// E[Y_{t+1}(dbar, A_t = a)] and E[Y_{t+1}(dbar)] with A_t randomized; both are
// time-invariant within a stage.
double mean_fixed_a(int scenario, const DtrRegime& d, int a, bool stage2);
double mean_avg_a(int scenario, const DtrRegime& d, bool stage2);

// Self-check: closed forms evaluated at three interior points per stage agree.
bool verify_time_invariance(int scenario);

// Contrast-level truth. kind: "IA" (within-regime effect of A_t), "AA"
// (effect of A_t averaged over regimes), "AD" (regime contrast averaging over
// A_t), "ID" (regime contrast at fixed A_t = a_fixed). Stage-1 contrasts
// canonicalize d2 to 0.
double true_effect_analytic(int scenario, const std::string& kind, int stage,
                            const DtrRegime& d, const DtrRegime& dp,
                            int a_fixed);

struct McValue {
  double value = 0.0;
  double se = 0.0;
};

// Potential-outcome Monte-Carlo oracle: forces (dbar, A_t=a) in the DGP and
// averages the realized Y_{t+1}. Chunked deterministic sub-streams.
class McOracle {
 public:
  McOracle(int scenario, long n_mc, std::uint64_t seed)
      : scenario_(scenario), n_mc_(n_mc), seed_(seed) {}

  McValue mean_fixed_a(const DtrRegime& d, int a, int t);
  McValue mean_avg_a(const DtrRegime& d, int t);
  McValue effect(const std::string& kind, int stage, const DtrRegime& d,
                 const DtrRegime& dp, int a_fixed);

 private:
  McValue run(const DtrRegime& d, int a, int t, bool force_a);
  int scenario_;
  long n_mc_;
  std::uint64_t seed_;
  std::map<std::array<long, 4>, McValue> cache_;
};

// Inverse-probability-weighted functional on unforced (observational) sims:
// fixed a: mean of ws(dbar) 1{A_t=a} / p_t(a) * Y_{t+1};
// averaged: mean of ws(dbar) * Y_{t+1}.
McValue ipw_mean_fixed_a(int scenario, const DesignSpec& design,
                         const DtrRegime& d, int a, int t, long n_sim,
                         std::uint64_t seed);
McValue ipw_mean_avg_a(int scenario, const DesignSpec& design,
                       const DtrRegime& d, int t, long n_sim,
                       std::uint64_t seed);

}  // namespace hybrid
