#pragma once

#include <optional>
#include <vector>

#include "hybrid/rng.hpp"
#include "hybrid/trial_core.hpp"

namespace hybrid {

inline constexpr int kTMax = 50;
inline constexpr int kTStar = 14;

struct SimConfig {
  int scenario = 1;  // 1 or 2
  int n = 100;
  int t_max = kTMax;
  int t_star = kTStar;
  double beta_star[6] = {0.4, -0.3, 0.2, -0.1, 0.4, 0.2};
  double gamma_star[6] = {0.0, 0.2, -0.1, -0.1, 0.2, 0.2};
  double ar_var = 0.5;    // marginal variance of eps
  double ar_phi = 0.7071067811865476;  // lag-1 correlation 0.5^{1/2}
  std::uint64_t seed = 0;
  int reps = 1;
};

// Optional interventions for the potential-outcome oracle: force the regime
// and/or a single decision point's treatment.
struct ForceSpec {
  std::optional<int> d1;
  std::optional<int> d2;  // applied only if the person is a non-responder
  std::optional<int> t;
  std::optional<int> a;
};

// Randomization probability p_t(A_t = 1 | H_t); z2 is the realized value
// (0 before stage 2 and for responders).
double p_treat(int scenario, int z1, int z2, int t, int t_star = kTStar);

// Responder probability given stage-1 history (scenario II integrates the
// logistic model over the realized history inside simulate_one).
double p_resp(int scenario, int z1, double xt1c, double a13, double p13);

Trajectory simulate_one(const SimConfig& config, Rng& rng,
                        const ForceSpec& force = {});

// Replication k draws from the sub-stream (seed, stream, k); bitwise
// reproducible for a given (seed, k) regardless of execution order.
std::vector<Trajectory> simulate_batch(const SimConfig& config,
                                       std::uint64_t stream,
                                       std::uint64_t rep);

}  // namespace hybrid
