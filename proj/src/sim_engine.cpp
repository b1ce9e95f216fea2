#include "hybrid/sim_engine.hpp"

#include <cmath>
#include <limits>

namespace hybrid {

namespace {
const double kP1X = expit(0.1);  // P(X_1 = 2) with A_0 := 0
}

double p_treat(int scenario, int z1, int z2, int t, int t_star) {
  if (scenario == 1) return 0.5;
  double base = z1 == 1 ? 0.6 : 0.4;
  const int ctz2 = t >= t_star ? z2 : 0;
  if (ctz2 == 1) base -= 0.2;
  if (ctz2 == -1) base += 0.2;
  return base;
}

double p_resp(int scenario, int z1, double xt1c, double a13, double p13) {
  if (scenario == 1) return z1 == 1 ? 0.6 : 0.45;
  return expit(-0.62 + xt1c + (a13 - p13) + 0.5 * z1);
}

Trajectory simulate_one(const SimConfig& config, Rng& rng,
                        const ForceSpec& force) {
  const int T = config.t_max;
  const int ts = config.t_star;
  const double* B = config.beta_star;
  const double* G = config.gamma_star;
  const double innov_sd =
      std::sqrt(config.ar_var * (1.0 - config.ar_phi * config.ar_phi));

  Trajectory tr;
  tr.x_names = {"state", "statec"};
  tr.x.resize(T, 2);
  tr.i_t.assign(static_cast<size_t>(T), 1);
  tr.a_t.assign(static_cast<size_t>(T), 0);
  tr.p_t.assign(static_cast<size_t>(T), 0.0);
  tr.y_next.assign(static_cast<size_t>(T), 0.0);

  tr.z1 = force.d1 ? *force.d1 : (rng.uniform() < 0.5 ? -1 : 1);
  // Stationary AR(1) disturbances drawn up front.
  std::vector<double> eps(static_cast<size_t>(T) + 1);
  eps[1] = rng.normal() * std::sqrt(config.ar_var);
  for (int t = 2; t <= T; ++t)
    eps[static_cast<size_t>(t)] =
        config.ar_phi * eps[static_cast<size_t>(t) - 1] + rng.normal() * innov_sd;

  int r = 0, z2 = 0;
  double p_r = std::numeric_limits<double>::quiet_NaN();
  double xt1c = std::numeric_limits<double>::quiet_NaN();
  double a_prev = 0.0, p_prev = 0.0;  // A_0 := 0
  for (int t = 1; t <= T; ++t) {
    const auto u = static_cast<size_t>(t - 1);
    if (t == ts) {
      p_r = p_resp(config.scenario, tr.z1, xt1c, a_prev, p_prev);
      r = rng.uniform() < p_r ? 1 : 0;
      if (r == 0)
        z2 = force.d2 ? *force.d2 : (rng.uniform() < 0.5 ? -1 : 1);
    }
    const double delta = t >= ts ? 1.0 : 0.0;
    const double px =
        t > 1 ? expit(-a_prev + 0.1 + 0.2 * (1 - r) * delta * z2) : kP1X;
    const double xv = rng.uniform() < px ? 2.0 : -2.0;
    const double xcv = xv - (4.0 * px - 2.0);
    if (t == 1) xt1c = xcv;
    const double pt = p_treat(config.scenario, tr.z1, z2, t, ts);
    int at;
    if (force.t && *force.t == t)
      at = *force.a;
    else
      at = rng.uniform() < pt ? 1 : 0;
    const double carry = t > 1 ? 0.1 * (a_prev - p_prev) : 0.0;
    const double bterm = B[0] + B[1] * tr.z1 + B[2] * z2 +
                         B[3] * delta * tr.z1 * z2 + B[4] * xcv +
                         B[5] * xcv * tr.z1;
    const double gterm = G[0] + G[1] * tr.z1 + G[2] * delta * z2 +
                         G[3] * delta * tr.z1 * z2 + G[4] * xcv * tr.z1 +
                         (t >= ts ? G[5] * (r - p_r) : 0.0);
    tr.x(t - 1, 0) = xv;
    tr.x(t - 1, 1) = xcv;
    tr.p_t[u] = pt;
    tr.a_t[u] = at;
    tr.y_next[u] = 0.5 * xcv + carry + (at - pt) * bterm + gterm +
                   eps[static_cast<size_t>(t)];
    a_prev = at;
    p_prev = pt;
  }
  tr.r = r;
  tr.z2 = z2;
  return tr;
}

std::vector<Trajectory> simulate_batch(const SimConfig& config,
                                       std::uint64_t stream,
                                       std::uint64_t rep) {
  Rng rng(config.seed, stream, rep);
  std::vector<Trajectory> out;
  out.reserve(static_cast<size_t>(config.n));
  for (int i = 0; i < config.n; ++i) {
    Trajectory tr = simulate_one(config, rng);
    tr.id = std::to_string(i + 1);
    out.push_back(std::move(tr));
  }
  return out;
}

}  // namespace hybrid
