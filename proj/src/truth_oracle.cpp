#include "hybrid/truth_oracle.hpp"

#include <cmath>

#include "hybrid/design_weights.hpp"

namespace hybrid {

namespace {

constexpr double kB[6] = {0.4, -0.3, 0.2, -0.1, 0.4, 0.2};
constexpr double kGm[6] = {0.0, 0.2, -0.1, -0.1, 0.2, 0.2};

// Treatment and regime brackets of the DGP mean; state terms have conditional
// mean zero and drop out of the marginal means.
double bsum(int z1, int z2, bool stage2) {
  const double d = stage2 ? 1.0 : 0.0;
  return kB[0] + kB[1] * z1 + kB[2] * z2 + kB[3] * d * z1 * z2;
}

double gsum(int z1, int z2, bool stage2) {
  const double d = stage2 ? 1.0 : 0.0;
  return kGm[0] + kGm[1] * z1 + kGm[2] * d * z2 + kGm[3] * d * z1 * z2;
}

double mean_fixed_at(int scenario, const DtrRegime& d, int a, int t) {
  const bool stage2 = t >= kTStar;
  if (!stage2) {
    const double p = p_treat(scenario, d.d1, 0, t);
    return (a - p) * bsum(d.d1, 0, false) + gsum(d.d1, 0, false);
  }
  const double pr = resp_prob_true(scenario, d.d1);
  const double pn = p_treat(scenario, d.d1, d.d2, t);  // non-responder keeps z2
  const double ps = p_treat(scenario, d.d1, 0, t);     // responder has z2 = 0
  const double nonresp = (a - pn) * bsum(d.d1, d.d2, true) + gsum(d.d1, d.d2, true);
  const double resp = (a - ps) * bsum(d.d1, 0, true) + gsum(d.d1, 0, true);
  return (1.0 - pr) * nonresp + pr * resp;
}

double mean_avg_at(int scenario, const DtrRegime& d, int t) {
  const bool stage2 = t >= kTStar;
  if (!stage2) return gsum(d.d1, 0, false);
  const double pr = resp_prob_true(scenario, d.d1);
  return (1.0 - pr) * gsum(d.d1, d.d2, true) + pr * gsum(d.d1, 0, true);
}

DtrRegime canonical(const DtrRegime& d, int stage) {
  return stage == 1 ? DtrRegime{d.d1, 0} : d;
}

std::uint64_t pack_stream(int scenario, const DtrRegime& d, int a, int t,
                          int mode, long chunk) {
  std::uint64_t s = 0;
  s |= static_cast<std::uint64_t>(scenario & 3) << 50;
  s |= static_cast<std::uint64_t>(mode & 7) << 46;
  s |= static_cast<std::uint64_t>(d.d1 + 2) << 42;
  s |= static_cast<std::uint64_t>(d.d2 + 2) << 38;
  s |= static_cast<std::uint64_t>(a + 16) << 30;
  s |= static_cast<std::uint64_t>(t & 0xfff) << 16;
  s |= static_cast<std::uint64_t>(chunk & 0xffff);
  return s;
}

constexpr long kChunk = 65536;

struct Accum {
  double sum = 0.0, sumsq = 0.0;
  long n = 0;
  void add(double v) {
    sum += v;
    sumsq += v * v;
    ++n;
  }
  McValue finish() const {
    McValue out;
    out.value = sum / static_cast<double>(n);
    const double var =
        (sumsq - sum * sum / static_cast<double>(n)) / static_cast<double>(n - 1);
    out.se = std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
    return out;
  }
};

}  // namespace

double resp_prob_true(int scenario, int z1) {
  if (scenario == 1) return z1 == 1 ? 0.6 : 0.45;
  const double p1x = expit(0.1);
  const double p13 = z1 == 1 ? 0.6 : 0.4;
  double tot = 0.0;
  for (const auto& [x1, px] :
       {std::pair<double, double>{2.0, p1x}, {-2.0, 1.0 - p1x}}) {
    const double xc1 = x1 - (4.0 * p1x - 2.0);
    for (const auto& [a13, pa] :
         {std::pair<double, double>{1.0, p13}, {0.0, 1.0 - p13}})
      tot += px * pa * expit(-0.62 + xc1 + (a13 - p13) + 0.5 * z1);
  }
  return tot;
}

double mean_fixed_a(int scenario, const DtrRegime& d, int a, bool stage2) {
  return mean_fixed_at(scenario, d, a, stage2 ? kTStar + 2 : kTStar - 2);
}

double mean_avg_a(int scenario, const DtrRegime& d, bool stage2) {
  return mean_avg_at(scenario, d, stage2 ? kTStar + 2 : kTStar - 2);
}

bool verify_time_invariance(int scenario) {
  const double tol = 1e-12;
  for (int d1 : {1, -1}) {
    for (int a : {0, 1}) {
      const DtrRegime d{d1, 0};
      const double ref1 = mean_fixed_a(scenario, d, a, false);
      for (int t : {2, 7, 12})
        if (std::abs(mean_fixed_at(scenario, d, a, t) - ref1) > tol) return false;
    }
    for (int d2 : {1, -1}) {
      const DtrRegime d{d1, d2};
      const double refavg = mean_avg_a(scenario, d, true);
      for (int t : {16, 30, 44})
        if (std::abs(mean_avg_at(scenario, d, t) - refavg) > tol) return false;
      for (int a : {0, 1}) {
        const double ref2 = mean_fixed_a(scenario, d, a, true);
        for (int t : {16, 30, 44})
          if (std::abs(mean_fixed_at(scenario, d, a, t) - ref2) > tol)
            return false;
      }
    }
  }
  return true;
}

double true_effect_analytic(int scenario, const std::string& kind, int stage,
                            const DtrRegime& d, const DtrRegime& dp,
                            int a_fixed) {
  if (stage != 1 && stage != 2)
    throw ValidationError("stage must be 1 or 2");
  const bool s2 = stage == 2;
  const DtrRegime dc = canonical(d, stage), dpc = canonical(dp, stage);
  if (kind == "IA")
    return mean_fixed_a(scenario, dc, 1, s2) - mean_fixed_a(scenario, dc, 0, s2);
  if (kind == "AA") {
    double tot = 0.0;
    for (const auto& reg : {DtrRegime{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}) {
      const DtrRegime rc = canonical(reg, stage);
      tot += mean_fixed_a(scenario, rc, 1, s2) - mean_fixed_a(scenario, rc, 0, s2);
    }
    return tot / 4.0;
  }
  if (kind == "AD")
    return mean_avg_a(scenario, dc, s2) - mean_avg_a(scenario, dpc, s2);
  if (kind == "ID") {
    if (a_fixed != 0 && a_fixed != 1)
      throw ValidationError("ID contrast needs a_fixed in {0,1}");
    return mean_fixed_a(scenario, dc, a_fixed, s2) -
           mean_fixed_a(scenario, dpc, a_fixed, s2);
  }
  throw ValidationError("unsupported contrast kind '" + kind + "'");
}

McValue McOracle::run(const DtrRegime& d, int a, int t, bool force_a) {
  const std::array<long, 4> key{d.d1, d.d2, force_a ? a : -9, t};
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;

  SimConfig cfg;
  cfg.scenario = scenario_;
  Accum acc;
  long done = 0, chunk_idx = 0;
  while (done < n_mc_) {
    const long m = std::min(kChunk, n_mc_ - done);
    Rng rng(seed_, stream_tag::kTruthMc,
            pack_stream(scenario_, d, force_a ? a : -9, t, force_a ? 0 : 1,
                        chunk_idx));
    for (long i = 0; i < m; ++i) {
      ForceSpec force;
      force.d1 = d.d1;
      force.d2 = d.d2;
      if (force_a) {
        force.t = t;
        force.a = a;
      }
      const Trajectory tr = simulate_one(cfg, rng, force);
      acc.add(tr.y_next[static_cast<size_t>(t - 1)]);
    }
    done += m;
    ++chunk_idx;
  }
  const McValue out = acc.finish();
  cache_.emplace(key, out);
  return out;
}

McValue McOracle::mean_fixed_a(const DtrRegime& d, int a, int t) {
  return run(d, a, t, true);
}

McValue McOracle::mean_avg_a(const DtrRegime& d, int t) {
  return run(d, 0, t, false);
}

McValue McOracle::effect(const std::string& kind, int stage, const DtrRegime& d,
                         const DtrRegime& dp, int a_fixed) {
  if (stage != 1 && stage != 2)
    throw ValidationError("stage must be 1 or 2");
  const int t = stage == 2 ? kTStar + 2 : kTStar - 2;
  const DtrRegime dc = canonical(d, stage), dpc = canonical(dp, stage);
  McValue out;
  if (kind == "IA") {
    const McValue hi = mean_fixed_a(dc, 1, t), lo = mean_fixed_a(dc, 0, t);
    out.value = hi.value - lo.value;
    out.se = std::hypot(hi.se, lo.se);
    return out;
  }
  if (kind == "AA") {
    // Deduplicate canonical regimes (stage 1 collapses d2) so shared MC
    // batches are not double-counted in the standard error.
    std::map<std::pair<int, int>, int> mult;
    for (const auto& reg : {DtrRegime{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}) {
      const DtrRegime rc = canonical(reg, stage);
      ++mult[{rc.d1, rc.d2}];
    }
    double var = 0.0;
    for (const auto& [key, k] : mult) {
      const DtrRegime rc{key.first, key.second};
      const McValue hi = mean_fixed_a(rc, 1, t), lo = mean_fixed_a(rc, 0, t);
      out.value += k * (hi.value - lo.value) / 4.0;
      var += (k / 4.0) * (k / 4.0) * (hi.se * hi.se + lo.se * lo.se);
    }
    out.se = std::sqrt(var);
    return out;
  }
  if (kind == "AD") {
    const McValue x = mean_avg_a(dc, t), y = mean_avg_a(dpc, t);
    out.value = x.value - y.value;
    out.se = std::hypot(x.se, y.se);
    return out;
  }
  if (kind == "ID") {
    if (a_fixed != 0 && a_fixed != 1)
      throw ValidationError("ID contrast needs a_fixed in {0,1}");
    const McValue x = mean_fixed_a(dc, a_fixed, t), y = mean_fixed_a(dpc, a_fixed, t);
    out.value = x.value - y.value;
    out.se = std::hypot(x.se, y.se);
    return out;
  }
  throw ValidationError("unsupported contrast kind '" + kind + "'");
}

namespace {

McValue ipw_run(int scenario, const DesignSpec& design, const DtrRegime& d,
                int a, int t, bool fixed, long n_sim, std::uint64_t seed) {
  SimConfig cfg;
  cfg.scenario = scenario;
  Accum acc;
  long done = 0, chunk_idx = 0;
  while (done < n_sim) {
    const long m = std::min(kChunk, n_sim - done);
    Rng rng(seed, stream_tag::kTruthMc,
            pack_stream(scenario, d, fixed ? a : -9, t, fixed ? 2 : 3,
                        chunk_idx));
    for (long i = 0; i < m; ++i) {
      const Trajectory tr = simulate_one(cfg, rng);
      const auto consistent = consistent_regimes(tr, design);
      double ws = 0.0;
      for (const auto& reg : consistent)
        if (reg == d) ws = smart_weight(design, tr.z1, tr.r, tr.z2);
      double v = 0.0;
      if (ws > 0.0) {
        const auto u = static_cast<size_t>(t - 1);
        if (fixed) {
          if (tr.a_t[u] == a) {
            const double pa = a == 1 ? tr.p_t[u] : 1.0 - tr.p_t[u];
            v = ws * tr.y_next[u] / pa;
          }
        } else {
          v = ws * tr.y_next[u];
        }
      }
      acc.add(v);
    }
    done += m;
    ++chunk_idx;
  }
  return acc.finish();
}

}  // namespace

McValue ipw_mean_fixed_a(int scenario, const DesignSpec& design,
                         const DtrRegime& d, int a, int t, long n_sim,
                         std::uint64_t seed) {
  return ipw_run(scenario, design, d, a, t, true, n_sim, seed);
}

McValue ipw_mean_avg_a(int scenario, const DesignSpec& design,
                       const DtrRegime& d, int t, long n_sim,
                       std::uint64_t seed) {
  return ipw_run(scenario, design, d, 0, t, false, n_sim, seed);
}

}  // namespace hybrid
