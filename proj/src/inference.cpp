#include "hybrid/inference.hpp"

#include <cmath>

namespace hybrid {

namespace {

Trajectory profile_traj(const std::optional<CovariateProfile>& profile) {
  Trajectory tr;
  tr.id = "profile";
  if (profile) {
    tr.x0_names = profile->names;
    tr.x0 = profile->values;
  }
  return tr;
}

void check_stage2_contrast(int t, int t_star, const DtrRegime& d,
                           const DtrRegime& dp) {
  if (d.d1 == dp.d1 && d.d2 != dp.d2 && t < t_star)
    throw ValidationError(
        "regimes differing only in the stage-2 option coincide before the "
        "re-randomization point; contrast at t=" +
        std::to_string(t) + " is undefined");
}

Contrast finish(Contrast c, const Mat& vcov) {
  const double var = c.gradient.transpose() * vcov * c.gradient;
  if (var < -1e-12) throw NumericalError("negative variance in contrast");
  c.se = std::sqrt(std::max(var, 0.0));
  c.lo = c.estimate - kZ975 * c.se;
  c.hi = c.estimate + kZ975 * c.se;
  return c;
}

}  // namespace

Contrast contrast_fixed_a(const FitResult& fit, const ModelSpec& spec,
                          int t_star, const DtrRegime& d, const DtrRegime& dp,
                          int a, int t, const std::string& label,
                          const std::optional<CovariateProfile>& profile) {
  if (a != 0 && a != 1)
    throw ValidationError("fixed treatment level must be 0 or 1");
  check_stage2_contrast(t, t_star, d, dp);
  const Trajectory tr = profile_traj(profile);
  const Vec df = eval_terms(spec.f, spec, tr, d, t, t_star) -
                 eval_terms(spec.f, spec, tr, dp, t, t_star);
  const Vec dm = eval_terms(spec.m, spec, tr, d, t, t_star) -
                 eval_terms(spec.m, spec, tr, dp, t, t_star);
  const auto& s1 = fit.step1;
  Contrast c;
  c.label = label;
  c.kind = "ID";
  c.gradient = Vec::Zero(s1.theta.size());
  c.gradient.segment(s1.gdim, s1.fdim) = (a - spec.rho) * df;
  c.gradient.segment(s1.gdim + s1.fdim + s1.sdim, s1.mdim) = dm;
  c.estimate = (a - spec.rho) * df.dot(s1.beta) + dm.dot(s1.eta);
  return finish(std::move(c), s1.vcov);
}

Contrast contrast_immediate(const FitResult& fit, const ModelSpec& spec,
                            int t_star, const DtrRegime& d, int t,
                            const std::string& label,
                            const std::optional<CovariateProfile>& profile) {
  const Trajectory tr = profile_traj(profile);
  const Vec f = eval_terms(spec.f, spec, tr, d, t, t_star);
  const auto& s1 = fit.step1;
  Contrast c;
  c.label = label;
  c.kind = "IA";
  c.gradient = Vec::Zero(s1.theta.size());
  c.gradient.segment(s1.gdim, s1.fdim) = f;
  c.estimate = f.dot(s1.beta);
  return finish(std::move(c), s1.vcov);
}

Contrast contrast_immediate_avg(const FitResult& fit, const ModelSpec& spec,
                                int t_star, const std::vector<DtrRegime>& regimes,
                                int t, const std::string& label,
                                const std::optional<CovariateProfile>& profile) {
  if (regimes.empty()) throw ValidationError("no regimes to average over");
  const Trajectory tr = profile_traj(profile);
  Vec f = Vec::Zero(static_cast<Eigen::Index>(spec.f.size()));
  for (const auto& d : regimes) f += eval_terms(spec.f, spec, tr, d, t, t_star);
  f /= static_cast<double>(regimes.size());
  const auto& s1 = fit.step1;
  Contrast c;
  c.label = label;
  c.kind = "AA";
  c.gradient = Vec::Zero(s1.theta.size());
  c.gradient.segment(s1.gdim, s1.fdim) = f;
  c.estimate = f.dot(s1.beta);
  return finish(std::move(c), s1.vcov);
}

Contrast contrast_averaged(const FitResult& fit, const ModelSpec& spec,
                           int t_star, const DtrRegime& d, const DtrRegime& dp,
                           int t, const std::string& label,
                           const std::optional<CovariateProfile>& profile) {
  check_stage2_contrast(t, t_star, d, dp);
  const Trajectory tr = profile_traj(profile);
  const Vec dm = eval_terms(spec.m, spec, tr, d, t, t_star) -
                 eval_terms(spec.m, spec, tr, dp, t, t_star);
  Contrast c;
  c.label = label;
  c.kind = "AD";
  c.gradient = dm;
  c.estimate = dm.dot(fit.step2.gamma);
  return finish(std::move(c), fit.step2.vcov);
}

}  // namespace hybrid
