#pragma once

#include <optional>
#include <string>

#include "hybrid/estimator.hpp"

namespace hybrid {

struct Contrast {
  std::string label;
  std::string kind;  // "ID", "IA", "AA", or "AD"
  double estimate = 0.0;
  double se = 0.0;
  double lo = 0.0;  // estimate - 1.959964 * se
  double hi = 0.0;
  Vec gradient;     // w.r.t. theta (ID/IA/AA) or gamma (AD)
};

// Baseline-covariate profile for models whose f/m reference x0(...) atoms.
struct CovariateProfile {
  std::vector<std::string> names;
  Vec values;
};

// ID: fixed-treatment DTR contrast at decision point t,
//     (a - rho) * (f(d) - f(d'))' beta + (m(d) - m(d'))' eta.
Contrast contrast_fixed_a(const FitResult& fit, const ModelSpec& spec,
                          int t_star, const DtrRegime& d, const DtrRegime& dp,
                          int a, int t, const std::string& label,
                          const std::optional<CovariateProfile>& profile = {});

// IA: within-regime proximal effect of A_t, f(d)' beta.
Contrast contrast_immediate(const FitResult& fit, const ModelSpec& spec,
                            int t_star, const DtrRegime& d, int t,
                            const std::string& label,
                            const std::optional<CovariateProfile>& profile = {});

// AA: proximal effect of A_t averaged over the embedded regimes.
Contrast contrast_immediate_avg(const FitResult& fit, const ModelSpec& spec,
                                int t_star, const std::vector<DtrRegime>& regimes,
                                int t, const std::string& label,
                                const std::optional<CovariateProfile>& profile = {});

// AD: treatment-averaged DTR contrast, (m(d) - m(d'))' gamma.
Contrast contrast_averaged(const FitResult& fit, const ModelSpec& spec,
                           int t_star, const DtrRegime& d, const DtrRegime& dp,
                           int t, const std::string& label,
                           const std::optional<CovariateProfile>& profile = {});

}  // namespace hybrid
