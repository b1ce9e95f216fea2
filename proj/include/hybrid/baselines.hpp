#pragma once

#include <string>

#include "hybrid/design_weights.hpp"
#include "hybrid/linalg.hpp"

namespace hybrid {

struct BaselineFit {
  std::string method;  // "wr" or "wcls"
  Vec coef;            // full coefficient vector
  Mat vcov;            // full sandwich covariance
  Vec beta;            // wcls: treatment-block coefficients (empty for wr)
  Mat vcov_beta;       // wcls: treatment-block covariance
  double df = 0.0;
  double cond = 0.0;
  double ee_norm = 0.0;
};

// Weighted-and-replicated marginal regression: ws-weighted LS of the raw
// response on m over the replicated rows, cluster-robust by person.
BaselineFit fit_wr(const RowTable& table, bool small_sample);

// Weighted-centered least squares on unreplicated person rows. Responders are
// coded as continuing their stage-1 option (delivered z2 = z1); g enters
// uncentered and the treatment block is (a - rho) f.
BaselineFit fit_wcls(const std::vector<Trajectory>& trajs,
                     const DesignSpec& design, const ModelSpec& spec,
                     bool small_sample);

}  // namespace hybrid
