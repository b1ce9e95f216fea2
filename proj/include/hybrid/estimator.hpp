#pragma once

#include <string>

#include "hybrid/design_weights.hpp"
#include "hybrid/linalg.hpp"

namespace hybrid {

enum class Step2Response { kAdjusted, kFitted, kRaw };
enum class Step1Meat { kStacked, kPlugin };

struct FitOptions {
  Step2Response step2_response = Step2Response::kAdjusted;
  Centering centering = Centering::kPooled;
  Step1Meat step1_meat = Step1Meat::kStacked;
  bool small_sample = false;   // Mancl-DeRouen + dof/t inflation, folded into SE
  bool stacked_check = false;  // also compute vcov_gamma via the joint bread
};

struct Step1Fit {
  Vec theta;                    // (alpha0, beta, alpha1, eta)
  Vec alpha0, beta, alpha1, eta;
  Mat X;                        // replicated-row design [Gc | acF | acSc | M]
  Vec w1;                       // ws .* wm
  Vec resid;
  Mat a1_inv;                   // (X' W1 X)^{-1}
  Mat u1_person;                // plain per-person scores
  Mat u1_meat_person;           // scores used in the meat (stacked or plain)
  Mat vcov;                     // sandwich for theta
  double cond = 0.0;
  double df = 0.0;
  double ee_norm = 0.0;         // max |sum of estimating equations|
  Eigen::Index gdim = 0, fdim = 0, sdim = 0, mdim = 0;
};

struct Step2Fit {
  Vec gamma;
  Mat q;        // dU2/dtheta'
  Mat vcov;
  double cond = 0.0;
  double df = 0.0;
  double ee_norm = 0.0;
};

struct FitResult {
  Step1Fit step1;
  Step2Fit step2;
  Mat vcov_gamma_joint;  // filled only when opts.stacked_check
  Mat mu;                // per-regime centering means (empty under per-time)
  Vec psi;               // pooled auxiliary mean
  int n_persons = 0;
  FitOptions opts;
  std::string model_digest;
  std::string design_digest;
};

Step1Fit fit_step1(const RowTable& table, const CenteringResult& centering,
                   const FitOptions& opts);

// Step-2 working response under the 'fitted' mode: ac*F*beta + M*eta.
Vec predict_yhat(const RowTable& table, const Step1Fit& s1);

Step2Fit fit_step2(const RowTable& table, const CenteringResult& centering,
                   const Step1Fit& s1, const FitOptions& opts);

FitResult fit_hybrid(const std::vector<Trajectory>& trajs,
                     const DesignSpec& design, ModelSpec spec,
                     const FitOptions& opts);

FitResult fit_hybrid_rows(const RowTable& table, const FitOptions& opts);

}  // namespace hybrid
