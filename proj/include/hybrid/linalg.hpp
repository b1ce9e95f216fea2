#pragma once

#include <vector>

#include "hybrid/common.hpp"

namespace hybrid {

inline constexpr double kZ975 = 1.959964;

struct WlsFit {
  Vec coef;
  Mat xtwx_inv;  // (X' W X)^{-1}, the bread factor
  double cond = 0.0;
  Eigen::Index rank = 0;
};

// Weighted least squares via column-pivoted Householder QR on sqrt(w)-scaled
// rows. Throws NumericalError on rank deficiency.
WlsFit solve_wls(const Mat& X, const Vec& y, const Vec& w);

// Sum per-row score vectors into per-person scores (clusters are persons).
Mat person_scores(const Mat& row_scores, const std::vector<int>& person,
                  int n_persons);

// Sum of outer products of per-person scores.
Mat cluster_meat(const Mat& scores);

// Mancl-DeRouen leverage correction: replace each cluster's residuals r_i by
// (I - H_ii)^{-1} r_i where H_ii = X_i (X'WX)^{-1} X_i' W_i, computed via the
// Woodbury identity so cost stays O(rows * p^2). `xtwx` is X'WX (not its
// inverse); `person` must be grouped (rows of one person contiguous).
void md_correct(const Mat& X, const Vec& w, const std::vector<int>& person,
                const Mat& xtwx, Vec& resid);

double t_quantile_975(double df);

}  // namespace hybrid
