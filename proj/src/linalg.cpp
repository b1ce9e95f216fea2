#include "hybrid/linalg.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

namespace hybrid {

WlsFit solve_wls(const Mat& X, const Vec& y, const Vec& w) {
  const Eigen::Index p = X.cols();
  if (X.rows() != y.size() || X.rows() != w.size())
    throw ValidationError("solve_wls: dimension mismatch");
  if ((w.array() < 0.0).any())
    throw ValidationError("solve_wls: negative weight");
  const Vec sw = w.array().sqrt();
  const Mat Xw = sw.asDiagonal() * X;
  const Vec yw = sw.asDiagonal() * y;

  Eigen::ColPivHouseholderQR<Mat> qr(Xw);
  if (qr.rank() < p)
    throw NumericalError("design matrix is rank-deficient (rank " +
                         std::to_string(qr.rank()) + " of " + std::to_string(p) +
                         " columns)");
  WlsFit fit;
  fit.rank = qr.rank();
  fit.coef = qr.solve(yw);

  const Mat R = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < p; ++j) {
    const double d = std::abs(R(j, j));
    dmax = std::max(dmax, d);
    dmin = std::min(dmin, d);
  }
  fit.cond = dmin > 0.0 ? dmax / dmin : std::numeric_limits<double>::infinity();

  // (X'WX)^{-1} = P R^{-1} R^{-T} P' using the pivoted factor X_w P = Q R.
  const Mat Rinv = R.template triangularView<Eigen::Upper>().solve(Mat::Identity(p, p));
  const Mat core = Rinv * Rinv.transpose();
  const auto perm = qr.colsPermutation();
  fit.xtwx_inv = perm * core * perm.transpose();
  return fit;
}

Mat person_scores(const Mat& row_scores, const std::vector<int>& person,
                  int n_persons) {
  Mat out = Mat::Zero(n_persons, row_scores.cols());
  for (Eigen::Index r = 0; r < row_scores.rows(); ++r)
    out.row(person[static_cast<size_t>(r)]) += row_scores.row(r);
  return out;
}

Mat cluster_meat(const Mat& scores) { return scores.transpose() * scores; }

void md_correct(const Mat& X, const Vec& w, const std::vector<int>& person,
                const Mat& xtwx, Vec& resid) {
  const Eigen::Index n = X.rows();
  Eigen::Index lo = 0;
  while (lo < n) {
    Eigen::Index hi = lo;
    while (hi < n && person[static_cast<size_t>(hi)] == person[static_cast<size_t>(lo)])
      ++hi;
    const Eigen::Index ni = hi - lo;
    const Mat Xi = X.middleRows(lo, ni);
    const Vec wi = w.segment(lo, ni);
    const Mat XiW = wi.asDiagonal() * Xi;           // W_i X_i
    const Mat Bi = Xi.transpose() * XiW;            // X_i' W_i X_i
    const Vec u = XiW.transpose() * resid.segment(lo, ni);  // X_i' W_i r_i
    Eigen::LDLT<Mat> ldlt(xtwx - Bi);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("leverage correction failed: singular cluster block");
    resid.segment(lo, ni) += Xi * ldlt.solve(u);
    lo = hi;
  }
}

double t_quantile_975(double df) {
  if (df <= 0.0) throw ValidationError("t quantile needs positive df");
  boost::math::students_t dist(df);
  return boost::math::quantile(dist, 0.975);
}

}  // namespace hybrid
