#include "hybrid/estimator.hpp"

#include <cmath>

namespace hybrid {

namespace {

// Residual-dof scale and t-vs-normal width ratio folded into the covariance
// matrix, so downstream reporting can keep the fixed 1.959964 multiplier.
double fold_factor(double n_clusters, double q) {
  const double df = n_clusters - q;
  if (df <= 0.0)
    throw NumericalError("small-sample correction needs more clusters than parameters");
  const double t = t_quantile_975(df);
  return (n_clusters / df) * (t / kZ975) * (t / kZ975);
}

Mat row_scores(const Mat& X, const Vec& w, const Vec& resid) {
  return X.array().colwise() * (w.array() * resid.array());
}

}  // namespace

Step1Fit fit_step1(const RowTable& table, const CenteringResult& centering,
                   const FitOptions& opts) {
  Step1Fit s1;
  s1.gdim = table.G.cols();
  s1.fdim = table.F.cols();
  s1.sdim = table.S.cols();
  s1.mdim = table.M.cols();
  const Eigen::Index n = table.n_rows();
  const Eigen::Index q1 = s1.gdim + s1.fdim + s1.sdim + s1.mdim;

  Mat X(n, q1);
  if (s1.gdim > 0) X.leftCols(s1.gdim) = centering.Gc;
  X.middleCols(s1.gdim, s1.fdim) = table.ac.asDiagonal() * table.F;
  if (s1.sdim > 0)
    X.middleCols(s1.gdim + s1.fdim, s1.sdim) = table.ac.asDiagonal() * centering.Sc;
  X.rightCols(s1.mdim) = table.M;

  s1.w1 = (table.ws.array() * table.wm.array()).matrix();
  const WlsFit wls = solve_wls(X, table.y, s1.w1);
  s1.theta = wls.coef;
  s1.cond = wls.cond;
  s1.a1_inv = wls.xtwx_inv;
  s1.alpha0 = s1.theta.segment(0, s1.gdim);
  s1.beta = s1.theta.segment(s1.gdim, s1.fdim);
  s1.alpha1 = s1.theta.segment(s1.gdim + s1.fdim, s1.sdim);
  s1.eta = s1.theta.segment(s1.gdim + s1.fdim + s1.sdim, s1.mdim);
  s1.resid = table.y - X * s1.theta;

  const Mat scores = row_scores(X, s1.w1, s1.resid);
  s1.ee_norm = scores.colwise().sum().cwiseAbs().maxCoeff();
  s1.u1_person = person_scores(scores, table.person, table.n_persons);
  s1.u1_meat_person = s1.u1_person;

  if (opts.step1_meat == Step1Meat::kStacked) {
    // Account for the estimated centering constants: each cell contributes
    // D_c * phi_{c,i} / S_c to person i's effective score, where phi is the
    // person's share of the cell's mean estimating equation.
    for (const auto& cell : centering.g_cells) {
      Vec sum_w1x = Vec::Zero(q1);
      double sum_w1r = 0.0;
      Mat phi = Mat::Zero(table.n_persons, s1.gdim);
      for (int r : cell.rows) {
        sum_w1x += s1.w1(r) * X.row(r).transpose();
        sum_w1r += s1.w1(r) * s1.resid(r);
        phi.row(table.person[static_cast<size_t>(r)]) +=
            table.ws(r) * centering.Gc.row(r);
      }
      Mat D = sum_w1x * s1.alpha0.transpose();
      D.topLeftCorner(s1.gdim, s1.gdim).diagonal().array() -= sum_w1r;
      s1.u1_meat_person += phi * (D / cell.wsum).transpose();
    }
    const double vs = table.rho * (1.0 - table.rho);
    for (const auto& cell : centering.s_cells) {
      Vec sum_w1ax = Vec::Zero(q1);
      double sum_w1ar = 0.0;
      Mat phi = Mat::Zero(table.n_persons, s1.sdim);
      for (int r : cell.rows) {
        sum_w1ax += s1.w1(r) * table.ac(r) * X.row(r).transpose();
        sum_w1ar += s1.w1(r) * table.ac(r) * s1.resid(r);
        phi.row(table.person[static_cast<size_t>(r)]) +=
            table.ws(r) * vs * centering.Sc.row(r);
      }
      Mat D = sum_w1ax * s1.alpha1.transpose();
      D.block(s1.gdim + s1.fdim, 0, s1.sdim, s1.sdim).diagonal().array() -= sum_w1ar;
      s1.u1_meat_person += phi * (D / cell.wsum).transpose();
    }
  }

  s1.vcov = s1.a1_inv * cluster_meat(s1.u1_meat_person) * s1.a1_inv;
  s1.df = table.n_persons - static_cast<double>(q1);
  if (opts.small_sample) s1.vcov *= fold_factor(table.n_persons, static_cast<double>(q1));
  s1.X = std::move(X);
  return s1;
}

Vec predict_yhat(const RowTable& table, const Step1Fit& s1) {
  return table.ac.asDiagonal() * (table.F * s1.beta) + table.M * s1.eta;
}

Step2Fit fit_step2(const RowTable& table, const CenteringResult& centering,
                   const Step1Fit& s1, const FitOptions& opts) {
  Step2Fit s2;
  const Eigen::Index q1 = s1.theta.size();
  const Eigen::Index q2 = table.M.cols();

  Vec y2;
  switch (opts.step2_response) {
    case Step2Response::kAdjusted:
      y2 = table.y;
      if (s1.gdim > 0) y2 -= centering.Gc * s1.alpha0;
      if (s1.sdim > 0) y2 -= table.ac.asDiagonal() * (centering.Sc * s1.alpha1);
      break;
    case Step2Response::kFitted:
      y2 = predict_yhat(table, s1);
      break;
    case Step2Response::kRaw:
      y2 = table.y;
      break;
  }

  const WlsFit wls = solve_wls(table.M, y2, table.ws);
  s2.gamma = wls.coef;
  s2.cond = wls.cond;
  Vec resid2 = y2 - table.M * s2.gamma;
  s2.ee_norm =
      row_scores(table.M, table.ws, resid2).colwise().sum().cwiseAbs().maxCoeff();

  const Mat a2 = table.M.transpose() * (table.ws.asDiagonal() * table.M);
  if (opts.small_sample) md_correct(table.M, table.ws, table.person, a2, resid2);
  const Mat u2_person =
      person_scores(row_scores(table.M, table.ws, resid2), table.person,
                    table.n_persons);

  s2.q = Mat::Zero(q2, q1);
  switch (opts.step2_response) {
    case Step2Response::kAdjusted:
      if (s1.gdim > 0)
        s2.q.leftCols(s1.gdim) =
            -(table.M.transpose() * (table.ws.asDiagonal() * centering.Gc));
      if (s1.sdim > 0)
        s2.q.middleCols(s1.gdim + s1.fdim, s1.sdim) =
            -(table.M.transpose() *
              (table.ws.asDiagonal() * (table.ac.asDiagonal() * centering.Sc)));
      break;
    case Step2Response::kFitted:
      s2.q.middleCols(s1.gdim, s1.fdim) =
          table.M.transpose() *
          (table.ws.asDiagonal() * (table.ac.asDiagonal() * table.F));
      s2.q.rightCols(s1.mdim) =
          table.M.transpose() * (table.ws.asDiagonal() * table.M);
      break;
    case Step2Response::kRaw:
      break;
  }

  const Mat omega = u2_person + s1.u1_person * (s2.q * s1.a1_inv).transpose();
  s2.vcov = wls.xtwx_inv * cluster_meat(omega) * wls.xtwx_inv;
  s2.df = table.n_persons - static_cast<double>(q2);
  if (opts.small_sample) s2.vcov *= fold_factor(table.n_persons, static_cast<double>(q2));
  return s2;
}

FitResult fit_hybrid_rows(const RowTable& table, const FitOptions& opts) {
  FitResult out;
  out.opts = opts;
  out.n_persons = table.n_persons;
  const CenteringResult centering = compute_centering(table, opts.centering);
  out.step1 = fit_step1(table, centering, opts);
  out.step2 = fit_step2(table, centering, out.step1, opts);
  if (opts.centering == Centering::kPooled) {
    if (!centering.g_cells.empty()) {
      out.mu = Mat::Constant(static_cast<Eigen::Index>(table.regimes.size()),
                             table.G.cols(),
                             std::numeric_limits<double>::quiet_NaN());
      for (const auto& cell : centering.g_cells)
        out.mu.row(table.regime_idx[static_cast<size_t>(cell.rows.front())]) =
            cell.mean.transpose();
    }
    if (!centering.s_cells.empty()) out.psi = centering.s_cells[0].mean;
  }

  if (opts.stacked_check) {
    // Explicit joint bread over (theta, gamma); must agree with the
    // composite-score shortcut to numerical precision.
    const Eigen::Index q1 = out.step1.theta.size();
    const Eigen::Index q2 = out.step2.gamma.size();
    Mat bread = Mat::Zero(q1 + q2, q1 + q2);
    const Mat a1 = out.step1.X.transpose() *
                   (out.step1.w1.asDiagonal() * out.step1.X);
    const Mat a2 = table.M.transpose() * (table.ws.asDiagonal() * table.M);
    bread.topLeftCorner(q1, q1) = a1;
    bread.bottomLeftCorner(q2, q1) = -out.step2.q;
    bread.bottomRightCorner(q2, q2) = a2;

    Vec y2 = table.y;
    if (opts.step2_response == Step2Response::kAdjusted) {
      if (out.step1.gdim > 0) y2 -= centering.Gc * out.step1.alpha0;
      if (out.step1.sdim > 0)
        y2 -= table.ac.asDiagonal() * (centering.Sc * out.step1.alpha1);
    } else if (opts.step2_response == Step2Response::kFitted) {
      y2 = predict_yhat(table, out.step1);
    }
    Vec resid2 = y2 - table.M * out.step2.gamma;
    if (opts.small_sample) md_correct(table.M, table.ws, table.person, a2, resid2);
    Mat u(table.n_persons, q1 + q2);
    u.leftCols(q1) = out.step1.u1_person;
    u.rightCols(q2) = person_scores(row_scores(table.M, table.ws, resid2),
                                    table.person, table.n_persons);
    const Mat binv = bread.partialPivLu().solve(Mat::Identity(q1 + q2, q1 + q2));
    Mat vcov = binv * cluster_meat(u) * binv.transpose();
    out.vcov_gamma_joint = vcov.bottomRightCorner(q2, q2);
    if (opts.small_sample)
      out.vcov_gamma_joint *=
          fold_factor(table.n_persons, static_cast<double>(q2));
  }
  return out;
}

FitResult fit_hybrid(const std::vector<Trajectory>& trajs,
                     const DesignSpec& design, ModelSpec spec,
                     const FitOptions& opts) {
  design.validate();
  if (trajs.empty()) throw ValidationError("no trajectories supplied");
  for (const auto& tr : trajs) validate_trajectory(tr, design);
  spec.finalize(trajs);
  const auto report = spec.validate();
  if (!report.empty()) {
    std::string msg = "invalid model spec:";
    for (const auto& line : report) msg += "\n  - " + line;
    throw ValidationError(msg);
  }
  const RowTable table = build_rows(trajs, design, spec);
  FitResult out = fit_hybrid_rows(table, opts);
  out.model_digest = spec.digest();
  out.design_digest = design.digest();
  return out;
}

}  // namespace hybrid
