#include "hybrid/baselines.hpp"

namespace hybrid {

namespace {

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

BaselineFit fit_wr(const RowTable& table, bool small_sample) {
  BaselineFit out;
  out.method = "wr";
  const Eigen::Index q = table.M.cols();
  const WlsFit wls = solve_wls(table.M, table.y, table.ws);
  out.coef = wls.coef;
  out.cond = wls.cond;
  Vec resid = table.y - table.M * out.coef;
  out.ee_norm =
      row_scores(table.M, table.ws, resid).colwise().sum().cwiseAbs().maxCoeff();
  if (small_sample) {
    const Mat a = table.M.transpose() * (table.ws.asDiagonal() * table.M);
    md_correct(table.M, table.ws, table.person, a, resid);
  }
  const Mat scores = person_scores(row_scores(table.M, table.ws, resid),
                                   table.person, table.n_persons);
  out.vcov = wls.xtwx_inv * cluster_meat(scores) * wls.xtwx_inv;
  out.df = table.n_persons - static_cast<double>(q);
  if (small_sample)
    out.vcov *= fold_factor(table.n_persons, static_cast<double>(q));
  return out;
}

BaselineFit fit_wcls(const std::vector<Trajectory>& trajs,
                     const DesignSpec& design, const ModelSpec& spec,
                     bool small_sample) {
  if (!spec.finalized)
    throw ValidationError("model spec must be finalized against the data");
  BaselineFit out;
  out.method = "wcls";
  const auto fdim = static_cast<Eigen::Index>(spec.f.size());
  const auto gdim = static_cast<Eigen::Index>(spec.g.size());
  const Eigen::Index q = gdim + fdim;

  Eigen::Index n = 0;
  for (const auto& tr : trajs) n += tr.t_max();
  Mat X(n, q);
  Vec y(n), w(n);
  std::vector<int> person(static_cast<size_t>(n));

  Eigen::Index row = 0;
  for (size_t i = 0; i < trajs.size(); ++i) {
    const auto& tr = trajs[i];
    // Responders keep their stage-1 option, so the delivered second-stage
    // coding is z2 = z1 for them.
    const DtrRegime delivered{tr.z1, tr.r == 1 ? tr.z1 : tr.z2};
    for (int t = 1; t <= tr.t_max(); ++t, ++row) {
      const auto u = static_cast<size_t>(t - 1);
      const bool elig = tr.i_t[u] == 1;
      const double a = elig ? static_cast<double>(tr.a_t[u]) : spec.rho;
      const double p = elig ? tr.p_t[u] : spec.rho;
      const double ac = elig ? a - spec.rho : 0.0;
      if (gdim > 0)
        X.row(row).head(gdim) =
            eval_terms(spec.g, spec, tr, delivered, t, design.t_star).transpose();
      X.row(row).tail(fdim) =
          ac *
          eval_terms(spec.f, spec, tr, delivered, t, design.t_star).transpose();
      y(row) = tr.y_next[u];
      w(row) = mrt_weight(spec.rho, p, elig ? tr.a_t[u] : 0, elig);
      person[static_cast<size_t>(row)] = static_cast<int>(i);
    }
  }

  const WlsFit wls = solve_wls(X, y, w);
  out.coef = wls.coef;
  out.cond = wls.cond;
  Vec resid = y - X * out.coef;
  out.ee_norm = row_scores(X, w, resid).colwise().sum().cwiseAbs().maxCoeff();
  if (small_sample) {
    const Mat a = X.transpose() * (w.asDiagonal() * X);
    md_correct(X, w, person, a, resid);
  }
  const Mat scores = person_scores(row_scores(X, w, resid), person,
                                   static_cast<int>(trajs.size()));
  out.vcov = wls.xtwx_inv * cluster_meat(scores) * wls.xtwx_inv;
  out.df = static_cast<double>(trajs.size()) - static_cast<double>(q);
  if (small_sample)
    out.vcov *= fold_factor(static_cast<double>(trajs.size()),
                            static_cast<double>(q));
  out.beta = out.coef.tail(fdim);
  out.vcov_beta = out.vcov.bottomRightCorner(fdim, fdim);
  return out;
}

}  // namespace hybrid
