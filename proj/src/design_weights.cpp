#include "hybrid/design_weights.hpp"

#include <map>

namespace hybrid {

double smart_weight(const DesignSpec& design, int z1, int r, int z2) {
  const double pz1 = z1 == 1 ? design.p_z1 : 1.0 - design.p_z1;
  const auto& law = design.p_z2_given_r.at(r);
  auto it = law.find(z2);
  if (it == law.end() || it->second <= 0.0)
    throw ValidationError("observed z2 has zero design probability");
  return 1.0 / (pz1 * it->second);
}

double mrt_weight(double rho, double p, int a, bool elig) {
  if (!elig) return 1.0;
  return a == 1 ? rho / p : (1.0 - rho) / (1.0 - p);
}

RowTable build_rows(const std::vector<Trajectory>& trajs,
                    const DesignSpec& design, const ModelSpec& spec) {
  if (!spec.finalized)
    throw ValidationError("model spec must be finalized against the data");
  RowTable tab;
  tab.regimes = enumerate_regimes(design);
  tab.n_persons = static_cast<int>(trajs.size());
  tab.t_star = design.t_star;
  tab.rho = spec.rho;

  Eigen::Index n = 0;
  for (const auto& tr : trajs)
    n += static_cast<Eigen::Index>(consistent_regimes(tr, design).size()) *
         tr.t_max();
  const auto fdim = static_cast<Eigen::Index>(spec.f.size());
  const auto mdim = static_cast<Eigen::Index>(spec.m.size());
  const auto gdim = static_cast<Eigen::Index>(spec.g.size());
  const auto sdim = static_cast<Eigen::Index>(spec.s.size());
  tab.person.resize(static_cast<size_t>(n));
  tab.person_id.resize(static_cast<size_t>(n));
  tab.t.resize(static_cast<size_t>(n));
  tab.regime_idx.resize(static_cast<size_t>(n));
  tab.elig.resize(static_cast<size_t>(n));
  tab.ws.resize(n);
  tab.wm.resize(n);
  tab.a.resize(n);
  tab.ac.resize(n);
  tab.p.resize(n);
  tab.y.resize(n);
  tab.F.resize(n, fdim);
  tab.M.resize(n, mdim);
  tab.G.resize(n, gdim);
  tab.S.resize(n, sdim);

  Eigen::Index row = 0;
  for (size_t i = 0; i < trajs.size(); ++i) {
    const auto& tr = trajs[i];
    const auto consistent = consistent_regimes(tr, design);
    const double ws = smart_weight(design, tr.z1, tr.r, tr.z2);
    for (const auto& d : consistent) {
      int didx = -1;
      for (size_t k = 0; k < tab.regimes.size(); ++k)
        if (tab.regimes[k] == d) didx = static_cast<int>(k);
      for (int t = 1; t <= tr.t_max(); ++t, ++row) {
        const auto u = static_cast<size_t>(t - 1);
        const bool elig = tr.i_t[u] == 1;
        const Features feat = build_features(spec, tr, d, t, design.t_star);
        tab.person[static_cast<size_t>(row)] = static_cast<int>(i);
        tab.person_id[static_cast<size_t>(row)] = tr.id;
        tab.t[static_cast<size_t>(row)] = t;
        tab.regime_idx[static_cast<size_t>(row)] = didx;
        tab.elig[static_cast<size_t>(row)] = elig ? 1 : 0;
        tab.ws(row) = ws;
        const double a = elig ? static_cast<double>(tr.a_t[u]) : spec.rho;
        const double p = elig ? tr.p_t[u] : spec.rho;
        tab.a(row) = a;
        tab.ac(row) = elig ? a - spec.rho : 0.0;
        tab.p(row) = p;
        tab.wm(row) = mrt_weight(spec.rho, p, elig ? tr.a_t[u] : 0, elig);
        tab.y(row) = tr.y_next[u];
        tab.F.row(row) = feat.f.transpose();
        tab.M.row(row) = feat.m.transpose();
        tab.G.row(row) = feat.g.transpose();
        tab.S.row(row) = feat.s.transpose();
      }
    }
  }
  return tab;
}

namespace {

CenteringResult center_block(const RowTable& table, Centering mode) {
  CenteringResult out;
  out.Gc = table.G;
  out.Sc = table.S;
  const Eigen::Index n = table.n_rows();
  out.g_cell_of_row.assign(static_cast<size_t>(n), -1);
  out.s_cell_of_row.assign(static_cast<size_t>(n), -1);

  auto assign_cells = [&](bool g_block) {
    auto& cells = g_block ? out.g_cells : out.s_cells;
    auto& of_row = g_block ? out.g_cell_of_row : out.s_cell_of_row;
    const Mat& block = g_block ? table.G : table.S;
    if (block.cols() == 0) return;
    std::map<std::pair<int, int>, int> key_to_cell;
    for (Eigen::Index r = 0; r < n; ++r) {
      // g centers within regime (pooled over t, or per (t, regime)); the
      // auxiliary psi block pools across regimes by definition.
      const int regime = table.regime_idx[static_cast<size_t>(r)];
      const std::pair<int, int> key =
          mode == Centering::kPerTime
              ? std::make_pair(table.t[static_cast<size_t>(r)], regime)
              : std::make_pair(0, g_block ? regime : 0);
      auto [it, inserted] = key_to_cell.emplace(key, static_cast<int>(cells.size()));
      if (inserted) cells.push_back(CellInfo{});
      const int c = it->second;
      const double w = g_block
                           ? table.ws(r)
                           : table.ws(r) * table.rho * (1.0 - table.rho);
      auto& cell = cells[static_cast<size_t>(c)];
      if (cell.mean.size() == 0) cell.mean = Vec::Zero(block.cols());
      cell.rows.push_back(static_cast<int>(r));
      cell.wsum += w;
      cell.mean += w * block.row(r).transpose();
      of_row[static_cast<size_t>(r)] = c;
    }
    for (auto& cell : cells) {
      if (cell.wsum <= 0.0) throw NumericalError("empty centering cell");
      cell.mean /= cell.wsum;
    }
    Mat& centered = g_block ? out.Gc : out.Sc;
    for (Eigen::Index r = 0; r < n; ++r) {
      const int c = of_row[static_cast<size_t>(r)];
      if (c >= 0) centered.row(r) -= cells[static_cast<size_t>(c)].mean.transpose();
    }
  };
  assign_cells(true);
  assign_cells(false);
  return out;
}

}  // namespace

CenteringResult compute_centering(const RowTable& table, Centering mode) {
  return center_block(table, mode);
}

Mat compute_mu(const RowTable& table) {
  const auto n_regimes = static_cast<Eigen::Index>(table.regimes.size());
  if (table.G.cols() == 0) return Mat(n_regimes, 0);
  const auto res = compute_centering(table, Centering::kPooled);
  Mat mu = Mat::Constant(n_regimes, table.G.cols(),
                         std::numeric_limits<double>::quiet_NaN());
  for (const auto& cell : res.g_cells) {
    const int regime = table.regime_idx[static_cast<size_t>(cell.rows.front())];
    mu.row(regime) = cell.mean.transpose();
  }
  if (mu.hasNaN())
    throw NumericalError("a regime carries no replicated rows");
  return mu;
}

Vec compute_psi(const RowTable& table) {
  if (table.S.cols() == 0) return Vec(0);
  const auto res = compute_centering(table, Centering::kPooled);
  return res.s_cells.at(0).mean;
}

}  // namespace hybrid
