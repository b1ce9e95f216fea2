#pragma once

#include <vector>

#include "hybrid/common.hpp"
#include "hybrid/model_spec.hpp"
#include "hybrid/trial_core.hpp"

namespace hybrid {

// Inverse design-probability weight for one replicated (person, regime) pair:
// 1 / (P(Z1=z1) * P(Z2=z2 | R=r)). Under the restricted two-stage design this
// is 2 for responders and 4 for non-responders with balanced randomization.
double smart_weight(const DesignSpec& design, int z1, int r, int z2);

// Per-decision-point weight rho^a (1-rho)^(1-a) / p^a (1-p)^(1-a); ineligible
// points get weight 1 and a centered treatment of exactly zero.
double mrt_weight(double rho, double p, int a, bool elig);

// Replicated row table: one row per (person, consistent regime, decision
// point), stored struct-of-arrays with per-row feature blocks.
struct RowTable {
  std::vector<int> person;             // dense 0-based person index
  std::vector<std::string> person_id;  // original id, echoed in diagnostics
  std::vector<int> t;           // 1-based decision point
  std::vector<int> regime_idx;  // index into `regimes`
  std::vector<char> elig;
  Vec ws;  // smart (design) weight
  Vec wm;  // mrt (treatment) weight
  Vec a;   // observed treatment, rho when ineligible
  Vec ac;  // a - rho (exactly 0 when ineligible)
  Vec p;   // randomization probability actually used
  Vec y;   // proximal response Y_{t+1}
  Mat F, M, G, S;

  std::vector<DtrRegime> regimes;
  int n_persons = 0;
  int t_star = 14;
  double rho = 0.5;

  Eigen::Index n_rows() const { return ws.size(); }
};

RowTable build_rows(const std::vector<Trajectory>& trajs,
                    const DesignSpec& design, const ModelSpec& spec);

enum class Centering { kPooled, kPerTime };

struct CellInfo {
  std::vector<int> rows;  // replicated-row indices in the cell
  double wsum = 0.0;      // sum of centering weights over the cell
  Vec mean;               // weighted mean of the centered block
};

struct CenteringResult {
  Mat Gc, Sc;                         // centered copies of table.G / table.S
  std::vector<CellInfo> g_cells, s_cells;
  std::vector<int> g_cell_of_row, s_cell_of_row;  // -1 when not in any cell
};

// g cells weight rows by ws and center within regime (kPooled: one cell per
// regime pooled over t; kPerTime: one cell per (t, regime)). s cells weight
// every row by ws*rho*(1-rho) and pool across regimes under kPooled.
CenteringResult compute_centering(const RowTable& table, Centering mode);

// Default centering constants: mu has one row per regime (order of
// table.regimes); psi is the pooled auxiliary mean.
Mat compute_mu(const RowTable& table);
Vec compute_psi(const RowTable& table);

}  // namespace hybrid
