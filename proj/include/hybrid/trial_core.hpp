#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybrid/common.hpp"

namespace hybrid {

enum class SmartVariant { I, II, III };

struct DtrRegime {
  int d1 = 1;  // in {-1, 1}
  int d2 = 1;  // in {-1, 1}
  bool operator==(const DtrRegime&) const = default;
};

// Randomization laws of the trial design. Probabilities are known by design
// (no estimation of treatment propensities anywhere downstream).
struct DesignSpec {
  SmartVariant smart_variant = SmartVariant::II;
  int t_star = 14;
  int t_max = 50;
  double p_z1 = 0.5;
  // p_z2_given_r[r] maps z2 in {-1, 0, 1} to its probability.
  std::map<int, std::map<int, double>> p_z2_given_r = {
      {0, {{1, 0.5}, {-1, 0.5}}},
      {1, {{0, 1.0}}}};
  double rho = 0.5;

  void validate() const;
  std::string digest() const;
};

struct Trajectory {
  std::string id;
  std::vector<std::string> x0_names;
  Vec x0;
  int z1 = 1;
  int r = 0;
  int z2 = 0;  // 0 before Stage 2 and for responders under variant II
  // Per decision point t = 1..T (0-based storage index t-1).
  std::vector<std::string> x_names;
  Mat x;             // T x n_x state covariates
  std::vector<int> i_t;      // eligibility
  std::vector<int> a_t;      // -1 sentinel when not randomized (i_t = 0)
  std::vector<double> p_t;   // NaN when not randomized
  std::vector<double> y_next;

  int t_max() const { return static_cast<int>(y_next.size()); }
};

inline constexpr int kNotRandomized = -1;

std::vector<DtrRegime> enumerate_regimes(const DesignSpec& design);
std::vector<DtrRegime> consistent_regimes(const Trajectory& traj,
                                          const DesignSpec& design);

void validate_trajectory(const Trajectory& traj, const DesignSpec& design);

// Long-format CSV: id,t,x0_*,z1,r,z2,x_*,i,a,p,y_next. `a` empty iff i=0.
std::vector<Trajectory> ingest_csv(const std::string& path);
void emit_csv(const std::vector<Trajectory>& trajs, const std::string& path);

}  // namespace hybrid
