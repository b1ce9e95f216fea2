#include "hybrid/trial_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "hybrid/csv.hpp"

namespace hybrid {

void DesignSpec::validate() const {
  if (smart_variant == SmartVariant::III)
    throw ValidationError(
        "SMART variant III (responders-only continuation) is not supported");
  if (!(p_z1 > 0.0 && p_z1 < 1.0))
    throw ValidationError("p_z1 must lie strictly in (0,1)");
  if (!(rho > 0.0 && rho < 1.0))
    throw ValidationError("rho must lie strictly in (0,1)");
  if (t_star < 1 || t_star > t_max)
    throw ValidationError("t_star must satisfy 1 <= t_star <= t_max");
  for (const auto& [r, law] : p_z2_given_r) {
    double total = 0.0;
    for (const auto& [z2, p] : law) {
      if (z2 != -1 && z2 != 0 && z2 != 1)
        throw ValidationError("p_z2_given_r keys must be in {-1,0,1}");
      if (p < 0.0 || p > 1.0) throw ValidationError("invalid z2 probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw ValidationError("p_z2_given_r row for r=" + std::to_string(r) +
                            " must sum to 1");
  }
  if (smart_variant == SmartVariant::II) {
    auto r1 = p_z2_given_r.find(1);
    if (r1 == p_z2_given_r.end() || r1->second.count(0) == 0 ||
        std::abs(r1->second.at(0) - 1.0) > 1e-12)
      throw ValidationError(
          "variant II requires P(Z2=0 | R=1) = 1 (responders not re-randomized)");
    auto r0 = p_z2_given_r.find(0);
    if (r0 != p_z2_given_r.end() && r0->second.count(0) &&
        r0->second.at(0) > 0.0)
      throw ValidationError("variant II requires P(Z2=0 | R=0) = 0");
  }
}

std::string DesignSpec::digest() const {
  std::ostringstream os;
  os << static_cast<int>(smart_variant) << '|' << t_star << '|' << t_max << '|'
     << csv::num(p_z1) << '|' << csv::num(rho);
  for (const auto& [r, law] : p_z2_given_r)
    for (const auto& [z2, p] : law) os << '|' << r << ':' << z2 << ':' << csv::num(p);
  return digest64(os.str());
}

std::vector<DtrRegime> enumerate_regimes(const DesignSpec& design) {
  design.validate();
  // Deterministic order: d1 descending, then d2 descending.
  return {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
}

std::vector<DtrRegime> consistent_regimes(const Trajectory& traj,
                                          const DesignSpec& design) {
  validate_trajectory(traj, design);
  std::vector<DtrRegime> out;
  for (const DtrRegime& d : enumerate_regimes(design)) {
    if (traj.z1 != d.d1) continue;
    if (design.smart_variant == SmartVariant::I) {
      // Full factorial: everyone re-randomized, z2 is a true regime draw.
      if (traj.z2 == d.d2) out.push_back(d);
    } else {
      // Variant II: responders are consistent with both continuations.
      if (traj.r == 1 || traj.z2 == d.d2) out.push_back(d);
    }
  }
  return out;
}

void validate_trajectory(const Trajectory& traj, const DesignSpec& design) {
  const int T = traj.t_max();
  if (static_cast<int>(traj.i_t.size()) != T ||
      static_cast<int>(traj.a_t.size()) != T ||
      static_cast<int>(traj.p_t.size()) != T)
    throw ValidationError("trajectory " + traj.id + ": ragged per-time arrays");
  if (traj.z1 != 1 && traj.z1 != -1)
    throw ValidationError("trajectory " + traj.id + ": z1 must be +/-1");
  if (traj.z2 != -1 && traj.z2 != 0 && traj.z2 != 1)
    throw ValidationError("trajectory " + traj.id + ": z2 must be in {-1,0,1}");
  if (design.smart_variant == SmartVariant::II && traj.r == 1 && traj.z2 != 0)
    throw ValidationError("trajectory " + traj.id +
                          ": responder must have z2=0 under variant II");
  if (design.smart_variant != SmartVariant::I && traj.r == 0 && traj.z2 == 0)
    throw ValidationError("trajectory " + traj.id +
                          ": non-responder must carry an assigned z2");
  for (int t = 0; t < T; ++t) {
    const bool elig = traj.i_t[t] == 1;
    if (elig != (traj.a_t[t] != kNotRandomized))
      throw ValidationError("trajectory " + traj.id + ", t=" +
                            std::to_string(t + 1) +
                            ": a must be present exactly when i=1");
    if (elig) {
      if (!(traj.p_t[t] > 0.0 && traj.p_t[t] < 1.0))
        throw ValidationError("positivity violated at id=" + traj.id +
                              ",t=" + std::to_string(t + 1));
      if (traj.a_t[t] != 0 && traj.a_t[t] != 1)
        throw ValidationError("trajectory " + traj.id + ": a must be 0/1");
    }
  }
}

namespace {

int find_col(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end())
    throw ValidationError("missing mandatory column '" + name + "'");
  return static_cast<int>(it - header.begin());
}

}  // namespace

std::vector<Trajectory> ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open data file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty data file: " + path);
  const auto header = csv::split(line);

  const int c_id = find_col(header, "id");
  const int c_t = find_col(header, "t");
  const int c_z1 = find_col(header, "z1");
  const int c_r = find_col(header, "r");
  const int c_z2 = find_col(header, "z2");
  const int c_i = find_col(header, "i");
  const int c_a = find_col(header, "a");
  const int c_p = find_col(header, "p");
  const int c_y = find_col(header, "y_next");
  std::vector<int> c_x0, c_x;
  std::vector<std::string> x0_names, x_names;
  for (int j = 0; j < static_cast<int>(header.size()); ++j) {
    if (header[j].rfind("x0_", 0) == 0) {
      c_x0.push_back(j);
      x0_names.push_back(header[j].substr(3));
    } else if (header[j].rfind("x_", 0) == 0) {
      c_x.push_back(j);
      x_names.push_back(header[j].substr(2));
    }
  }

  // Preserve first-appearance order of ids: person index = file order.
  std::vector<Trajectory> out;
  std::map<std::string, std::size_t> index;
  std::set<std::pair<std::string, long>> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != header.size())
      throw ValidationError("row " + std::to_string(lineno) +
                            ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(f.size()));
    const std::string where = "row " + std::to_string(lineno);
    const std::string id = f[c_id];
    const long t = csv::parse_long(f[c_t], where);
    if (!seen.insert({id, t}).second)
      throw ValidationError(where + ": duplicate (id,t) = (" + id + "," +
                            std::to_string(t) + ")");
    auto [it, fresh] = index.try_emplace(id, out.size());
    if (fresh) {
      out.emplace_back();
      out.back().id = id;
      out.back().x0_names = x0_names;
      out.back().x_names = x_names;
      out.back().x0 = Vec::Zero(static_cast<int>(c_x0.size()));
      for (std::size_t k = 0; k < c_x0.size(); ++k)
        out.back().x0[static_cast<int>(k)] = csv::parse_double(f[c_x0[k]], where);
    }
    Trajectory& tr = out[it->second];
    const long expected_t = tr.t_max() + 1;
    if (t != expected_t)
      throw ValidationError(where + ": non-monotone t for id=" + id +
                            " (expected " + std::to_string(expected_t) + ")");
    tr.z1 = static_cast<int>(csv::parse_long(f[c_z1], where));
    tr.r = static_cast<int>(csv::parse_long(f[c_r], where));
    tr.z2 = static_cast<int>(csv::parse_long(f[c_z2], where));
    const int elig = static_cast<int>(csv::parse_long(f[c_i], where));
    tr.i_t.push_back(elig);
    if (f[c_a].empty()) {
      if (elig != 0)
        throw ValidationError(where + ": empty a requires i=0");
      tr.a_t.push_back(kNotRandomized);
      tr.p_t.push_back(std::nan(""));
    } else {
      if (elig != 1)
        throw ValidationError(where + ": a present requires i=1");
      tr.a_t.push_back(static_cast<int>(csv::parse_long(f[c_a], where)));
      const double p = csv::parse_double(f[c_p], where);
      if (!(p > 0.0 && p < 1.0))
        throw ValidationError("positivity violated at id=" + id +
                              ",t=" + std::to_string(t));
      tr.p_t.push_back(p);
    }
    tr.y_next.push_back(csv::parse_double(f[c_y], where));
    tr.x.conservativeResize(tr.t_max(), static_cast<int>(c_x.size()));
    for (std::size_t k = 0; k < c_x.size(); ++k)
      tr.x(tr.t_max() - 1, static_cast<int>(k)) = csv::parse_double(f[c_x[k]], where);
  }
  return out;
}

void emit_csv(const std::vector<Trajectory>& trajs, const std::string& path) {
  std::ofstream outf(path);
  if (!outf) throw ValidationError("cannot open output file: " + path);
  outf << "id,t";
  const auto& x0n = trajs.empty() ? std::vector<std::string>{} : trajs[0].x0_names;
  const auto& xn = trajs.empty() ? std::vector<std::string>{} : trajs[0].x_names;
  for (const auto& n : x0n) outf << ",x0_" << n;
  outf << ",z1,r,z2";
  for (const auto& n : xn) outf << ",x_" << n;
  outf << ",i,a,p,y_next\n";
  for (const auto& tr : trajs) {
    for (int t = 1; t <= tr.t_max(); ++t) {
      outf << tr.id << ',' << t;
      for (int k = 0; k < tr.x0.size(); ++k) outf << ',' << csv::num(tr.x0[k]);
      outf << ',' << tr.z1 << ',' << tr.r << ',' << tr.z2;
      for (int k = 0; k < tr.x.cols(); ++k) outf << ',' << csv::num(tr.x(t - 1, k));
      outf << ',' << tr.i_t[t - 1] << ',';
      if (tr.i_t[t - 1] == 1)
        outf << tr.a_t[t - 1] << ',' << csv::num(tr.p_t[t - 1]);
      else
        outf << ',';
      outf << ',' << csv::num(tr.y_next[t - 1]) << '\n';
    }
  }
}

}  // namespace hybrid
