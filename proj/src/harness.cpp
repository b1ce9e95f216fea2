#include "hybrid/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "hybrid/csv.hpp"
#include "hybrid/sim_engine.hpp"
#include "json.hpp"

namespace hybrid {

namespace {

std::string sgn(int v) { return v > 0 ? "+1" : "-1"; }

std::string reg_str(const DtrRegime& d) {
  return "(" + sgn(d.d1) + " " + sgn(d.d2) + ")";
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

const std::vector<DtrRegime>& all_regimes() {
  static const std::vector<DtrRegime> r4 = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  return r4;
}

std::vector<std::pair<DtrRegime, DtrRegime>> regime_pairs() {
  std::vector<std::pair<DtrRegime, DtrRegime>> out;
  const auto& r4 = all_regimes();
  for (size_t i = 0; i < r4.size(); ++i)
    for (size_t j = i + 1; j < r4.size(); ++j) out.push_back({r4[i], r4[j]});
  return out;
}

}  // namespace

std::vector<ContrastDef> benchmark_contrasts() {
  std::vector<ContrastDef> defs;
  auto add = [&](std::string label, std::string kind, int stage, DtrRegime d,
                 DtrRegime dp, int a_fixed) {
    ContrastDef def;
    def.label = std::move(label);
    def.kind = std::move(kind);
    def.stage = stage;
    def.d = d;
    def.dp = dp;
    def.a_fixed = a_fixed;
    defs.push_back(std::move(def));
  };
  // (a) within-regime effects of A_t, then regime-averaged effects
  for (int d1 : {1, -1})
    add("Fix d1=" + sgn(d1), "IA", 1, {d1, 1}, {d1, 1}, -1);
  for (const auto& d : all_regimes()) add("Fix " + reg_str(d), "IA", 2, d, d, -1);
  add("Avg DTR s1", "AA", 1, {1, 1}, {1, 1}, -1);
  add("Avg DTR s2", "AA", 2, {1, 1}, {1, 1}, -1);
  // (b) regime contrasts averaging over A_t
  add("d1 +1 vs -1", "AD", 1, {1, 1}, {-1, 1}, -1);
  for (const auto& [p, q] : regime_pairs())
    add(reg_str(p) + " vs " + reg_str(q), "AD", 2, p, q, -1);
  // (c) regime contrasts at fixed A_t
  for (int a : {0, 1}) {
    add("d1 +1 vs -1 a=" + std::to_string(a), "ID", 1, {1, 1}, {-1, 1}, a);
    for (const auto& [p, q] : regime_pairs())
      add(reg_str(p) + " vs " + reg_str(q) + " a=" + std::to_string(a), "ID", 2,
          p, q, a);
  }
  return defs;
}

BenchmarkModels benchmark_models(int scenario) {
  if (scenario != 1 && scenario != 2)
    throw ValidationError("scenario must be 1 or 2");
  const std::vector<std::string> f = {"1", "d1", "stage2*d2", "stage2*d1*d2"};
  BenchmarkModels bm;
  bm.opts.step2_response = Step2Response::kAdjusted;
  bm.opts.step1_meat = Step1Meat::kStacked;
  bm.opts.small_sample = true;
  if (scenario == 1) {
    bm.hybrid = ModelSpec::from_strings(
        0.5, f, f, {"x(state)", "x(state)*d1"}, {});
    bm.wcls = ModelSpec::from_strings(0.5, f, {"1"},
                                      {"x(state)", "x(state)*d1"}, {});
    bm.opts.centering = Centering::kPerTime;
  } else {
    const std::vector<std::string> m17 = {"stage1", "stage1*d1",
                                          "stage2",  "stage2*d1",
                                          "stage2*d2", "stage2*d1*d2"};
    bm.hybrid = ModelSpec::from_strings(0.5, f, m17, {}, {});
    bm.wcls = ModelSpec::from_strings(0.5, f, {"1"}, {}, {});
    bm.opts.centering = Centering::kPooled;
  }
  return bm;
}

namespace {

struct RepResult {
  bool ok = false;
  std::vector<double> est, se, est_b, se_b;
};

void run_rep(int rep, const BenchmarkConfig& config,
             const BenchmarkModels& models,
             const std::vector<ContrastDef>& defs, RepResult& out) {
  const size_t nc = defs.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    SimConfig sim;
    sim.scenario = config.scenario;
    sim.n = config.n;
    sim.seed = config.seed;
    const auto trajs =
        simulate_batch(sim, stream_tag::kBenchmark, static_cast<std::uint64_t>(rep));
    if (!config.dump_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "rep_%05d.csv", rep);
      emit_csv(trajs, config.dump_dir + "/" + name);
    }
    ModelSpec hspec = models.hybrid;
    hspec.finalize(trajs);
    const RowTable table = build_rows(trajs, models.design, hspec);
    const FitResult fit = fit_hybrid_rows(table, models.opts);
    const BaselineFit wr = fit_wr(table, models.opts.small_sample);
    ModelSpec wspec = models.wcls;
    wspec.finalize(trajs);
    const BaselineFit wc =
        fit_wcls(trajs, models.design, wspec, models.opts.small_sample);

    out.est.assign(nc, nan);
    out.se.assign(nc, nan);
    out.est_b.assign(nc, nan);
    out.se_b.assign(nc, nan);
    const Trajectory none;  // benchmark f/m reference no covariates
    const int ts = models.design.t_star;
    for (size_t j = 0; j < nc; ++j) {
      const auto& def = defs[j];
      const int t = def.stage == 2 ? ts + 2 : ts - 2;
      if (def.kind == "IA" || def.kind == "AA") {
        Contrast c;
        Vec fb;
        if (def.kind == "IA") {
          c = contrast_immediate(fit, hspec, ts, def.d, t, def.label);
          fb = eval_terms(wspec.f, wspec, none, def.d, t, ts);
        } else {
          c = contrast_immediate_avg(fit, hspec, ts, all_regimes(), t, def.label);
          fb = Vec::Zero(static_cast<Eigen::Index>(wspec.f.size()));
          for (const auto& reg : all_regimes())
            fb += eval_terms(wspec.f, wspec, none, reg, t, ts);
          fb /= 4.0;
        }
        out.est[j] = c.estimate;
        out.se[j] = c.se;
        out.est_b[j] = fb.dot(wc.beta);
        out.se_b[j] = std::sqrt(
            std::max(0.0, double(fb.transpose() * wc.vcov_beta * fb)));
      } else if (def.kind == "AD") {
        const Contrast c =
            contrast_averaged(fit, hspec, ts, def.d, def.dp, t, def.label);
        const Vec dm = eval_terms(hspec.m, hspec, none, def.d, t, ts) -
                       eval_terms(hspec.m, hspec, none, def.dp, t, ts);
        out.est[j] = c.estimate;
        out.se[j] = c.se;
        out.est_b[j] = dm.dot(wr.coef);
        out.se_b[j] =
            std::sqrt(std::max(0.0, double(dm.transpose() * wr.vcov * dm)));
      } else {
        const Contrast c = contrast_fixed_a(fit, hspec, ts, def.d, def.dp,
                                            def.a_fixed, t, def.label);
        out.est[j] = c.estimate;
        out.se[j] = c.se;
      }
    }
    out.ok = true;
  } catch (const std::exception&) {
    out.ok = false;
  }
}

}  // namespace

MetricsTable run_benchmark(const BenchmarkConfig& config) {
  if (config.scenario != 1 && config.scenario != 2)
    throw ValidationError("scenario must be 1 or 2");
  if (config.n < 2 || config.reps < 1)
    throw ValidationError("benchmark needs n >= 2 and reps >= 1");
  const auto defs = benchmark_contrasts();
  const auto models = benchmark_models(config.scenario);
  std::vector<RepResult> results(static_cast<size_t>(config.reps));

  const int threads = std::max(1, config.threads);
  if (threads == 1) {
    for (int rep = 0; rep < config.reps; ++rep)
      run_rep(rep, config, models, defs, results[static_cast<size_t>(rep)]);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int k = 0; k < threads; ++k)
      pool.emplace_back([&, k] {
        for (int rep = k; rep < config.reps; rep += threads)
          run_rep(rep, config, models, defs, results[static_cast<size_t>(rep)]);
      });
    for (auto& th : pool) th.join();
  }

  long failures = 0;
  for (const auto& r : results)
    if (!r.ok) ++failures;
  if (failures * 100 > config.reps)
    throw NumericalError(std::to_string(failures) + " of " +
                         std::to_string(config.reps) +
                         " replications failed to fit (>1%)");

  MetricsTable tab;
  tab.reps = config.reps - failures;
  tab.failures = failures;
  for (size_t j = 0; j < defs.size(); ++j) {
    const auto& def = defs[j];
    const double truth = true_effect_analytic(config.scenario, def.kind,
                                              def.stage, def.d, def.dp,
                                              def.a_fixed);
    std::vector<double> est, se, est_b, se_b, ratio;
    for (const auto& r : results) {
      if (!r.ok) continue;
      est.push_back(r.est[j]);
      se.push_back(r.se[j]);
      if (def.kind != "ID") {
        est_b.push_back(r.est_b[j]);
        se_b.push_back(r.se_b[j]);
        ratio.push_back((r.se_b[j] / r.se[j]) * (r.se_b[j] / r.se[j]));
      }
    }
    auto make_row = [&](const std::string& method,
                        const std::vector<double>& e,
                        const std::vector<double>& s) {
      MetricsRow row;
      row.stage = def.stage;
      row.label = def.label;
      row.kind = def.kind;
      row.method = method;
      row.truth = truth;
      row.bias = mean_of(e) - truth;
      row.se = mean_of(s);
      row.mc_sd = sd_of(e);
      long covered = 0;
      for (size_t k = 0; k < e.size(); ++k)
        if (std::abs(e[k] - truth) <= kZ975 * s[k]) ++covered;
      row.cp = static_cast<double>(covered) / static_cast<double>(e.size());
      row.reps = static_cast<long>(e.size());
      return row;
    };
    tab.rows.push_back(make_row("hybrid", est, se));
    if (def.kind != "ID") {
      MetricsRow brow = make_row(def.kind == "AD" ? "wr" : "wcls", est_b, se_b);
      brow.mre = mean_of(ratio);
      brow.sd_re = sd_of(ratio);
      tab.rows.push_back(brow);
    }
  }
  return tab;
}

namespace {

std::string num_or_empty(double v) {
  return std::isnan(v) ? std::string() : csv::num(v);
}

double parse_or_nan(const std::string& s, const std::string& what) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  return csv::parse_double(s, what);
}

}  // namespace

std::string render_metrics_csv(const MetricsTable& table) {
  std::ostringstream os;
  os << "stage,label,kind,method,true,bias,se,mc_sd,cp,mre,sd_re,reps,"
        "failures\n";
  for (const auto& r : table.rows) {
    os << r.stage << ',' << r.label << ',' << r.kind << ',' << r.method << ','
       << csv::num(r.truth) << ',' << csv::num(r.bias) << ',' << csv::num(r.se)
       << ',' << csv::num(r.mc_sd) << ',' << csv::num(r.cp) << ','
       << num_or_empty(r.mre) << ',' << num_or_empty(r.sd_re) << ',' << r.reps
       << ',' << table.failures << '\n';
  }
  return os.str();
}

MetricsTable parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("empty metrics file");
  const auto header = csv::split(line);
  const std::vector<std::string> expected = {
      "stage", "label", "kind", "method", "true", "bias", "se",
      "mc_sd", "cp",    "mre",  "sd_re",  "reps", "failures"};
  if (header != expected)
    throw ValidationError("unexpected metrics header");
  MetricsTable tab;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != expected.size())
      throw ValidationError("metrics line " + std::to_string(lineno) +
                            ": wrong cell count");
    MetricsRow r;
    const std::string where = "metrics line " + std::to_string(lineno);
    r.stage = static_cast<int>(csv::parse_long(cells[0], where));
    r.label = cells[1];
    r.kind = cells[2];
    r.method = cells[3];
    r.truth = csv::parse_double(cells[4], where);
    r.bias = csv::parse_double(cells[5], where);
    r.se = csv::parse_double(cells[6], where);
    r.mc_sd = csv::parse_double(cells[7], where);
    r.cp = csv::parse_double(cells[8], where);
    r.mre = parse_or_nan(cells[9], where);
    r.sd_re = parse_or_nan(cells[10], where);
    r.reps = csv::parse_long(cells[11], where);
    tab.failures = csv::parse_long(cells[12], where);
    tab.reps = r.reps;
    tab.rows.push_back(std::move(r));
  }
  return tab;
}

namespace {

std::string fmt(double v, int prec) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return std::string(buf);
}

}  // namespace

std::string render_metrics_md(const MetricsTable& table) {
  // Pair each hybrid row with its baseline row (same label), preserving order.
  struct Paired {
    const MetricsRow* hybrid = nullptr;
    const MetricsRow* baseline = nullptr;
  };
  std::vector<Paired> rows;
  for (const auto& r : table.rows) {
    if (r.method == "hybrid") {
      rows.push_back({&r, nullptr});
    } else if (!rows.empty() && rows.back().hybrid->label == r.label) {
      rows.back().baseline = &r;
    }
  }
  std::ostringstream os;
  os << "# Benchmark metrics\n\n";
  os << "Replications used: " << table.reps << " (failed: " << table.failures
     << ")\n";
  auto emit_section = [&](const std::string& title,
                          const std::string& baseline_name, bool want_baseline,
                          auto pred) {
    os << "\n## " << title << "\n\n";
    if (want_baseline) {
      os << "| Contrast | True | Bias | SE | CP | Bias (" << baseline_name
         << ") | SE (" << baseline_name << ") | CP (" << baseline_name
         << ") | mRE | sdRE | MC SD |\n";
      os << "|---|---|---|---|---|---|---|---|---|---|---|\n";
    } else {
      os << "| Contrast | True | Bias | SE | CP | MC SD |\n";
      os << "|---|---|---|---|---|---|\n";
    }
    for (const auto& pr : rows) {
      if (!pred(*pr.hybrid)) continue;
      const auto& h = *pr.hybrid;
      if (want_baseline) {
        const auto* b = pr.baseline;
        os << "| " << h.label << " | " << fmt(h.truth, 3) << " | "
           << fmt(h.bias, 3) << " | " << fmt(h.se, 3) << " | " << fmt(h.cp, 2)
           << " | " << (b ? fmt(b->bias, 3) : "") << " | "
           << (b ? fmt(b->se, 3) : "") << " | " << (b ? fmt(b->cp, 2) : "")
           << " | " << (b ? fmt(b->mre, 2) : "") << " | "
           << (b ? fmt(b->sd_re, 2) : "") << " | " << fmt(h.mc_sd, 3)
           << " |\n";
      } else {
        os << "| " << h.label << " | " << fmt(h.truth, 3) << " | "
           << fmt(h.bias, 3) << " | " << fmt(h.se, 3) << " | " << fmt(h.cp, 2)
           << " | " << fmt(h.mc_sd, 3) << " |\n";
      }
    }
  };
  emit_section("Proximal treatment effects (a)", "WCLS", true,
               [](const MetricsRow& r) { return r.kind == "IA" || r.kind == "AA"; });
  emit_section("Regime contrasts averaging over treatment (b)", "WR", true,
               [](const MetricsRow& r) { return r.kind == "AD"; });
  emit_section("Regime contrasts at fixed treatment (c)", "", false,
               [](const MetricsRow& r) { return r.kind == "ID"; });
  return os.str();
}

std::vector<TruthRow> truth_rows(int scenario, long n_mc, std::uint64_t seed) {
  if (scenario != 1 && scenario != 2)
    throw ValidationError("scenario must be 1 or 2");
  std::vector<TruthRow> out;
  McOracle oracle(scenario, std::max<long>(n_mc, 2), seed);
  for (const auto& def : benchmark_contrasts()) {
    TruthRow row;
    row.def = def;
    row.value = true_effect_analytic(scenario, def.kind, def.stage, def.d,
                                     def.dp, def.a_fixed);
    if (n_mc > 0) {
      const McValue mc =
          oracle.effect(def.kind, def.stage, def.d, def.dp, def.a_fixed);
      row.mc = mc.value;
      row.mc_se = mc.se;
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string render_truth_csv(const std::vector<TruthRow>& rows) {
  std::ostringstream os;
  os << "stage,label,kind,d1,d2,dp1,dp2,a_fixed,value,provenance,mc,mc_se\n";
  for (const auto& r : rows) {
    const bool pair = r.def.kind == "AD" || r.def.kind == "ID";
    const bool avg = r.def.kind == "AA";
    os << r.def.stage << ',' << r.def.label << ',' << r.def.kind << ',';
    if (avg)
      os << ",,,,";
    else if (pair)
      os << r.def.d.d1 << ',' << r.def.d.d2 << ',' << r.def.dp.d1 << ','
         << r.def.dp.d2 << ',';
    else
      os << r.def.d.d1 << ',' << r.def.d.d2 << ",,,";
    if (r.def.kind == "ID")
      os << r.def.a_fixed;
    os << ',' << csv::num(r.value) << ',' << r.provenance << ','
       << num_or_empty(r.mc) << ',' << num_or_empty(r.mc_se) << '\n';
  }
  return os.str();
}

namespace {

using nlohmann::json;

std::vector<std::string> string_list(const json& j, const std::string& key) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  if (!j.at(key).is_array())
    throw ValidationError("config: '" + key + "' must be an array of strings");
  for (const auto& v : j.at(key)) out.push_back(v.get<std::string>());
  return out;
}

DesignSpec design_from_json(const json& cfg) {
  DesignSpec design;
  if (!cfg.contains("design")) return design;
  const json& d = cfg.at("design");
  if (d.contains("variant")) {
    const int v = d.at("variant").get<int>();
    if (v == 1)
      design.smart_variant = SmartVariant::I;
    else if (v == 2)
      design.smart_variant = SmartVariant::II;
    else if (v == 3)
      design.smart_variant = SmartVariant::III;
    else
      throw ValidationError("config: design.variant must be 1, 2, or 3");
    if (v == 1)
      design.p_z2_given_r = {{0, {{1, 0.5}, {-1, 0.5}}},
                             {1, {{1, 0.5}, {-1, 0.5}}}};
  }
  design.t_star = d.value("t_star", design.t_star);
  design.t_max = d.value("t_max", design.t_max);
  design.p_z1 = d.value("p_z1", design.p_z1);
  if (d.contains("p_z2_given_r")) {
    design.p_z2_given_r.clear();
    for (const auto& [rkey, law] : d.at("p_z2_given_r").items()) {
      const int r = static_cast<int>(csv::parse_long(rkey, "p_z2_given_r key"));
      for (const auto& [zkey, p] : law.items()) {
        const int z2 = static_cast<int>(csv::parse_long(zkey, "z2 key"));
        design.p_z2_given_r[r][z2] = p.get<double>();
      }
    }
  }
  return design;
}

FitOptions options_from_json(const json& m) {
  FitOptions opts;
  const std::string resp = m.value("step2_response", std::string("adjusted"));
  if (resp == "adjusted")
    opts.step2_response = Step2Response::kAdjusted;
  else if (resp == "fitted")
    opts.step2_response = Step2Response::kFitted;
  else if (resp == "raw")
    opts.step2_response = Step2Response::kRaw;
  else
    throw ValidationError("config: step2_response must be adjusted|fitted|raw");
  const std::string cen = m.value("centering", std::string("pooled"));
  if (cen == "pooled")
    opts.centering = Centering::kPooled;
  else if (cen == "per_time")
    opts.centering = Centering::kPerTime;
  else
    throw ValidationError("config: centering must be pooled|per_time");
  const std::string meat = m.value("step1_meat", std::string("stacked"));
  if (meat == "stacked")
    opts.step1_meat = Step1Meat::kStacked;
  else if (meat == "plugin")
    opts.step1_meat = Step1Meat::kPlugin;
  else
    throw ValidationError("config: step1_meat must be stacked|plugin");
  opts.small_sample = m.value("small_sample", false);
  return opts;
}

json coef_block(const std::vector<Term>& terms, const Vec& coef,
                const Mat& vcov, Eigen::Index offset) {
  json arr = json::array();
  for (Eigen::Index k = 0; k < coef.size(); ++k) {
    const double se = std::sqrt(std::max(0.0, vcov(offset + k, offset + k)));
    json row;
    row["term"] = terms[static_cast<size_t>(k)].source;
    row["estimate"] = coef(k);
    row["se"] = se;
    row["lo"] = coef(k) - kZ975 * se;
    row["hi"] = coef(k) + kZ975 * se;
    arr.push_back(row);
  }
  return arr;
}

void md_coef_table(std::ostringstream& os, const std::string& title,
                   const json& block) {
  if (block.empty()) return;
  os << "\n## " << title << "\n\n";
  os << "| Term | Estimate | 95% CI |\n|---|---|---|\n";
  for (const auto& row : block) {
    os << "| " << row.at("term").get<std::string>() << " | "
       << fmt(row.at("estimate").get<double>(), 3) << " | ("
       << fmt(row.at("lo").get<double>(), 3) << ", "
       << fmt(row.at("hi").get<double>(), 3) << ") |\n";
  }
}

}  // namespace

AnalyzeResult analyze(const std::string& data_csv_path,
                      const std::string& config_json_path) {
  std::ifstream cf(config_json_path);
  if (!cf) throw ValidationError("cannot open config file: " + config_json_path);
  json cfg;
  try {
    cf >> cfg;
  } catch (const std::exception& e) {
    throw ValidationError("config parse error: " + std::string(e.what()));
  }
  if (!cfg.contains("model"))
    throw ValidationError("config must contain a 'model' section");
  const json& m = cfg.at("model");

  DesignSpec design = design_from_json(cfg);
  design.validate();
  ModelSpec spec = ModelSpec::from_strings(
      m.value("rho", 0.5), string_list(m, "f"), string_list(m, "m"),
      string_list(m, "g"), string_list(m, "s"));
  const FitOptions opts = options_from_json(m);

  const auto trajs = ingest_csv(data_csv_path);
  if (trajs.empty()) throw ValidationError("no trajectories in data file");
  for (const auto& tr : trajs) validate_trajectory(tr, design);
  spec.finalize(trajs);
  const auto report = spec.validate();
  if (!report.empty()) {
    std::string msg = "invalid model spec:";
    for (const auto& lineu : report) msg += "\n  - " + lineu;
    throw ValidationError(msg);
  }
  const RowTable table = build_rows(trajs, design, spec);
  const FitResult fit = fit_hybrid_rows(table, opts);

  std::vector<Contrast> contrasts;
  if (cfg.contains("contrasts")) {
    for (const auto& c : cfg.at("contrasts")) {
      const std::string kind = c.at("kind").get<std::string>();
      auto regime_of = [&](const std::string& key) {
        const auto& arr = c.at(key);
        if (!arr.is_array() || arr.size() != 2)
          throw ValidationError("config: contrast '" + key +
                                "' must be [d1, d2]");
        return DtrRegime{arr[0].get<int>(), arr[1].get<int>()};
      };
      const int stage = c.value("stage", 2);
      if (stage != 1 && stage != 2)
        throw ValidationError("config: contrast stage must be 1 or 2");
      const int t = c.contains("t")
                        ? c.at("t").get<int>()
                        : (stage == 2 ? design.t_star + 2 : design.t_star - 2);
      std::optional<CovariateProfile> profile;
      if (c.contains("x0")) {
        CovariateProfile pr;
        for (const auto& [name, value] : c.at("x0").items()) {
          pr.names.push_back(name);
          pr.values.conservativeResize(pr.values.size() + 1);
          pr.values(pr.values.size() - 1) = value.get<double>();
        }
        profile = std::move(pr);
      }
      const std::string label =
          c.value("label", kind + " contrast " + std::to_string(contrasts.size() + 1));
      if (kind == "IA") {
        contrasts.push_back(contrast_immediate(fit, spec, design.t_star,
                                               regime_of("d"), t, label, profile));
      } else if (kind == "AA") {
        contrasts.push_back(contrast_immediate_avg(fit, spec, design.t_star,
                                                   enumerate_regimes(design), t,
                                                   label, profile));
      } else if (kind == "AD") {
        contrasts.push_back(contrast_averaged(fit, spec, design.t_star,
                                              regime_of("d"), regime_of("dprime"),
                                              t, label, profile));
      } else if (kind == "ID") {
        contrasts.push_back(contrast_fixed_a(fit, spec, design.t_star,
                                             regime_of("d"), regime_of("dprime"),
                                             c.at("a").get<int>(), t, label,
                                             profile));
      } else {
        throw ValidationError("config: unsupported contrast kind '" + kind + "'");
      }
    }
  }

  json out;
  out["n"] = fit.n_persons;
  out["replicated_rows"] = static_cast<long>(table.n_rows());
  const auto& s1 = fit.step1;
  out["coefficients"]["alpha0"] = coef_block(spec.g, s1.alpha0, s1.vcov, 0);
  out["coefficients"]["beta"] = coef_block(spec.f, s1.beta, s1.vcov, s1.gdim);
  out["coefficients"]["alpha1"] =
      coef_block(spec.s, s1.alpha1, s1.vcov, s1.gdim + s1.fdim);
  out["coefficients"]["eta"] =
      coef_block(spec.m, s1.eta, s1.vcov, s1.gdim + s1.fdim + s1.sdim);
  out["coefficients"]["gamma"] =
      coef_block(spec.m, fit.step2.gamma, fit.step2.vcov, 0);
  json carr = json::array();
  for (const auto& c : contrasts) {
    json row;
    row["label"] = c.label;
    row["kind"] = c.kind;
    row["estimate"] = c.estimate;
    row["se"] = c.se;
    row["lo"] = c.lo;
    row["hi"] = c.hi;
    carr.push_back(row);
  }
  out["contrasts"] = carr;
  json diag;
  diag["cond_step1"] = s1.cond;
  diag["cond_step2"] = fit.step2.cond;
  diag["ee_norm_step1"] = s1.ee_norm;
  diag["ee_norm_step2"] = fit.step2.ee_norm;
  diag["df_step1"] = s1.df;
  diag["df_step2"] = fit.step2.df;
  diag["model_digest"] = spec.digest();
  diag["design_digest"] = design.digest();
  diag["tc_mean"] = spec.tc_mean;
  diag["tc_sd"] = spec.tc_sd;
  diag["r_mean"] = spec.r_mean;
  if (fit.mu.size() > 0) {
    json mu = json::array();
    for (Eigen::Index r = 0; r < fit.mu.rows(); ++r) {
      std::vector<double> row(fit.mu.row(r).begin(), fit.mu.row(r).end());
      mu.push_back(row);
    }
    diag["mu"] = mu;
  }
  if (fit.psi.size() > 0) {
    std::vector<double> psi(fit.psi.data(), fit.psi.data() + fit.psi.size());
    diag["psi"] = psi;
  }
  out["diagnostics"] = diag;

  AnalyzeResult res;
  res.json = out.dump(2) + "\n";
  std::ostringstream os;
  os << "# Fit report\n\n";
  os << "Persons: " << fit.n_persons
     << "; replicated rows: " << table.n_rows() << "\n";
  md_coef_table(os, "Control coefficients (alpha0)", out["coefficients"]["alpha0"]);
  md_coef_table(os, "Proximal effect coefficients (beta)", out["coefficients"]["beta"]);
  md_coef_table(os, "Auxiliary moderator coefficients (alpha1)",
                out["coefficients"]["alpha1"]);
  md_coef_table(os, "Working mean coefficients (eta)", out["coefficients"]["eta"]);
  md_coef_table(os, "Marginal regime means (gamma)", out["coefficients"]["gamma"]);
  if (!contrasts.empty()) {
    os << "\n## Contrasts\n\n";
    os << "| Label | Kind | Estimate | SE | 95% CI |\n|---|---|---|---|---|\n";
    for (const auto& c : contrasts)
      os << "| " << c.label << " | " << c.kind << " | " << fmt(c.estimate, 3)
         << " | " << fmt(c.se, 3) << " | (" << fmt(c.lo, 3) << ", "
         << fmt(c.hi, 3) << ") |\n";
  }
  res.md = os.str();
  return res;
}

}  // namespace hybrid
