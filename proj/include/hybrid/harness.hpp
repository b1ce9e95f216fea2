#pragma once

#include <string>
#include <vector>

#include "hybrid/baselines.hpp"
#include "hybrid/inference.hpp"
#include "hybrid/truth_oracle.hpp"

namespace hybrid {

inline constexpr std::uint64_t kDefaultSeed = 101;

struct ContrastDef {
  std::string label;
  std::string kind;  // "IA", "AA", "AD", "ID"
  int stage = 1;
  DtrRegime d{1, 1};
  DtrRegime dp{1, 1};  // AD/ID comparator
  int a_fixed = -1;    // ID only
};

// The 29 benchmark contrasts in table order: (a) within-regime and averaged
// effects of A_t, (b) regime contrasts averaging over A_t, (c) regime
// contrasts at fixed A_t.
std::vector<ContrastDef> benchmark_contrasts();

struct BenchmarkModels {
  DesignSpec design;
  ModelSpec hybrid;
  ModelSpec wcls;
  FitOptions opts;
};

BenchmarkModels benchmark_models(int scenario);

struct BenchmarkConfig {
  int scenario = 1;
  int n = 100;
  int reps = 500;
  std::uint64_t seed = kDefaultSeed;
  int threads = 1;
  std::string dump_dir;  // when set, per-rep datasets are written here
};

struct MetricsRow {
  int stage = 1;
  std::string label;
  std::string kind;
  std::string method;  // "hybrid", "wcls", "wr"
  double truth = 0.0;
  double bias = 0.0;
  double se = 0.0;     // mean estimated sandwich SE
  double mc_sd = 0.0;  // SD of estimates across reps
  double cp = 0.0;
  double mre = std::numeric_limits<double>::quiet_NaN();    // baseline rows
  double sd_re = std::numeric_limits<double>::quiet_NaN();  // baseline rows
  long reps = 0;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
  long reps = 0;
  long failures = 0;
};

MetricsTable run_benchmark(const BenchmarkConfig& config);

std::string render_metrics_csv(const MetricsTable& table);
MetricsTable parse_metrics_csv(const std::string& text);
std::string render_metrics_md(const MetricsTable& table);

struct TruthRow {
  ContrastDef def;
  double value = 0.0;          // analytic
  std::string provenance = "analytic";
  double mc = std::numeric_limits<double>::quiet_NaN();
  double mc_se = std::numeric_limits<double>::quiet_NaN();
};

// n_mc == 0 -> analytic values only.
std::vector<TruthRow> truth_rows(int scenario, long n_mc, std::uint64_t seed);
std::string render_truth_csv(const std::vector<TruthRow>& rows);

struct AnalyzeResult {
  std::string json;
  std::string md;
};

AnalyzeResult analyze(const std::string& data_csv_path,
                      const std::string& config_json_path);

}  // namespace hybrid
