#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "hybrid/harness.hpp"

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw hybrid::ValidationError("cannot open for writing: " + path);
  out << text;
  if (!out) throw hybrid::ValidationError("failed writing: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw hybrid::ValidationError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-timescale adaptive-intervention causal effect estimation"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand(
      "simulate", "Run the repeated-sampling benchmark and write a metrics table");
  hybrid::BenchmarkConfig bc;
  std::string sim_out;
  sim->add_option("--scenario", bc.scenario, "Generative scenario")
      ->check(CLI::IsMember({1, 2}))
      ->required();
  sim->add_option("--n", bc.n, "Persons per replication");
  sim->add_option("--reps", bc.reps, "Number of replications");
  sim->add_option("--seed", bc.seed, "Master seed");
  sim->add_option("--threads", bc.threads, "Worker threads");
  sim->add_option("--out", sim_out, "Metrics CSV path")->required();
  sim->add_option("--dump-data", bc.dump_dir,
                  "Directory for per-replication datasets");
  sim->callback([&] {
    if (!bc.dump_dir.empty())
      std::filesystem::create_directories(bc.dump_dir);
    const auto table = hybrid::run_benchmark(bc);
    write_file(sim_out, hybrid::render_metrics_csv(table));
  });

  auto* an = app.add_subcommand("analyze",
                                "Fit the two-step estimator to a dataset");
  std::string an_data, an_config, an_out;
  an->add_option("--data", an_data, "Long-format trajectory CSV")->required();
  an->add_option("--config", an_config, "JSON design/model/contrast config")
      ->required();
  an->add_option("--out", an_out, "Output JSON path (markdown twin at .md)")
      ->required();
  an->callback([&] {
    const auto res = hybrid::analyze(an_data, an_config);
    write_file(an_out, res.json);
    write_file(an_out + ".md", res.md);
  });

  auto* tr = app.add_subcommand("truth",
                                "Write the benchmark truth table as CSV");
  int tr_scenario = 1;
  long tr_mc = 0;
  std::uint64_t tr_seed = hybrid::kDefaultSeed;
  std::string tr_out;
  tr->add_option("--scenario", tr_scenario, "Generative scenario")
      ->check(CLI::IsMember({1, 2}))
      ->required();
  tr->add_option("--mc", tr_mc,
                 "Potential-outcome Monte-Carlo draws (0 = analytic only)");
  tr->add_option("--seed", tr_seed, "Monte-Carlo seed");
  tr->add_option("--out", tr_out, "Truth CSV path")->required();
  tr->callback([&] {
    const auto rows = hybrid::truth_rows(tr_scenario, tr_mc, tr_seed);
    write_file(tr_out, hybrid::render_truth_csv(rows));
  });

  auto* rp = app.add_subcommand("report",
                                "Re-render a metrics table to stdout");
  std::string rp_in, rp_format = "csv";
  rp->add_option("--in", rp_in, "Metrics CSV path")->required();
  rp->add_option("--format", rp_format, "Output format")
      ->check(CLI::IsMember({"csv", "md"}));
  rp->callback([&] {
    const auto table = hybrid::parse_metrics_csv(read_file(rp_in));
    std::cout << (rp_format == "md" ? hybrid::render_metrics_md(table)
                                    : hybrid::render_metrics_csv(table));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const hybrid::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const hybrid::NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
