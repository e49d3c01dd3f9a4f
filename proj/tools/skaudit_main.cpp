#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "skaudit/harness.hpp"

namespace {

skaudit::ExperimentConfig build_config(const std::string& config_path,
                                       const std::vector<std::string>& sets) {
  skaudit::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = skaudit::parse_config_file(config_path);
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    }
    skaudit::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skaudit: numerical audit of key-distillation security criteria"};
  app.require_subcommand(1);

  std::string info_spec;
  auto* info = app.add_subcommand("source-info",
                                  "print single-letter source statistics");
  info->add_option("spec", info_spec,
                   "bsc:<p>, indep:<k>, det:<k>, or a matrix file")
      ->required();

  std::string sweep_config;
  std::vector<std::string> sweep_sets;
  auto* sweep = app.add_subcommand(
      "sweep", "run the configured experiment grid and write CSV outputs");
  sweep->add_option("--config", sweep_config, "key=value config file");
  sweep->add_option("--set", sweep_sets, "override one config entry, key=value");

  std::string delta_spec;
  int delta_n = 1;
  auto* delta = app.add_subcommand(
      "delta", "exact best-achievable-distance curve over the key count");
  delta->add_option("--source", delta_spec, "source spec")->required();
  delta->add_option("--n", delta_n, "block length")->required();

  std::string bounds_spec;
  int bounds_n = 1;
  double bounds_b = 0.3;
  double bounds_c1 = 0.4748;
  auto* bounds = app.add_subcommand(
      "bounds", "partition, entropy-truncation, and converse figures at one (n, b)");
  bounds->add_option("--source", bounds_spec, "source spec")->required();
  bounds->add_option("--n", bounds_n, "block length")->required();
  bounds->add_option("--b", bounds_b, "second-order offset in nats");
  bounds->add_option("--c1", bounds_c1, "Berry-Esseen constant")
      ->check(CLI::PositiveNumber);

  std::string verify_config;
  std::vector<std::string> verify_sets;
  bool perturb = false;
  auto* verify = app.add_subcommand(
      "verify", "run the full inequality suite; exit 1 on any violation");
  verify->add_option("--config", verify_config, "key=value config file");
  verify->add_option("--set", verify_sets, "override one config entry, key=value");
  verify->add_flag("--perturb-delta", perturb,
                   "sabotage the distance values to prove the checks can fail");

  std::vector<std::string> plot_csvs;
  std::string plot_out{"."};
  auto* plot = app.add_subcommand("plot", "render sweep CSVs to SVG charts");
  plot->add_option("csv", plot_csvs, "CSV files produced by sweep")
      ->required()
      ->expected(-1);
  plot->add_option("--out", plot_out, "output directory for the SVG files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*info) return skaudit::cmd_source_info(info_spec, std::cout);
    if (*sweep) {
      return skaudit::cmd_sweep(build_config(sweep_config, sweep_sets),
                                std::cout);
    }
    if (*delta) return skaudit::cmd_delta(delta_spec, delta_n, std::cout);
    if (*bounds) {
      return skaudit::cmd_bounds(bounds_spec, bounds_n, bounds_b, bounds_c1,
                                 std::cout);
    }
    if (*verify) {
      return skaudit::cmd_verify(build_config(verify_config, verify_sets),
                                 perturb, std::cout);
    }
    if (*plot) return skaudit::cmd_plot(plot_csvs, plot_out, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
