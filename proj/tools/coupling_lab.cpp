// coupling-lab: run declarative experiments, verify the built-in criteria,
// list presets, and render CSV results as SVG plots.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "couplab/experiments.hpp"
#include "couplab/verify.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo laboratory for sub-Riemannian Brownian couplings"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run an experiment from a config file or preset name");
  run->add_option("config", config_path, "config file (JSON) or preset name")->required();

  std::string suite = "fast";
  auto* verify = app.add_subcommand("verify", "run the acceptance criteria");
  verify->add_option("--suite", suite, "fast or full")
      ->check(CLI::IsMember({"fast", "full"}));

  auto* presets = app.add_subcommand("presets", "list the preset catalog");

  std::string csv_path, svg_path;
  bool logy = false;
  auto* plot = app.add_subcommand("plot", "render a result CSV as an SVG plot");
  plot->add_option("csv", csv_path, "input CSV")->required();
  plot->add_option("--out", svg_path, "output SVG path")->required();
  plot->add_flag("--logy", logy, "logarithmic vertical axis");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      couplab::ExperimentSpec spec;
      std::ifstream probe(config_path);
      if (probe.good())
        spec = couplab::load_experiment_config(config_path);
      else
        spec = couplab::preset_by_name(config_path);
      if (spec.csv_path.empty()) spec.csv_path = spec.name + ".csv";
      if (spec.manifest_path.empty()) spec.manifest_path = spec.name + ".json";
      auto m = couplab::run_experiment(spec);
      std::cout << m.doc.dump(2) << '\n';
      return m.all_pass ? 0 : 1;
    }
    if (verify->parsed()) {
      auto reports = couplab::run_verification(suite == "full" ? couplab::VerifySuite::Full
                                                               : couplab::VerifySuite::Fast);
      bool ok = couplab::print_verification(std::cout, reports);
      return ok ? 0 : 1;
    }
    if (presets->parsed()) {
      for (const auto& p : couplab::list_presets())
        std::cout << p.name << "\n    " << p.claim << "\n";
      return 0;
    }
    if (plot->parsed()) {
      couplab::plot_csv_file(csv_path, svg_path, logy);
      std::cout << "wrote " << svg_path << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
