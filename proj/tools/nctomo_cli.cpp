// nctomo: run homodyne nonclassicality experiments from configs or presets.
//
//   nctomo list
//   nctomo preset fig4 --desk --seed 7 --out results
//   nctomo run batch.json
//
// NCTOMO_WORKERS sets the worker thread count.

#include <exception>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nctomo/expcli.hpp"

namespace {

using namespace nctomo;

int cmd_list() {
  for (const auto& p : expcli::list_presets()) {
    std::cout << std::left << std::setw(10) << p.name << std::setw(7) << (p.desk ? "desk" : "full")
              << std::right << std::setw(10) << p.config.samples << "  " << p.description << '\n';
  }
  return expcli::kExitOk;
}

int run_all(const std::vector<expcli::ExperimentConfig>& configs) {
  for (const auto& c : configs) {
    const auto r = expcli::run(c, &std::cerr);
    std::cout << c.name << ": " << (r.nonclassical ? "nonclassical" : "not certified") << "  " << r.csv.string()
              << '\n';
  }
  return expcli::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Homodyne tomography nonclassicality experiments"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "List the built-in presets");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run every experiment in a JSON config file");
  run->add_option("config", config_path, "Config file")->required();

  std::string preset_name;
  bool desk = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  auto* preset = app.add_subcommand("preset", "Run a built-in preset");
  preset->add_option("name", preset_name, "Preset name (fig1..fig7, fig9)")->required();
  preset->add_flag("--desk", desk, "Desk-scale variant (samples / 10)");
  preset->add_option("--seed", seed, "Override the seed");
  preset->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : expcli::kExitConfig;
  }

  try {
    if (list->parsed()) return cmd_list();
    if (run->parsed()) return run_all(expcli::load_configs(config_path));
    auto p = expcli::find_preset(preset_name, desk);
    if (seed) p.config.seed = *seed;
    if (out_dir) p.config.out_dir = *out_dir;
    return run_all({p.config});
  } catch (...) {
    return expcli::exit_code_for(std::current_exception(), std::cerr);
  }
}
