// Command-line front end for the pipeline: one subcommand per stage, every
// RunConfig key as a --flag, and --config for a key=value file.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

#include "cst/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Compton scattering tomography: simulation and reconstruction"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file");
  app.fallthrough();

  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::string preset;
  app.add_option("--preset", preset, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  for (const auto& [key, def] : cst::RunConfig::desk().to_map())
    options[key] = app.add_option("--" + key, values[key], "default " + (def.empty() ? "\"\"" : def));

  auto* phantom = app.add_subcommand("phantom", "ground truth and prior rasters");
  auto* assemble = app.add_subcommand("assemble", "system matrix for which=exact|prior");
  auto* simulate = app.add_subcommand("simulate", "deterministic g1 and Monte-Carlo g1, g2");
  auto* noise = app.add_subcommand("noise", "Poisson noise on g1");
  auto* uncertainty = app.add_subcommand("uncertainty", "data, eta and delta for one scenario");
  auto* reconstruct = app.add_subcommand("reconstruct", "one method on one scenario");
  auto* metrics = app.add_subcommand("metrics", "metrics.csv for every reconstruction present");
  auto* png = app.add_subcommand("export-png", "8-bit grayscale PNG of a 2D CSTB array");
  std::string input, output, window;
  png->add_option("--input", input, "2D CSTB file")->required();
  png->add_option("--output", output, "PNG file")->required();
  png->add_option("--window", window, "CSTB file whose [min, max] sets the gray window");

  CLI11_PARSE(app, argc, argv);

  try {
    std::map<std::string, std::string> kv;
    if (!preset.empty()) kv["preset"] = preset;
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) kv[key] = values[key];
    const auto cfg = cst::RunConfig::from_map(kv);

    if (png->parsed()) {
      cst::export_png(input, output, window.empty() ? std::nullopt : std::optional<cst::fs::path>(window));
      return 0;
    }
    const cst::Workspace ws(cfg);
    cfg.write(ws.path(cst::files::config));
    if (phantom->parsed()) cst::cmd_phantom(ws);
    if (assemble->parsed()) cst::cmd_assemble(ws);
    if (simulate->parsed()) cst::cmd_simulate(ws);
    if (noise->parsed()) cst::cmd_noise(ws);
    if (uncertainty->parsed()) cst::cmd_uncertainty(ws);
    if (reconstruct->parsed()) cst::cmd_reconstruct(ws);
    if (metrics->parsed()) {
      std::cout << cst::metrics_csv_header() << '\n';
      for (const auto& row : cst::cmd_metrics(ws)) std::cout << row << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "cst_cli: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
