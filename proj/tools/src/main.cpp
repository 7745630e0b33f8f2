#include "cmcflow_cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace cmcflow::cli;

int main(int argc, char** argv) {
  CLI::App app{"cmcflow: min-max solver for constant-mean-curvature 2-spheres in a 3-sphere"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "run configuration file (key = value lines)");
  app.add_option("-D,--set", overrides, "override a configuration key (key=value)");

  auto load_config = [&]() {
    RunConfig cfg = config_path.empty() ? RunConfig() : parse_config_file(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("override must be key=value: " + kv);
      apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  };

  auto* sweepout = app.add_subcommand("sweepout", "latitude sweepout profile and checkpoint");
  auto* minmax = app.add_subcommand("minmax", "mountain pass and critical-point extraction");
  std::string resume_sweepout;
  minmax->add_option("--resume-sweepout", resume_sweepout, "sweepout checkpoint directory");
  auto* hsweep = app.add_subcommand("hsweep", "omega/H monotonicity table over the H schedule");
  auto* flow = app.add_subcommand("flow", "gradient descent to a critical point");
  auto* diagnose = app.add_subcommand("diagnose", "residuals, concentration scan, Morse indices");
  auto* exp = app.add_subcommand("export", "project a map to R^3 for viewing");
  for (auto* sub : {sweepout, minmax, hsweep, flow, diagnose, exp}) sub->fallthrough();

  FlowArgs flow_args;
  flow->add_option("--input", flow_args.input_map, "initial map PLY");
  flow->add_option("--resume", flow_args.resume, "resume from a checkpoint JSON");
  flow->add_option("--init", flow_args.init,
                   "initializer: equator | latitude:<c> | geodesic:<r> | constant | random:<amp>");
  flow->add_option("--tracked-volume", flow_args.tracked_volume, "initial tracked volume");
  flow->add_option("--noise", flow_args.noise, "reparametrization noise amplitude");

  DiagnoseArgs diag_args;
  diagnose->add_option("map", diag_args.map_file, "map PLY to diagnose")->required();
  diagnose->add_option("--H", diag_args.H, "mean curvature")->required();
  diagnose->add_option("--eps", diag_args.eps, "regularization parameter")->required();
  diagnose->add_option("--record", diag_args.record_file, "record JSON to re-validate");
  diagnose->add_option("--c0", diag_args.c0, "Ricci lower-bound constant (default 2 + H^2/2)");

  ExportArgs export_args;
  exp->add_option("map", export_args.map_file, "map PLY to export")->required();
  exp->add_option("--mode", export_args.mode, "stereographic | slice");
  exp->add_flag("!--no-auto-rotate", export_args.auto_rotate,
                "fail instead of rotating a pole-hitting map");
  exp->add_option("-o,--output", export_args.output, "output PLY path");

  CLI11_PARSE(app, argc, argv);

  return run_guarded([&]() -> int {
    const RunConfig cfg = load_config();
    if (sweepout->parsed()) return cmd_sweepout(cfg);
    if (minmax->parsed()) return cmd_minmax(cfg, resume_sweepout);
    if (hsweep->parsed()) return cmd_hsweep(cfg);
    if (flow->parsed()) return cmd_flow(cfg, flow_args);
    if (diagnose->parsed()) return cmd_diagnose(cfg, diag_args);
    if (exp->parsed()) return cmd_export(cfg, export_args);
    throw ConfigError("no subcommand");
  });
}
