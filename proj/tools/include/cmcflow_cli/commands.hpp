#pragma once

#include "cmcflow_cli/config.hpp"

namespace cmcflow::cli {

/// Numerical failure: exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FlowArgs {
  std::string input_map;      // PLY; empty ⇒ use `init`
  std::string resume;         // checkpoint JSON
  std::string init = "equator";  // equator | latitude:<c> | geodesic:<r> | constant | random:<amp>
  double tracked_volume = 0.0;
  double noise = 0.0;  // reparametrization noise amplitude
};

struct DiagnoseArgs {
  std::string map_file;
  double H = 0.0;
  double eps = 0.0;
  std::string record_file;  // optional: re-validate against this record
  double c0 = 0.0;          // 0 ⇒ round default 2 + H²/2
};

struct ExportArgs {
  std::string map_file;
  std::string mode = "stereographic";  // stereographic | slice
  bool auto_rotate = true;
  std::string output;
};

int cmd_sweepout(const RunConfig& cfg);
/// `resume_sweepout` names a checkpoint directory to continue from (empty:
/// start from the latitude sweepout).
int cmd_minmax(const RunConfig& cfg, const std::string& resume_sweepout = "");
int cmd_hsweep(const RunConfig& cfg);
int cmd_flow(const RunConfig& cfg, const FlowArgs& args);
int cmd_diagnose(const RunConfig& cfg, const DiagnoseArgs& args);
int cmd_export(const RunConfig& cfg, const ExportArgs& args);

/// Maps exceptions to the documented exit codes (2 config, 3 numerical, 4 IO).
int run_guarded(const std::function<int()>& fn);

Sweepout load_sweepout_checkpoint(const std::string& dir,
                                  std::shared_ptr<const MetricModel> metric);

}  // namespace cmcflow::cli
