#pragma once

#include "cmcflow/minmax.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cmcflow::cli {

/// Usage / configuration problem: exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key=value run configuration; CLI flags override file keys.
struct RunConfig {
  int mesh_level = 4;
  std::string metric_spec = "round";  // round | conformal_x4:<a> | conformal_const:<c>
  double metric_tube_radius = 0.1;
  std::vector<double> h_schedule = {0.5};
  std::vector<double> eps_schedule = {0.05};
  int slice_count = 64;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string output_dir = "out";

  FlowConfig flow;
  MinMaxConfig minmax;

  double diagnose_eta0 = 0.3;
  double diagnose_scan_radius = 0.02;
  int diagnose_eigencount = 8;
  double diagnose_null_tol = 0.25;

  void validate() const;
  std::shared_ptr<MetricModel> make_metric() const;
};

/// Parses "key = value" lines ('#' comments); unknown keys are errors.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, RunConfig base = RunConfig());
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

std::vector<double> parse_schedule(const std::string& text);

}  // namespace cmcflow::cli
