#pragma once

#include "cmcflow/flow.hpp"

#include <vector>

namespace cmcflow {

/// Ordered family of maps with constant endpoints and slice-to-slice
/// accumulated enclosed volumes (V_0 = 0).
struct Sweepout {
  std::vector<MapField> slices;
  std::vector<double> tracked_volumes;

  int size() const { return static_cast<int>(slices.size()); }
  double total_target_volume() const { return slices.front().metric->total_volume(); }
  int degree() const {
    return static_cast<int>(std::lround(tracked_volumes.back() / total_target_volume()));
  }
  /// Recomputes the volume ledger slice-to-slice from V_0 = 0.
  void reaccumulate_volumes(double delta0 = default_delta0(), int s_gauss = 4);
  /// Splits any consecutive pair farther apart than delta0 by projected
  /// midpoints until all gaps are local.
  void enforce_locality(double delta0 = default_delta0());
  bool endpoints_constant(double tol = 1e-12) const;
};

/// The explicit degree-one sweepout through the latitude family
/// u_t(x) = (√(1-c²)x, c), c = 2t-1, t_k = k/(S-1).
Sweepout latitude_sweepout(const SphereMesh& mesh, std::shared_ptr<const MetricModel> metric,
                           int slice_count);

/// Argmax of the tracked energy over slices (ties break to the lowest index).
std::pair<int, double> sweepout_max(const Sweepout& sw, double H, double eps);

struct MinMaxConfig {
  int outer_iterations = 120;
  int descent_steps_per_slice = 2;
  FlowConfig flow;            // inner-step settings (Armijo etc.)
  double grad_tol = 2e-3;     // termination: argmax slice tangent gradient
  bool climb = true;          // climbing-image treatment of the argmax slice
  int climb_after = 12;       // outer iterations of plain string before climbing
  double climb_step = 0.8;
  int threads = 0;            // 0 = hardware concurrency
  bool verbose = false;
};

struct MinMaxRecord {
  double H = 0.0;
  double eps = 0.0;
  double omega = 0.0;  // final max energy: a certified upper bound for ω
  int argmax = -1;
  double d_eps_at_argmax = 0.0;
  double argmax_grad_norm = 0.0;
  int outer_iterations = 0;
  std::vector<double> max_energy_history;
  std::string status;
};

/// Discrete mountain pass: a string method alternating per-slice descent
/// (endpoints pinned) with arclength redistribution in the mass metric, plus
/// a climbing phase that converges the argmax slice onto the pass.
std::pair<Sweepout, MinMaxRecord> mountain_pass(const Sweepout& sw0, double H, double eps,
                                                const MinMaxConfig& cfg);

struct ScanRow {
  double H = 0.0;
  double omega = 0.0;
  double omega_over_h = 0.0;
  double derivative = std::numeric_limits<double>::quiet_NaN();  // fd of -ω/H, right endpoint
  int argmax = -1;
};

/// ω_{H,ε} over a strictly increasing positive H grid, warm-starting each run
/// from the previous sweepout.
std::vector<ScanRow> omega_over_h_scan(const std::vector<double>& h_grid, double eps,
                                       const Sweepout& base, const MinMaxConfig& cfg);

struct GoodSlice {
  int index = 0;
  double energy = 0.0;
  double d_eps = 0.0;
  bool within_bound = false;  // D_ε ≤ C
};

/// Interior slices with E ≥ ω - α, annotated with D_ε and the bound check.
std::vector<GoodSlice> good_slice_extract(const Sweepout& sw, double H, double eps, double alpha,
                                          double C);

std::string scan_table_csv(const std::vector<ScanRow>& rows);

}  // namespace cmcflow
