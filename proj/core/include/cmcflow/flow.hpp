#pragma once

#include "cmcflow/energy.hpp"

#include <string>
#include <vector>

namespace cmcflow {

enum class StepRule { Fixed, Armijo };
enum class Preconditioner { Mass, SobolevH2 };

struct FlowConfig {
  StepRule step_rule = StepRule::Armijo;
  Preconditioner preconditioner = Preconditioner::SobolevH2;
  double armijo_c1 = 1e-4;
  double armijo_shrink = 0.5;
  int max_backtracks = 40;
  double initial_step = 1.0;
  double grad_tol = 1e-6;
  int max_iterations = 2000;
  /// Max per-step vertex displacement; keeps volume increments local.
  double max_displacement = 0.2;
  double delta0 = default_delta0();
  double collapse_threshold = 1e-3;  // β: D_ε below this with live gradient ⇒ constant
  int volume_gauss = 4;
  bool record_trace = true;
  /// Return the iterate with the smallest gradient norm instead of the last
  /// one; the right choice when descending onto a mountain-pass saddle.
  bool return_best_gradient = false;

  void validate() const;
};

enum class FlowStatus { Converged, MaxIterations, CollapsedToConstant };

struct TraceRow {
  int iteration;
  double dirichlet, d_eps, volume, energy, grad_norm;
};

struct CriticalPointRecord {
  MapField map;
  double H = 0.0;
  double eps = 0.0;
  EnergyBreakdown energy;
  double grad_norm = 0.0;
  int iterations = 0;
  double cmc_residual_norm = 0.0;
  double hopf_residual_norm = 0.0;
  FlowStatus status = FlowStatus::MaxIterations;
  std::vector<TraceRow> trace;
};

const char* to_string(FlowStatus s);

/// Preconditioned projected gradient descent on E_{H,ε}: iterates
/// u ← Π(u - τ d) with d the preconditioned tangent gradient, re-tracking the
/// enclosed volume with every accepted step.
CriticalPointRecord descend(const MapField& u0, double tracked_volume0, double H, double eps,
                            const FlowConfig& cfg);

/// CSV serialization of a record's per-iteration trace
/// (iteration, D, D_eps, V, E, grad_norm).
std::string energy_trace_csv(const CriticalPointRecord& record);

/// Shared solver for (ε²·SᵀM⁻¹S + S + M) d = g or M d = g, factored once per
/// (mesh, eps, kind).
class StepSolver {
 public:
  StepSolver(const SphereMesh& mesh, double eps, Preconditioner kind);
  ~StepSolver();
  StepSolver(StepSolver&&) noexcept;
  MatX solve(const MatX& rhs) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cmcflow
