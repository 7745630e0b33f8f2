#pragma once

#include "cmcflow/energy.hpp"

#include <string>
#include <vector>

namespace cmcflow {

struct ConcentrationReport {
  double radius = 0.0;  // scan radius r; balls have radius 4r
  double eta0 = 0.0;
  VecX local_energies;        // per center vertex: ∫_{B_4r} ε²|Δu|² + |∇u|²
  std::vector<int> flagged;   // centers with local energy > eta0
  double max_local_energy = 0.0;
  int argmax_center = -1;
};

/// Local-energy scan over all vertex-centered balls of radius 4r.
/// Requires eps ≤ r.
ConcentrationReport concentration_scan(const MapField& u, double eps, double r, double eta0);

struct NoConcentrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BlowupPatch {
  int grid_n = 0;
  double t_scale = 0.0;
  double rescaled_eps = 0.0;
  double energy = 0.0;          // rescaled-patch energy over the unit chart disk
  double dirichlet_energy = 0.0;
  double hopf = 0.0;            // grid Hopf residual, normalized by patch Dirichlet energy
  double cmc_residual = 0.0;    // grid CMC residual at the same H
  MatX values;                  // (n·n) x 4, row-major grid over [-1,1]²
};

/// Rescales u around the given center through the exponential chart so the
/// patch energy over the unit chart disk equals eta0/3 (bisection on the
/// resampled patch energy, the continuous surrogate of the vertex-ball scan).
BlowupPatch blowup_rescale(const MapField& u, int center_vertex, double t_upper, double eps,
                           double eta0, double H, int grid_n = 64);

enum class IndexForm { SecondVariation, WeightedArea };

struct IndexReport {
  int index = 0;    // eigenvalues below -null_tol
  int nullity = 0;  // eigenvalues within ±null_tol
  VecX eigenvalues;
  MatX eigenfields;  // δ²E: (4V) x k ambient tangent fields; B_H: V x k scalar fields
  VecX residuals;
  IndexForm form = IndexForm::SecondVariation;
  bool criticality_warning = false;
};

/// Morse index via the smallest-k spectrum of δ²E_{H,ε} (tangent fields,
/// L² pairing) or of the comparison form B_H (scalar fields).
IndexReport morse_index(const MapField& u, double H, double eps, int k, IndexForm which,
                        double null_tol = 0.25);

struct IndexComparison {
  bool holds = false;
  int b_index = 0;
  int e_index = 0;
};

/// Checks index(B_H) ≤ index(δ²E_H) at ε = 0.  Failures are findings for the
/// caller to log, not errors.
IndexComparison index_comparison_check(const MapField& u, double H, int k = 8);

struct EnergyBound {
  bool holds = false;
  double dirichlet = 0.0;
  double bound = 0.0;   // 8π/c0
  double ratio = 0.0;   // D/(8π/c0)
};

EnergyBound energy_bound_check(const MapField& u, double H, double c0);

/// Vertex-wise weight of the B_H form: (|∇u|²/2)(H²/2 + Ric(n,n)), zeroed
/// near branch points (|∇u|² below 1e-8 of the mean).
VecX weighted_area_weight(const MapField& u, double H);

}  // namespace cmcflow
