#include "cmcflow/flow.hpp"

#include <Eigen/SparseCholesky>

#include <cstdio>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cmcflow {

void FlowConfig::validate() const {
  if (!(grad_tol > 0.0)) throw std::invalid_argument("grad_tol must be positive");
  if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0)) {
    throw std::invalid_argument("armijo shrink factor must lie in (0,1)");
  }
  if (!(collapse_threshold > 0.0)) throw std::invalid_argument("collapse threshold must be positive");
  if (!(max_displacement > 0.0)) throw std::invalid_argument("max displacement must be positive");
}

const char* to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::Converged: return "converged";
    case FlowStatus::MaxIterations: return "max-iter";
    case FlowStatus::CollapsedToConstant: return "collapsed-to-constant";
  }
  return "unknown";
}

struct StepSolver::Impl {
  Eigen::SimplicialLDLT<SpMat> solver;
  bool identity_mass = false;
  VecX mass;
};

StepSolver::StepSolver(const SphereMesh& mesh, double eps, Preconditioner kind)
    : impl_(std::make_unique<Impl>()) {
  if (kind == Preconditioner::Mass) {
    impl_->identity_mass = true;
    impl_->mass = mesh.mass;
    return;
  }
  SpMat K = mesh.stiffness;
  if (eps > 0.0) K = K + SpMat(eps * eps * mesh.bilaplacian);
  SpMat M(mesh.num_vertices(), mesh.num_vertices());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(mesh.num_vertices());
  for (int i = 0; i < mesh.num_vertices(); ++i) t.emplace_back(i, i, mesh.mass[i]);
  M.setFromTriplets(t.begin(), t.end());
  K = K + M;
  impl_->solver.compute(K);
  if (impl_->solver.info() != Eigen::Success) {
    throw std::runtime_error("step preconditioner factorization failed");
  }
}

StepSolver::~StepSolver() = default;
StepSolver::StepSolver(StepSolver&&) noexcept = default;

MatX StepSolver::solve(const MatX& rhs) const {
  if (impl_->identity_mass) {
    return rhs.array().colwise() / impl_->mass.array();
  }
  MatX out(rhs.rows(), rhs.cols());
  for (int c = 0; c < rhs.cols(); ++c) out.col(c) = impl_->solver.solve(rhs.col(c));
  return out;
}

namespace {

// Volume of a step u ⟶ Π(u - τ d), substepped to respect the locality bound.
double step_increment(const MapField& u, const MapField& next, const FlowConfig& cfg) {
  return volume_increment_safe(u, next, cfg.delta0, cfg.volume_gauss);
}

MapField stepped(const MapField& u, const MatX& d, double tau) {
  MapField out{u.mesh, u.metric, u.values - tau * d};
  out.reproject();
  return out;
}

}  // namespace

CriticalPointRecord descend(const MapField& u0, double tracked_volume0, double H, double eps,
                            const FlowConfig& cfg) {
  cfg.validate();
  CriticalPointRecord rec;
  rec.H = H;
  rec.eps = eps;
  rec.map = u0;
  rec.map.reproject();

  StepSolver solver(*u0.mesh, eps, cfg.preconditioner);

  double volume = tracked_volume0;
  Gradient g = gradient(rec.map, H, eps);
  EnergyBreakdown eb = tracked_energy(rec.map, volume, H, eps);
  double step = cfg.initial_step;

  MatX best_values = rec.map.values;
  double best_grad = g.tangent_norm;
  double best_volume = volume;

  auto push_trace = [&](int it) {
    if (cfg.record_trace) {
      rec.trace.push_back({it, eb.dirichlet, eb.d_eps, volume, eb.total, g.tangent_norm});
    }
  };
  push_trace(0);

  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    if (g.tangent_norm <= cfg.grad_tol) {
      rec.status = FlowStatus::Converged;
      break;
    }
    if (eb.d_eps < cfg.collapse_threshold) {
      rec.status = FlowStatus::CollapsedToConstant;
      break;
    }

    MatX d = solver.solve(g.tangent);
    for (int i = 0; i < d.rows(); ++i) {
      const Vec4 y = rec.map.at(i);
      const Vec4 v = d.row(i).transpose();
      d.row(i) = (v - y.dot(v) * y).transpose();
    }
    double slope = (g.tangent.array() * d.array()).sum();
    if (!(slope > 0.0)) {
      // Preconditioned direction lost descent (numerical); fall back to the
      // mass-scaled gradient.
      d = g.tangent.array().colwise() / u0.mesh->mass.array();
      slope = (g.tangent.array() * d.array()).sum();
    }
    const double max_disp = d.rowwise().norm().maxCoeff();
    double tau = std::min(step, cfg.max_displacement / std::max(max_disp, 1e-30));

    bool accepted = false;
    for (int bt = 0; bt < cfg.max_backtracks; ++bt) {
      MapField trial = stepped(rec.map, d, tau);
      const double inc = step_increment(rec.map, trial, cfg);
      const EnergyBreakdown trial_eb = tracked_energy(trial, volume + inc, H, eps);
      const double needed = (cfg.step_rule == StepRule::Armijo)
                                ? eb.total - cfg.armijo_c1 * tau * slope
                                : eb.total;
      if (trial_eb.total <= needed) {
        rec.map = std::move(trial);
        volume += inc;
        eb = trial_eb;
        accepted = true;
        if (cfg.step_rule == StepRule::Armijo) {
          step = std::min(cfg.initial_step, tau / cfg.armijo_shrink);
        }
        break;
      }
      tau *= cfg.armijo_shrink;
    }
    g = gradient(rec.map, H, eps);
    push_trace(it + 1);
    if (g.tangent_norm < best_grad) {
      best_grad = g.tangent_norm;
      best_values = rec.map.values;
      best_volume = volume;
    }
    if (!accepted) {
      rec.status = FlowStatus::MaxIterations;
      it += 1;
      break;
    }
  }
  if (it == cfg.max_iterations) rec.status = FlowStatus::MaxIterations;

  if (cfg.return_best_gradient && best_grad < g.tangent_norm) {
    rec.map.values = best_values;
    volume = best_volume;
    g = gradient(rec.map, H, eps);
    eb = tracked_energy(rec.map, volume, H, eps);
    if (g.tangent_norm <= cfg.grad_tol) rec.status = FlowStatus::Converged;
  }

  rec.iterations = it;
  rec.grad_norm = g.tangent_norm;
  rec.energy = eb;
  const auto cres = cmc_residual(rec.map, H);
  rec.cmc_residual_norm = cres.norm;
  rec.hopf_residual_norm = hopf_residual(rec.map).norm;
  return rec;
}

std::string energy_trace_csv(const CriticalPointRecord& record) {
  std::ostringstream out;
  out << "iteration,D,D_eps,V,E,grad_norm\n";
  char buf[192];
  for (const auto& row : record.trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.iteration,
                  row.dirichlet, row.d_eps, row.volume, row.energy, row.grad_norm);
    out << buf;
  }
  return out.str();
}

}  // namespace cmcflow
