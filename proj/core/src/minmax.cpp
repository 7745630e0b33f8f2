#include "cmcflow/minmax.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace cmcflow {

void Sweepout::enforce_locality(double delta0) {
  for (size_t i = 1; i < slices.size();) {
    if (linf_distance(slices[i - 1], slices[i]) < delta0) {
      ++i;
      continue;
    }
    MapField mid{slices[i].mesh, slices[i].metric,
                 0.5 * (slices[i - 1].values + slices[i].values)};
    mid.reproject();
    slices.insert(slices.begin() + i, std::move(mid));
  }
  tracked_volumes.assign(slices.size(), 0.0);
}

void Sweepout::reaccumulate_volumes(double delta0, int s_gauss) {
  tracked_volumes.assign(slices.size(), 0.0);
  for (size_t i = 1; i < slices.size(); ++i) {
    tracked_volumes[i] = tracked_volumes[i - 1] +
                         volume_increment_safe(slices[i - 1], slices[i], delta0, s_gauss);
  }
}

bool Sweepout::endpoints_constant(double tol) const {
  auto is_constant = [&](const MapField& u) {
    const auto first = u.values.row(0);
    for (int i = 1; i < u.num_vertices(); ++i) {
      if ((u.values.row(i) - first).norm() > tol) return false;
    }
    return true;
  };
  return is_constant(slices.front()) && is_constant(slices.back());
}

Sweepout latitude_sweepout(const SphereMesh& mesh, std::shared_ptr<const MetricModel> metric,
                           int slice_count) {
  if (slice_count < 3) throw std::invalid_argument("a sweepout needs at least 3 slices");
  Sweepout sw;
  sw.slices.reserve(slice_count);
  for (int k = 0; k < slice_count; ++k) {
    const double t = static_cast<double>(k) / (slice_count - 1);
    sw.slices.push_back(latitude_map(mesh, metric, 2.0 * t - 1.0));
  }
  sw.enforce_locality();
  sw.reaccumulate_volumes();
  return sw;
}

std::pair<int, double> sweepout_max(const Sweepout& sw, double H, double eps) {
  int arg = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < sw.size(); ++k) {
    const double e = perturbed_energy(sw.slices[k], eps) + H * sw.tracked_volumes[k];
    if (e > best + 1e-15) {
      best = e;
      arg = k;
    }
  }
  return {arg, best};
}

namespace {

struct SliceStepResult {
  MapField map;
  double volume_delta = 0.0;
};

// A few Armijo descent steps on one slice, volume re-tracked per step.
SliceStepResult descend_steps(const MapField& u0, double volume0, double H, double eps,
                              const FlowConfig& cfg, const StepSolver& solver, int steps) {
  SliceStepResult out{u0, 0.0};
  double energy = tracked_energy(out.map, volume0, H, eps).total;
  double step = cfg.initial_step;
  for (int s = 0; s < steps; ++s) {
    Gradient g = gradient(out.map, H, eps);
    if (g.tangent_norm <= cfg.grad_tol) break;
    MatX d = solver.solve(g.tangent);
    for (int i = 0; i < d.rows(); ++i) {
      const Vec4 y = out.map.at(i);
      const Vec4 v = d.row(i).transpose();
      d.row(i) = (v - y.dot(v) * y).transpose();
    }
    const double slope = (g.tangent.array() * d.array()).sum();
    if (!(slope > 0.0)) break;
    const double max_disp = d.rowwise().norm().maxCoeff();
    double tau = std::min(step, cfg.max_displacement / std::max(max_disp, 1e-30));
    bool accepted = false;
    for (int bt = 0; bt < cfg.max_backtracks; ++bt) {
      MapField trial{out.map.mesh, out.map.metric, out.map.values - tau * d};
      trial.reproject();
      const double inc = volume_increment_safe(out.map, trial, cfg.delta0, cfg.volume_gauss);
      const double etrial =
          tracked_energy(trial, volume0 + out.volume_delta + inc, H, eps).total;
      if (etrial <= energy - cfg.armijo_c1 * tau * slope) {
        out.map = std::move(trial);
        out.volume_delta += inc;
        energy = etrial;
        accepted = true;
        step = std::min(cfg.initial_step, tau / cfg.armijo_shrink);
        break;
      }
      tau *= cfg.armijo_shrink;
    }
    if (!accepted) break;
  }
  return out;
}

// One climbing step: reverse the path-tangent component of the gradient so the
// argmax slice ascends along the string and descends transversally.
SliceStepResult climb_step(const MapField& u, double volume, const MapField& prev,
                           const MapField& next, double H, double eps, const FlowConfig& cfg,
                           const StepSolver& solver, double climb_step_size) {
  SliceStepResult out{u, 0.0};
  const SphereMesh& mesh = *u.mesh;
  MatX tau_dir = next.values - prev.values;
  for (int i = 0; i < tau_dir.rows(); ++i) {
    const Vec4 y = u.at(i);
    const Vec4 v = tau_dir.row(i).transpose();
    tau_dir.row(i) = (v - y.dot(v) * y).transpose();
  }
  const double tn = l2_norm(mesh, tau_dir);
  if (tn < 1e-14) return out;
  tau_dir /= tn;

  Gradient g = gradient(u, H, eps);
  const double along = (g.tangent.array() * tau_dir.array()).sum();
  MatX g_climb = g.tangent;
  for (int i = 0; i < g_climb.rows(); ++i) {
    g_climb.row(i) -= 2.0 * along * mesh.mass[i] * tau_dir.row(i);
  }
  MatX d = solver.solve(g_climb);
  for (int i = 0; i < d.rows(); ++i) {
    const Vec4 y = u.at(i);
    const Vec4 v = d.row(i).transpose();
    d.row(i) = (v - y.dot(v) * y).transpose();
  }
  const double max_disp = d.rowwise().norm().maxCoeff();
  const double step = std::min(climb_step_size, cfg.max_displacement / std::max(max_disp, 1e-30));
  MapField trial{u.mesh, u.metric, u.values - step * d};
  trial.reproject();
  out.volume_delta = volume_increment_safe(u, trial, cfg.delta0, cfg.volume_gauss);
  out.map = std::move(trial);
  (void)volume;
  return out;
}

void redistribute_range(Sweepout& sw, int lo, int hi) {
  // Arclength reparametrization (mass metric) of slices lo..hi, endpoints kept.
  const int n = hi - lo + 1;
  if (n < 3) return;
  std::vector<double> cum(n, 0.0);
  for (int k = 1; k < n; ++k) {
    cum[k] = cum[k - 1] + l2_distance(sw.slices[lo + k - 1], sw.slices[lo + k]);
  }
  const double total = cum.back();
  if (total < 1e-14) return;
  std::vector<MatX> fresh(n - 2);
  for (int m = 1; m + 1 < n; ++m) {
    const double target = total * m / (n - 1);
    int j = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), target) - cum.begin()) - 1;
    j = std::clamp(j, 0, n - 2);
    const double seg = cum[j + 1] - cum[j];
    const double theta = seg > 1e-30 ? (target - cum[j]) / seg : 0.0;
    fresh[m - 1] =
        (1.0 - theta) * sw.slices[lo + j].values + theta * sw.slices[lo + j + 1].values;
  }
  for (int m = 1; m + 1 < n; ++m) {
    sw.slices[lo + m].values = std::move(fresh[m - 1]);
    sw.slices[lo + m].reproject();
  }
}

}  // namespace

std::pair<Sweepout, MinMaxRecord> mountain_pass(const Sweepout& sw0, double H, double eps,
                                                const MinMaxConfig& cfg) {
  Sweepout sw = sw0;
  if (!sw.endpoints_constant()) throw std::invalid_argument("sweepout endpoints must be constant");
  sw.reaccumulate_volumes(cfg.flow.delta0, cfg.flow.volume_gauss);
  const int degree0 = sw.degree();
  if (degree0 != 1) {
    throw std::runtime_error("sweepout is not admissible: degree " + std::to_string(degree0));
  }

  MinMaxRecord rec;
  rec.H = H;
  rec.eps = eps;
  const int S = sw.size();
  const StepSolver solver(*sw.slices[0].mesh, eps, cfg.flow.preconditioner);
  const int threads = cfg.threads > 0 ? cfg.threads
                                      : std::max(1u, std::thread::hardware_concurrency());
  rec.status = "max-iter";

  for (int outer = 0; outer < cfg.outer_iterations; ++outer) {
    auto [arg, maxE] = sweepout_max(sw, H, eps);
    rec.max_energy_history.push_back(maxE);
    const bool climbing = cfg.climb && outer >= cfg.climb_after;

    {
      const Gradient g = gradient(sw.slices[arg], H, eps);
      rec.argmax_grad_norm = g.tangent_norm;
      if (cfg.verbose) {
        std::printf("[minmax] outer %3d  maxE %.8f  arg %d  |g| %.3e\n", outer, maxE, arg,
                    g.tangent_norm);
      }
      if (g.tangent_norm <= cfg.grad_tol) {
        rec.status = "converged";
        rec.outer_iterations = outer;
        break;
      }
    }

    if (cfg.descent_steps_per_slice == 0 && !climbing) continue;  // nothing to flow

    // (i) descent on interior slices, the argmax slice climbing when enabled.
    std::vector<SliceStepResult> results(S);
    std::atomic<int> cursor{1};
    auto worker = [&]() {
      for (;;) {
        const int k = cursor.fetch_add(1);
        if (k >= S - 1) return;
        if (climbing && k == arg) {
          results[k] = climb_step(sw.slices[k], sw.tracked_volumes[k], sw.slices[k - 1],
                                  sw.slices[k + 1], H, eps, cfg.flow, solver, cfg.climb_step);
        } else {
          results[k] = descend_steps(sw.slices[k], sw.tracked_volumes[k], H, eps, cfg.flow,
                                     solver, cfg.descent_steps_per_slice);
        }
      }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (int k = 1; k < S - 1; ++k) {
      sw.slices[k] = std::move(results[k].map);
    }

    // (ii) redistribution and re-accumulated volumes (never interpolated).
    if (climbing) {
      redistribute_range(sw, 0, arg);
      redistribute_range(sw, arg, S - 1);
    } else {
      redistribute_range(sw, 0, S - 1);
    }
    sw.reaccumulate_volumes(cfg.flow.delta0, cfg.flow.volume_gauss);
    if (sw.degree() != degree0) {
      throw std::runtime_error("sweepout degree changed during mountain pass (was " +
                               std::to_string(degree0) + ", now " + std::to_string(sw.degree()) +
                               ")");
    }
    rec.outer_iterations = outer + 1;
  }

  auto [arg, maxE] = sweepout_max(sw, H, eps);
  rec.omega = maxE;
  rec.argmax = arg;
  rec.d_eps_at_argmax = perturbed_energy(sw.slices[arg], eps);
  rec.argmax_grad_norm = gradient(sw.slices[arg], H, eps).tangent_norm;
  if (rec.argmax_grad_norm <= cfg.grad_tol) rec.status = "converged";
  rec.max_energy_history.push_back(maxE);
  return {std::move(sw), rec};
}

std::vector<ScanRow> omega_over_h_scan(const std::vector<double>& h_grid, double eps,
                                       const Sweepout& base, const MinMaxConfig& cfg) {
  for (size_t i = 0; i < h_grid.size(); ++i) {
    if (h_grid[i] <= 0.0 || (i > 0 && h_grid[i] <= h_grid[i - 1])) {
      throw std::invalid_argument("H grid must be strictly increasing and positive");
    }
  }
  std::vector<ScanRow> rows;
  Sweepout warm = base;
  for (size_t i = 0; i < h_grid.size(); ++i) {
    auto [sw, rec] = mountain_pass(warm, h_grid[i], eps, cfg);
    ScanRow row;
    row.H = h_grid[i];
    row.omega = rec.omega;
    row.omega_over_h = rec.omega / h_grid[i];
    row.argmax = rec.argmax;
    if (i > 0) {
      row.derivative = -(row.omega_over_h - rows.back().omega_over_h) / (row.H - rows.back().H);
    }
    rows.push_back(row);
    warm = std::move(sw);
  }
  return rows;
}

std::vector<GoodSlice> good_slice_extract(const Sweepout& sw, double H, double eps, double alpha,
                                          double C) {
  const auto [arg, omega] = sweepout_max(sw, H, eps);
  (void)arg;
  std::vector<GoodSlice> out;
  for (int k = 1; k + 1 < sw.size(); ++k) {
    const double e = perturbed_energy(sw.slices[k], eps) + H * sw.tracked_volumes[k];
    if (e >= omega - alpha) {
      GoodSlice gs;
      gs.index = k;
      gs.energy = e;
      gs.d_eps = perturbed_energy(sw.slices[k], eps);
      gs.within_bound = gs.d_eps <= C;
      out.push_back(gs);
    }
  }
  return out;
}

std::string scan_table_csv(const std::vector<ScanRow>& rows) {
  std::ostringstream out;
  out << "H,omega,omega_over_H,fd_minus_domega_over_h,argmax\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%d\n", r.H, r.omega, r.omega_over_h,
                  r.derivative, r.argmax);
    out << buf;
  }
  return out.str();
}

}  // namespace cmcflow
