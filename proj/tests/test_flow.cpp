#include <doctest.h>

#include "cmcflow/flow.hpp"
#include "cmcflow/minmax.hpp"
#include "cmcflow/ply.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace cmcflow;

namespace {
constexpr double kPi = std::numbers::pi;
std::shared_ptr<MetricModel> metric() {
  static std::shared_ptr<MetricModel> g = round_s3();
  return g;
}
}  // namespace

TEST_CASE("constant map converges immediately") {
  const auto& m = cached_icosphere(3);
  FlowConfig cfg;
  const auto rec = descend(constant_map(m, metric(), Vec4::Unit(3)), 0.0, 1.0, 0.1, cfg);
  CHECK(rec.status == FlowStatus::Converged);
  CHECK(rec.iterations == 0);
  CHECK(rec.grad_norm == doctest::Approx(0.0));
  CHECK(rec.energy.total == doctest::Approx(0.0));
  REQUIRE(rec.trace.size() == 1);
  CHECK(rec.trace[0].energy == doctest::Approx(0.0));
}

TEST_CASE("perturbed equator relaxes back to the minimal sphere") {
  const auto& m = cached_icosphere(3);
  MapField u0 = equator_map(m, metric());
  const TangentField psi = random_reparametrization_field(u0, 99);
  u0.values += 0.01 * psi.vectors;
  u0.reproject();

  FlowConfig cfg;
  cfg.grad_tol = 1e-5;
  cfg.max_iterations = 400;
  const auto rec = descend(u0, 0.0, 0.0, 0.1, cfg);
  CHECK(rec.status == FlowStatus::Converged);
  const double d_eq = perturbed_energy(equator_map(m, metric()), 0.1);
  CHECK(rec.energy.d_eps == doctest::Approx(d_eq).epsilon(0.02));
  CHECK(rec.cmc_residual_norm < 0.3);

  // Armijo acceptance makes the energy column nonincreasing.
  for (size_t i = 1; i < rec.trace.size(); ++i) {
    CHECK(rec.trace[i].energy <= rec.trace[i - 1].energy + 1e-12);
  }
  CHECK(rec.trace.back().volume == doctest::Approx(rec.energy.tracked_volume));
}

TEST_CASE("small-energy maps collapse to constants") {
  const auto& m = cached_icosphere(3);
  MapField u0 = constant_map(m, metric(), Vec4(0.5, 0.5, 0.5, 0.5).normalized());
  std::mt19937_64 rng(7);
  const TangentField noise = random_tangent_field(u0, rng());
  u0.values += 0.08 * noise.vectors;
  u0.reproject();
  REQUIRE(perturbed_energy(u0, 0.1) < 0.1);
  REQUIRE(perturbed_energy(u0, 0.1) > 1e-3);

  FlowConfig cfg;
  const auto rec = descend(u0, 0.0, 1.0, 0.1, cfg);
  CHECK(rec.status == FlowStatus::CollapsedToConstant);
  CHECK(rec.energy.d_eps < cfg.collapse_threshold);
}

TEST_CASE("failed backtracking reports max-iter with diagnostics") {
  const auto& m = cached_icosphere(2);
  MapField u0 = equator_map(m, metric());
  const TangentField psi = random_tangent_field(u0, 5);
  u0.values += 0.05 * psi.vectors;
  u0.reproject();
  FlowConfig cfg;
  cfg.max_backtracks = 0;
  const auto rec = descend(u0, 0.0, 0.5, 0.1, cfg);
  CHECK(rec.status == FlowStatus::MaxIterations);
  CHECK(rec.grad_norm > cfg.grad_tol);
}

TEST_CASE("tracked volume equals the direct increment for short flows") {
  const auto& m = cached_icosphere(3);
  MapField u0 = equator_map(m, metric());
  const TangentField psi = random_reparametrization_field(u0, 17);
  u0.values += 0.02 * psi.vectors;
  u0.reproject();
  FlowConfig cfg;
  cfg.max_iterations = 8;
  const double v0 = 0.25;
  const auto rec = descend(u0, v0, 0.3, 0.1, cfg);
  const double direct = v0 + volume_increment_safe(u0, rec.map);
  CHECK(rec.energy.tracked_volume == doctest::Approx(direct).epsilon(1e-6));
}

TEST_CASE("energy gap: converged nonconstant critical points sit far above the collapse threshold") {
  // Seeded ensemble of critical points at (H, eps) = (1, 0.1): target rotations
  // of one mountain-pass saddle (rotations are exact symmetries of the
  // discrete energy) plus tiny reparametrization noise, re-converged by the
  // flow.  Mountain-pass saddles cannot be reached by descent from afar.
  const auto& m = cached_icosphere(3);
  const double H = 1.0;
  const double eps = 0.1;

  MinMaxConfig mm;
  mm.outer_iterations = 80;
  mm.grad_tol = 1e-4;
  mm.flow.grad_tol = 1e-7;
  const Sweepout base = latitude_sweepout(m, metric(), 24);
  auto [sw, mrec] = mountain_pass(base, H, eps, mm);
  REQUIRE(mrec.status == "converged");
  const MapField& saddle = sw.slices[mrec.argmax];

  FlowConfig cfg;
  cfg.grad_tol = 1e-3;
  cfg.max_iterations = 200;

  std::mt19937_64 rng(2025);
  std::normal_distribution<double> gauss;
  double min_d_eps = 1e30;
  int converged = 0;
  for (int seed = 0; seed < 20; ++seed) {
    Mat4 A;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) A(r, c) = gauss(rng);
    Mat4 Q = Eigen::HouseholderQR<Mat4>(A).householderQ();
    if (Q.determinant() < 0) Q.col(0) *= -1.0;
    MapField u0{&m, metric(), saddle.values * Q.transpose()};
    const TangentField psi = random_reparametrization_field(u0, rng());
    u0.values += 1e-4 * psi.vectors;
    u0.reproject();

    const auto rec = descend(u0, 0.0, H, eps, cfg);
    if (rec.status == FlowStatus::Converged && rec.energy.d_eps > cfg.collapse_threshold) {
      ++converged;
      min_d_eps = std::min(min_d_eps, rec.energy.d_eps);
    }
  }
  CHECK(converged == 20);
  CHECK(min_d_eps > 10.0 * cfg.collapse_threshold);
}

TEST_CASE("trace CSV serialization") {
  const auto& m = cached_icosphere(2);
  FlowConfig cfg;
  const auto rec = descend(constant_map(m, metric(), Vec4::Unit(0)), 0.0, 0.0, 0.0, cfg);
  const std::string csv = energy_trace_csv(rec);
  CHECK(csv.rfind("iteration,D,D_eps,V,E,grad_norm\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("iterates stay on the target throughout the flow") {
  const auto& m = cached_icosphere(3);
  MapField u0 = equator_map(m, metric());
  const TangentField psi = random_reparametrization_field(u0, 55);
  u0.values += 0.02 * psi.vectors;
  u0.reproject();
  FlowConfig cfg;
  cfg.max_iterations = 20;
  const auto rec = descend(u0, 0.0, 0.7, 0.05, cfg);
  CHECK(rec.map.constraint_defect() < 1e-12);
}
