#include <doctest.h>

#include "cmcflow/diagnostics.hpp"
#include "cmcflow/flow.hpp"
#include "cmcflow/minmax.hpp"
#include "cmcflow/ply.hpp"

#include <cmath>
#include <numbers>

using namespace cmcflow;

namespace {
constexpr double kPi = std::numbers::pi;
std::shared_ptr<MetricModel> metric() {
  static std::shared_ptr<MetricModel> g = round_s3();
  return g;
}

// Bubble map: equator precomposed with the Möbius dilation of the domain,
// evaluated in closed form (the equator is an identity on the first factor).
MapField bubble_map(const SphereMesh& m, double lambda) {
  MapField u{&m, metric(), MatX(m.num_vertices(), 4)};
  for (int i = 0; i < m.num_vertices(); ++i) {
    const Vec3 y = mobius_dilate_domain(m.vertices.row(i).transpose(), lambda);
    u.values.row(i) << y[0], y[1], y[2], 0.0;
  }
  return u;
}
}  // namespace

TEST_CASE("concentration scan basics") {
  const auto& m = cached_icosphere(4);
  const double r = 0.02, eta0 = 0.3;

  const auto quiet = concentration_scan(constant_map(m, metric(), Vec4::Unit(3)), 0.0, r, eta0);
  CHECK(quiet.flagged.empty());
  CHECK(quiet.max_local_energy == doctest::Approx(0.0));

  const MapField eq = equator_map(m, metric());
  const auto flat = concentration_scan(eq, 0.0, r, eta0);
  CHECK(flat.flagged.empty());
  // Density 2 over a ball of radius 4r: roughly 2π(4r)² ≈ 0.04.
  CHECK(flat.max_local_energy < 0.15);
  CHECK(flat.max_local_energy > 0.0);
  // Local energies never exceed the global energy.
  CHECK(flat.local_energies.maxCoeff() <= 2.0 * perturbed_energy(eq, 0.0) + 1e-9);

  CHECK_THROWS_AS(concentration_scan(eq, 0.1, 0.02, eta0), std::invalid_argument);
}

TEST_CASE("factor-50 bubble is flagged at its concentration pole") {
  const auto& m = cached_icosphere(4);
  const MapField bubble = bubble_map(m, 50.0);
  const auto rep = concentration_scan(bubble, 0.0, 0.02, 0.3);
  REQUIRE(!rep.flagged.empty());
  // Energy concentrates where the dilation expands: the south pole.
  CHECK(m.vertices(rep.argmax_center, 2) < -0.9);
}

TEST_CASE("blow-up rescaling recovers a conformal patch of energy eta0/3") {
  const auto& m = cached_icosphere(6);
  const double lambda = 50.0;
  const MapField bubble = bubble_map(m, lambda);
  const auto rep = concentration_scan(bubble, 0.0, 0.02, 0.3);
  REQUIRE(!rep.flagged.empty());

  const auto patch = blowup_rescale(bubble, rep.argmax_center, 0.5, 0.0, 0.3, 0.0, 48);
  CHECK(patch.energy == doctest::Approx(0.1).epsilon(0.05));
  CHECK(patch.rescaled_eps == 0.0);
  CHECK(patch.hopf < 0.1);

  // rescaled_eps is exact arithmetic.
  const auto patch_eps = blowup_rescale(bubble, rep.argmax_center, 0.5, 0.001, 0.3, 0.0, 32);
  CHECK(patch_eps.rescaled_eps == 0.001 / patch_eps.t_scale);

  CHECK_THROWS_AS(
      blowup_rescale(constant_map(m, metric(), Vec4::Unit(3)), 0, 0.5, 0.0, 0.3, 0.0, 24),
      NoConcentrationError);
}

TEST_CASE("morse index of the constant map is zero") {
  const auto& m = cached_icosphere(2);
  const MapField u = constant_map(m, metric(), Vec4::Unit(3));
  const auto rep = morse_index(u, 1.0, 0.1, 6, IndexForm::SecondVariation);
  CHECK(rep.index == 0);
  CHECK(!rep.criticality_warning);
  for (int j = 0; j < rep.eigenvalues.size(); ++j) {
    CHECK(rep.eigenvalues[j] > -1e-8);
    CHECK(rep.residuals[j] < 1e-8);
  }
}

TEST_CASE("geodesic spheres have weighted-area index 1, nullity 3, bottom eigenvalue -2") {
  for (int level : {3, 4}) {
    const auto& m = cached_icosphere(level);
    for (double r : {kPi / 6.0, kPi / 4.0, kPi / 3.0}) {
      const MapField u = geodesic_sphere_map(m, metric(), r);
      // Oracle mean curvature from the residual-minimizing closed form.
      const CmcResidual a0 = cmc_residual(u, 0.0);
      const CmcResidual a1 = cmc_residual(u, 1.0);
      const MatX b = a0.field - a1.field;
      double ab = 0.0, bb = 0.0;
      for (int i = 0; i < u.num_vertices(); ++i) {
        ab += m.mass[i] * a0.field.row(i).dot(b.row(i));
        bb += m.mass[i] * b.row(i).squaredNorm();
      }
      const double h_star = ab / bb;

      const auto rep = morse_index(u, h_star, 0.0, 6, IndexForm::WeightedArea);
      CHECK(rep.index == 1);
      CHECK(rep.nullity == 3);
      CHECK(rep.eigenvalues[0] == doctest::Approx(-2.0).epsilon(0.05));
      for (int j = 0; j < rep.residuals.size(); ++j) CHECK(rep.residuals[j] < 1e-8);
    }
  }
}

TEST_CASE("equator second-variation spectrum at H = 0") {
  const auto& m = cached_icosphere(3);
  const MapField u = equator_map(m, metric());
  const auto rep = morse_index(u, 0.0, 0.0, 8, IndexForm::SecondVariation);
  CHECK(rep.index >= 1);
  CHECK(rep.eigenvalues[0] == doctest::Approx(-2.0).epsilon(0.05));
  for (int j = 0; j < rep.residuals.size(); ++j) CHECK(rep.residuals[j] < 1e-8);
  // The bottom eigenfield points along the constant normal e4.
  const int nv = u.num_vertices();
  double normal_mass = 0.0, total_mass = 0.0;
  for (int i = 0; i < nv; ++i) {
    const Vec4 v = rep.eigenfields.col(0).segment<4>(4 * i);
    normal_mass += m.mass[i] * v[3] * v[3];
    total_mass += m.mass[i] * v.squaredNorm();
  }
  CHECK(normal_mass / total_mass > 0.99);
}

TEST_CASE("index comparison between the two forms") {
  const auto& m = cached_icosphere(3);

  const MapField c0 = constant_map(m, metric(), Vec4::Unit(0));
  const auto trivial = index_comparison_check(c0, 0.7, 6);
  CHECK(trivial.holds);
  CHECK(trivial.b_index == 0);
  CHECK(trivial.e_index == 0);

  const MapField eq = equator_map(m, metric());
  const auto at_eq = index_comparison_check(eq, 0.0, 6);
  CHECK(at_eq.b_index == 1);
  CHECK(at_eq.holds);

  const MapField gs = geodesic_sphere_map(m, metric(), kPi / 4.0);
  const auto at_gs = index_comparison_check(gs, 2.0, 6);
  CHECK(at_gs.b_index == 1);
  CHECK(at_gs.e_index >= 1);
  CHECK(at_gs.holds);

  // Cross-check at a finer level.
  const auto finer = index_comparison_check(equator_map(cached_icosphere(4), metric()), 0.0, 6);
  CHECK(finer.b_index == 1);
  CHECK(finer.holds);
}

TEST_CASE("energy bound saturation") {
  for (int level : {4, 5}) {
    const auto& m = cached_icosphere(level);
    const auto eq = energy_bound_check(equator_map(m, metric()), 0.0, 2.0);
    CHECK(eq.holds);
    CHECK(eq.ratio == doctest::Approx(1.0).epsilon(0.02));

    const auto gs = energy_bound_check(geodesic_sphere_map(m, metric(), kPi / 4.0), 2.0, 4.0);
    CHECK(gs.holds);
    CHECK(gs.ratio == doctest::Approx(1.0).epsilon(0.02));
  }
  // Saturation tightens under refinement.
  const double gap4 =
      std::abs(1.0 - energy_bound_check(equator_map(cached_icosphere(4), metric()), 0.0, 2.0).ratio);
  const double gap5 =
      std::abs(1.0 - energy_bound_check(equator_map(cached_icosphere(5), metric()), 0.0, 2.0).ratio);
  CHECK(gap5 < gap4);

  const auto c0 = energy_bound_check(constant_map(cached_icosphere(3), metric(), Vec4::Unit(1)),
                                     0.0, 2.0);
  CHECK(c0.holds);
}

TEST_CASE("index transfer under a small H step (logged, not asserted)") {
  // The equator is critical at H = 0; a short climbing mountain pass at
  // H = 0.1 re-converges the nearby critical point.
  const auto& m = cached_icosphere(3);
  const double H = 0.1;
  MinMaxConfig mm;
  mm.outer_iterations = 60;
  mm.grad_tol = 5e-4;
  mm.flow.grad_tol = 1e-7;
  auto [sw, mrec] = mountain_pass(latitude_sweepout(m, metric(), 24), H, 0.0, mm);
  const auto rep = morse_index(sw.slices[mrec.argmax], H, 0.0, 6, IndexForm::SecondVariation);
  MESSAGE("index after H-step 0 -> 0.1: " << rep.index << " (minmax status " << mrec.status
                                          << ", |g| " << mrec.argmax_grad_norm << ")");
  CHECK(rep.eigenvalues.size() == 6);
}

TEST_CASE("index report bookkeeping") {
  const auto& m = cached_icosphere(3);
  const MapField u = geodesic_sphere_map(m, metric(), kPi / 4.0);
  const auto rep = morse_index(u, 2.0, 0.0, 5, IndexForm::WeightedArea);
  CHECK(rep.index + rep.nullity <= 5);
  for (int j = 1; j < rep.eigenvalues.size(); ++j) {
    CHECK(rep.eigenvalues[j] >= rep.eigenvalues[j - 1]);
  }
}
