#include "cmcflow_cli/commands.hpp"

#include "cmcflow/diagnostics.hpp"
#include "cmcflow/ply.hpp"
#include "cmcflow/record_io.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

namespace cmcflow::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  out << text;
}

fs::path prepare_output(const RunConfig& cfg) {
  fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  // Timestamps live here and only here, so data outputs stay reproducible.
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  json meta{{"wall_clock_unix_ms",
             std::chrono::duration_cast<std::chrono::milliseconds>(now).count()}};
  write_text(dir / "run_meta.json", meta.dump(2) + "\n");
  return dir;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

MinMaxConfig minmax_config(const RunConfig& cfg) {
  MinMaxConfig mm = cfg.minmax;
  mm.flow = cfg.flow;
  mm.threads = cfg.threads;
  return mm;
}

void write_sweepout_checkpoint(const Sweepout& sw, const fs::path& dir) {
  fs::create_directories(dir);
  json ledger;
  ledger["slice_count"] = sw.size();
  ledger["tracked_volumes"] = sw.tracked_volumes;
  ledger["degree"] = sw.degree();
  std::vector<std::string> files;
  for (int k = 0; k < sw.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "slice_%04d.ply", k);
    write_map_ply(sw.slices[k], (dir / name).string());
    files.emplace_back(name);
  }
  ledger["slices"] = files;
  write_text(dir / "volumes.json", ledger.dump(2) + "\n");
}

CriticalPointRecord extract_critical_point(const Sweepout& sw, int argmax, double H, double eps,
                                           const RunConfig& cfg) {
  // Mountain-pass saddles cannot be chased below the string tolerance by pure
  // descent; keep the best-gradient iterate.
  FlowConfig flow = cfg.flow;
  flow.grad_tol = std::max(cfg.flow.grad_tol, cfg.minmax.grad_tol);
  flow.max_iterations = std::min(cfg.flow.max_iterations, 200);
  flow.return_best_gradient = true;
  return descend(sw.slices[argmax], sw.tracked_volumes[argmax], H, eps, flow);
}

void emit_critical_point(const CriticalPointRecord& rec, const fs::path& dir,
                         const std::string& stem) {
  write_map_ply(rec.map, (dir / (stem + ".ply")).string());
  write_text(dir / (stem + ".json"), to_json(rec, stem + ".ply") + "\n");
  write_text(dir / (stem + "_trace.csv"), energy_trace_csv(rec));
}

MapField initial_map(const RunConfig& cfg, const FlowArgs& args,
                     std::shared_ptr<const MetricModel> metric, double* volume0) {
  *volume0 = args.tracked_volume;
  if (!args.resume.empty()) {
    std::ifstream in(args.resume);
    if (!in) throw std::ios_base::failure("cannot open checkpoint " + args.resume);
    json j = json::parse(in);
    *volume0 = j.at("tracked_volume").get<double>();
    const fs::path map_path = fs::path(args.resume).parent_path() /
                              j.at("map_file").get<std::string>();
    return read_map_ply(map_path.string(), metric);
  }
  if (!args.input_map.empty()) {
    return read_map_ply(args.input_map, metric);
  }
  const SphereMesh& mesh = cached_icosphere(cfg.mesh_level);
  const std::string& init = args.init;
  const auto colon = init.find(':');
  const std::string name = init.substr(0, colon);
  const double param = colon == std::string::npos ? 0.0 : std::stod(init.substr(colon + 1));
  MapField u = [&]() {
    if (name == "equator") return equator_map(mesh, metric);
    if (name == "latitude") return latitude_map(mesh, metric, param);
    if (name == "geodesic") return geodesic_sphere_map(mesh, metric, param);
    if (name == "constant") return constant_map(mesh, metric, Vec4::Unit(3));
    if (name == "random") return random_smooth_map(mesh, metric, cfg.seed, param);
    throw ConfigError("unknown flow initializer '" + init + "'");
  }();
  if (args.noise > 0.0) {
    const TangentField psi = random_reparametrization_field(u, cfg.seed + 1);
    u.values += args.noise * psi.vectors;
    u.reproject();
  }
  return u;
}

}  // namespace

int cmd_sweepout(const RunConfig& cfg) {
  cfg.validate();
  const fs::path dir = prepare_output(cfg);
  auto metric = cfg.make_metric();
  const SphereMesh& mesh = cached_icosphere(cfg.mesh_level);
  const double H = cfg.h_schedule.front();
  const double eps = cfg.eps_schedule.front();

  Sweepout sw = latitude_sweepout(mesh, metric, cfg.slice_count);
  std::string csv = "t,D,D_eps,V,E\n";
  for (int k = 0; k < sw.size(); ++k) {
    const double t = static_cast<double>(k) / (sw.size() - 1);
    const EnergyBreakdown b = tracked_energy(sw.slices[k], sw.tracked_volumes[k], H, eps);
    csv += fmt(t) + "," + fmt(b.dirichlet) + "," + fmt(b.d_eps) + "," + fmt(b.tracked_volume) +
           "," + fmt(b.total) + "\n";
  }
  write_text(dir / "sweepout_profile.csv", csv);
  write_sweepout_checkpoint(sw, dir / "sweepout");
  std::cout << "sweepout: " << sw.size() << " slices, degree " << sw.degree() << "\n";
  return 0;
}

Sweepout load_sweepout_checkpoint(const std::string& dir,
                                  std::shared_ptr<const MetricModel> metric) {
  std::ifstream in(fs::path(dir) / "volumes.json");
  if (!in) throw std::ios_base::failure("cannot open " + dir + "/volumes.json");
  const json ledger = json::parse(in);
  Sweepout sw;
  for (const auto& name : ledger.at("slices")) {
    sw.slices.push_back(read_map_ply((fs::path(dir) / name.get<std::string>()).string(), metric));
  }
  sw.tracked_volumes = ledger.at("tracked_volumes").get<std::vector<double>>();
  if (sw.slices.empty() || sw.tracked_volumes.size() != sw.slices.size()) {
    throw std::runtime_error("sweepout checkpoint in " + dir + " is inconsistent");
  }
  return sw;
}

int cmd_minmax(const RunConfig& cfg, const std::string& resume_sweepout) {
  cfg.validate();
  const fs::path dir = prepare_output(cfg);
  auto metric = cfg.make_metric();
  const SphereMesh& mesh = cached_icosphere(cfg.mesh_level);
  const MinMaxConfig mm = minmax_config(cfg);

  Sweepout sw = resume_sweepout.empty()
                    ? latitude_sweepout(mesh, metric, cfg.slice_count)
                    : load_sweepout_checkpoint(resume_sweepout, metric);
  const double H = cfg.h_schedule.front();

  // ε-continuation with warm restarts.
  for (size_t i = 0; i < cfg.eps_schedule.size(); ++i) {
    const double eps = cfg.eps_schedule[i];
    auto [next, rec] = mountain_pass(sw, H, eps, mm);
    sw = std::move(next);
    const std::string stem = "minmax_eps" + std::to_string(i);
    write_text(dir / (stem + ".json"), to_json(rec) + "\n");
    CriticalPointRecord cp = extract_critical_point(sw, rec.argmax, H, eps, cfg);
    emit_critical_point(cp, dir, "critical_point_eps" + std::to_string(i));
    std::cout << "minmax eps=" << eps << ": omega=" << rec.omega << " status=" << rec.status
              << " extracted D=" << cp.energy.dirichlet << " status=" << to_string(cp.status)
              << "\n";
  }
  write_sweepout_checkpoint(sw, dir / "sweepout_final");

  // H-continuation chain at the final ε, warm-started re-solves, with the
  // Dirichlet energies logged against the a-priori bound 8π/c₀.
  if (cfg.h_schedule.size() > 1) {
    const double eps = cfg.eps_schedule.back();
    std::string csv = "H,D,D_eps,bound,ratio\n";
    for (size_t k = 1; k < cfg.h_schedule.size(); ++k) {
      const double Hk = cfg.h_schedule[k];
      auto [next, rec] = mountain_pass(sw, Hk, eps, mm);
      sw = std::move(next);
      CriticalPointRecord cp = extract_critical_point(sw, rec.argmax, Hk, eps, cfg);
      emit_critical_point(cp, dir, "critical_point_H" + std::to_string(k));
      const double c0 = 2.0 + 0.5 * Hk * Hk;
      const double bound = 8.0 * M_PI / c0;
      csv += fmt(Hk) + "," + fmt(cp.energy.dirichlet) + "," + fmt(cp.energy.d_eps) + "," +
             fmt(bound) + "," + fmt(cp.energy.dirichlet / bound) + "\n";
    }
    write_text(dir / "h_continuation.csv", csv);
  }
  return 0;
}

int cmd_hsweep(const RunConfig& cfg) {
  cfg.validate();
  const fs::path dir = prepare_output(cfg);
  auto metric = cfg.make_metric();
  const SphereMesh& mesh = cached_icosphere(cfg.mesh_level);
  const Sweepout base = latitude_sweepout(mesh, metric, cfg.slice_count);
  const auto rows = omega_over_h_scan(cfg.h_schedule, cfg.eps_schedule.front(), base,
                                      minmax_config(cfg));
  write_text(dir / "hsweep.csv", scan_table_csv(rows));
  for (const auto& r : rows) {
    std::cout << "H=" << r.H << " omega=" << r.omega << " omega/H=" << r.omega_over_h << "\n";
  }
  return 0;
}

int cmd_flow(const RunConfig& cfg, const FlowArgs& args) {
  cfg.validate();
  const fs::path dir = prepare_output(cfg);
  auto metric = cfg.make_metric();
  double volume0 = 0.0;
  const MapField u0 = initial_map(cfg, args, metric, &volume0);
  const double H = cfg.h_schedule.front();
  const double eps = cfg.eps_schedule.front();
  const CriticalPointRecord rec = descend(u0, volume0, H, eps, cfg.flow);
  emit_critical_point(rec, dir, "flow_result");
  json checkpoint{{"map_file", "flow_result.ply"},
                  {"tracked_volume", rec.energy.tracked_volume},
                  {"H", H},
                  {"eps", eps},
                  {"iterations", rec.iterations}};
  write_text(dir / "checkpoint.json", checkpoint.dump(2) + "\n");
  std::cout << "flow: status=" << to_string(rec.status) << " D_eps=" << rec.energy.d_eps
            << " |g|=" << rec.grad_norm << " iters=" << rec.iterations << "\n";
  return rec.status == FlowStatus::MaxIterations ? 3 : 0;
}

int cmd_diagnose(const RunConfig& cfg, const DiagnoseArgs& args) {
  cfg.validate();
  const fs::path dir = prepare_output(cfg);
  auto metric = cfg.make_metric();
  const MapField u = read_map_ply(args.map_file, metric);

  if (!args.record_file.empty()) {
    std::ifstream in(args.record_file);
    if (!in) throw std::ios_base::failure("cannot open record " + args.record_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    revalidate_record(parse_record_json(ss.str()), u);
  }

  const double H = args.H, eps = args.eps;
  json out;
  out["H"] = H;
  out["eps"] = eps;
  out["dirichlet"] = dirichlet(u);
  out["d_eps"] = perturbed_energy(u, eps);
  out["grad_norm"] = gradient(u, H, eps).tangent_norm;
  out["cmc_residual_norm"] = cmc_residual(u, H).norm;
  const HopfResidual hopf = hopf_residual(u);
  out["hopf_residual_norm"] = hopf.norm;
  out["hopf_degenerate"] = hopf.degenerate;

  const double scan_r = std::max(cfg.diagnose_scan_radius, eps);
  const ConcentrationReport scan = concentration_scan(u, eps, scan_r, cfg.diagnose_eta0);
  out["concentration"] = json::parse(to_json(scan));

  const IndexReport b_form =
      morse_index(u, H, eps, cfg.diagnose_eigencount, IndexForm::WeightedArea,
                  cfg.diagnose_null_tol);
  out["index_weighted_area"] = json::parse(to_json(b_form));
  {
    std::vector<std::string> names;
    for (int j = 0; j < b_form.eigenvalues.size(); ++j) {
      names.push_back("mode" + std::to_string(j));
    }
    write_vertex_attributes_ply(*u.mesh, b_form.eigenfields, names,
                                (dir / "weighted_area_eigenfields.ply").string());
  }
  if (u.metric->embedded_round()) {
    const IndexReport e_form =
        morse_index(u, H, eps, cfg.diagnose_eigencount, IndexForm::SecondVariation,
                    cfg.diagnose_null_tol);
    out["index_second_variation"] = json::parse(to_json(e_form));
    // Bottom eigenfield as four ambient components per vertex.
    MatX bottom(u.num_vertices(), 4);
    for (int i = 0; i < u.num_vertices(); ++i) {
      bottom.row(i) = e_form.eigenfields.col(0).segment<4>(4 * i).transpose();
    }
    write_vertex_attributes_ply(*u.mesh, bottom, {"f0", "f1", "f2", "f3"},
                                (dir / "second_variation_bottom_eigenfield.ply").string());
    const IndexComparison comparison = index_comparison_check(u, H, cfg.diagnose_eigencount);
    out["index_comparison"] = json{{"holds", comparison.holds},
                                   {"b_index", comparison.b_index},
                                   {"e_index", comparison.e_index}};
  }
  const double c0 = args.c0 > 0.0 ? args.c0 : 2.0 + 0.5 * H * H;
  const EnergyBound bound = energy_bound_check(u, H, c0);
  out["energy_bound"] = json{{"holds", bound.holds},
                             {"dirichlet", bound.dirichlet},
                             {"bound", bound.bound},
                             {"ratio", bound.ratio},
                             {"c0", c0}};
  write_text(dir / "diagnostics.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_export(const RunConfig& cfg, const ExportArgs& args) {
  cfg.validate();
  auto metric = cfg.make_metric();
  const MapField u = read_map_ply(args.map_file, metric);
  const int nv = u.num_vertices();
  MatX out3(nv, 3);

  if (args.mode == "slice") {
    out3 = u.values.leftCols<3>();
  } else if (args.mode == "stereographic") {
    // Projection from -e4; the pole must stay clear of the image.
    MatX vals = u.values;
    const double clearance = 1e-6;
    auto pole_hit = [&](const MatX& v) {
      double worst = 2.0;
      for (int i = 0; i < nv; ++i) worst = std::min(worst, 1.0 + v(i, 3));
      return worst < clearance;
    };
    if (pole_hit(vals)) {
      if (!args.auto_rotate) {
        throw NumericalError("map hits the stereographic pole and auto-rotate is off");
      }
      // Deterministic search for a clear pole direction among a fixed grid of
      // rotations of the e3-e4 plane.
      bool fixed = false;
      for (int step = 1; step <= 16 && !fixed; ++step) {
        const double ang = step * (M_PI / 17.0);
        Mat4 R = Mat4::Identity();
        R(2, 2) = std::cos(ang);
        R(2, 3) = -std::sin(ang);
        R(3, 2) = std::sin(ang);
        R(3, 3) = std::cos(ang);
        MatX rotated = u.values * R.transpose();
        if (!pole_hit(rotated)) {
          vals = std::move(rotated);
          fixed = true;
        }
      }
      if (!fixed) throw NumericalError("no pole-free rotation found for stereographic export");
    }
    for (int i = 0; i < nv; ++i) {
      const double denom = 1.0 + vals(i, 3);
      out3.row(i) = vals.row(i).head<3>() / denom;
    }
  } else {
    throw ConfigError("export mode must be 'stereographic' or 'slice'");
  }

  const std::string output = args.output.empty() ? (args.map_file + ".r3.ply") : args.output;
  write_r3_ply(out3, u.mesh->faces, output);
  std::cout << "exported " << output << "\n";
  return 0;
}

int run_guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const PlyError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace cmcflow::cli
