#include "cmcflow/record_io.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace cmcflow {

using nlohmann::json;

namespace {

json breakdown_json(const EnergyBreakdown& b) {
  return json{{"dirichlet", b.dirichlet},
              {"biharmonic_part", b.biharmonic_part},
              {"d_eps", b.d_eps},
              {"tracked_volume", b.tracked_volume},
              {"total", b.total},
              {"H", b.H},
              {"eps", b.eps}};
}

}  // namespace

std::string to_json(const EnergyBreakdown& b, int indent) {
  return breakdown_json(b).dump(indent);
}

std::string to_json(const CriticalPointRecord& rec, const std::string& map_file, int indent) {
  json j{{"H", rec.H},
         {"eps", rec.eps},
         {"energy", breakdown_json(rec.energy)},
         {"grad_norm", rec.grad_norm},
         {"iterations", rec.iterations},
         {"cmc_residual_norm", rec.cmc_residual_norm},
         {"hopf_residual_norm", rec.hopf_residual_norm},
         {"status", to_string(rec.status)},
         {"map_file", map_file}};
  return j.dump(indent);
}

std::string to_json(const MinMaxRecord& rec, int indent) {
  json j{{"H", rec.H},
         {"eps", rec.eps},
         {"omega", rec.omega},
         {"argmax_slice", rec.argmax},
         {"d_eps_at_argmax", rec.d_eps_at_argmax},
         {"argmax_grad_norm", rec.argmax_grad_norm},
         {"outer_iterations", rec.outer_iterations},
         {"status", rec.status},
         {"max_energy_history", rec.max_energy_history}};
  return j.dump(indent);
}

std::string to_json(const ConcentrationReport& rep, int indent) {
  json j{{"radius", rep.radius},
         {"eta0", rep.eta0},
         {"max_local_energy", rep.max_local_energy},
         {"argmax_center", rep.argmax_center},
         {"flagged", rep.flagged},
         {"scanned_centers", rep.local_energies.size()}};
  return j.dump(indent);
}

std::string to_json(const IndexReport& rep, int indent) {
  json j{{"form", rep.form == IndexForm::SecondVariation ? "second_variation" : "weighted_area"},
         {"index", rep.index},
         {"nullity", rep.nullity},
         {"eigenvalues", std::vector<double>(rep.eigenvalues.data(),
                                             rep.eigenvalues.data() + rep.eigenvalues.size())},
         {"eigen_residuals", std::vector<double>(rep.residuals.data(),
                                                 rep.residuals.data() + rep.residuals.size())},
         {"criticality_warning", rep.criticality_warning}};
  return j.dump(indent);
}

std::string to_json(const BlowupPatch& patch, int indent) {
  json j{{"grid_n", patch.grid_n},
         {"t_scale", patch.t_scale},
         {"rescaled_eps", patch.rescaled_eps},
         {"energy", patch.energy},
         {"dirichlet_energy", patch.dirichlet_energy},
         {"hopf", patch.hopf},
         {"cmc_residual", patch.cmc_residual}};
  return j.dump(indent);
}

StoredRecord parse_record_json(const std::string& text) {
  const json j = json::parse(text);
  StoredRecord r;
  r.H = j.at("H").get<double>();
  r.eps = j.at("eps").get<double>();
  r.grad_norm = j.at("grad_norm").get<double>();
  r.cmc_residual_norm = j.at("cmc_residual_norm").get<double>();
  r.hopf_residual_norm = j.at("hopf_residual_norm").get<double>();
  r.total_energy = j.at("energy").at("total").get<double>();
  r.tracked_volume = j.at("energy").at("tracked_volume").get<double>();
  r.status = j.at("status").get<std::string>();
  r.map_file = j.value("map_file", "");
  return r;
}

void revalidate_record(const StoredRecord& stored, const MapField& u, double tol) {
  auto close = [&](double a, double b, const char* what) {
    if (std::abs(a - b) > tol * (1.0 + std::abs(b))) {
      throw std::runtime_error(std::string("stored record does not re-validate: ") + what);
    }
  };
  close(cmc_residual(u, stored.H).norm, stored.cmc_residual_norm, "cmc residual");
  close(hopf_residual(u).norm, stored.hopf_residual_norm, "hopf residual");
  close(gradient(u, stored.H, stored.eps).tangent_norm, stored.grad_norm, "gradient norm");
  const EnergyBreakdown b = tracked_energy(u, stored.tracked_volume, stored.H, stored.eps);
  close(b.total, stored.total_energy, "total energy");
}

}  // namespace cmcflow
