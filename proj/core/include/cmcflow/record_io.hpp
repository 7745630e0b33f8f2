#pragma once

#include "cmcflow/diagnostics.hpp"
#include "cmcflow/flow.hpp"
#include "cmcflow/minmax.hpp"

#include <string>

namespace cmcflow {

/// JSON serialization of result records.  Map values themselves travel as PLY;
/// the JSON carries the scalar summary plus the map file name when written by
/// the CLI.
std::string to_json(const EnergyBreakdown& b, int indent = 2);
std::string to_json(const CriticalPointRecord& rec, const std::string& map_file, int indent = 2);
std::string to_json(const MinMaxRecord& rec, int indent = 2);
std::string to_json(const ConcentrationReport& rep, int indent = 2);
std::string to_json(const IndexReport& rep, int indent = 2);
std::string to_json(const BlowupPatch& patch, int indent = 2);

struct StoredRecord {
  double H = 0.0;
  double eps = 0.0;
  double grad_norm = 0.0;
  double cmc_residual_norm = 0.0;
  double hopf_residual_norm = 0.0;
  double total_energy = 0.0;
  double tracked_volume = 0.0;
  std::string status;
  std::string map_file;
};

StoredRecord parse_record_json(const std::string& text);

/// Recomputes the residuals and energies of a stored record against its map
/// and checks they match to `tol`; throws on mismatch.
void revalidate_record(const StoredRecord& stored, const MapField& u, double tol = 1e-9);

}  // namespace cmcflow
