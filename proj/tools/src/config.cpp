#include "cmcflow_cli/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace cmcflow::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x != std::floor(x)) throw ConfigError("key '" + key + "': expected an integer");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected a boolean");
}

}  // namespace

std::vector<double> parse_schedule(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(to_double("schedule", item));
  }
  if (out.empty()) throw ConfigError("empty schedule");
  return out;
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "mesh_level") cfg.mesh_level = to_int(key, value);
  else if (key == "metric") cfg.metric_spec = value;
  else if (key == "metric.tube_radius") cfg.metric_tube_radius = to_double(key, value);
  else if (key == "h_schedule") cfg.h_schedule = parse_schedule(value);
  else if (key == "eps_schedule") cfg.eps_schedule = parse_schedule(value);
  else if (key == "slice_count") cfg.slice_count = to_int(key, value);
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_double(key, value));
  else if (key == "threads") cfg.threads = to_int(key, value);
  else if (key == "output_dir") cfg.output_dir = value;
  else if (key == "flow.grad_tol") cfg.flow.grad_tol = to_double(key, value);
  else if (key == "flow.max_iterations") cfg.flow.max_iterations = to_int(key, value);
  else if (key == "flow.collapse_threshold") cfg.flow.collapse_threshold = to_double(key, value);
  else if (key == "flow.max_displacement") cfg.flow.max_displacement = to_double(key, value);
  else if (key == "flow.delta0") cfg.flow.delta0 = to_double(key, value);
  else if (key == "flow.armijo_c1") cfg.flow.armijo_c1 = to_double(key, value);
  else if (key == "flow.armijo_shrink") cfg.flow.armijo_shrink = to_double(key, value);
  else if (key == "flow.initial_step") cfg.flow.initial_step = to_double(key, value);
  else if (key == "flow.volume_gauss") cfg.flow.volume_gauss = to_int(key, value);
  else if (key == "flow.step_rule") {
    if (value == "armijo") cfg.flow.step_rule = StepRule::Armijo;
    else if (value == "fixed") cfg.flow.step_rule = StepRule::Fixed;
    else throw ConfigError("flow.step_rule must be 'armijo' or 'fixed'");
  } else if (key == "flow.preconditioner") {
    if (value == "h2") cfg.flow.preconditioner = Preconditioner::SobolevH2;
    else if (value == "mass") cfg.flow.preconditioner = Preconditioner::Mass;
    else throw ConfigError("flow.preconditioner must be 'h2' or 'mass'");
  } else if (key == "minmax.outer_iterations") cfg.minmax.outer_iterations = to_int(key, value);
  else if (key == "minmax.descent_steps") cfg.minmax.descent_steps_per_slice = to_int(key, value);
  else if (key == "minmax.grad_tol") cfg.minmax.grad_tol = to_double(key, value);
  else if (key == "minmax.climb") cfg.minmax.climb = to_bool(key, value);
  else if (key == "minmax.climb_after") cfg.minmax.climb_after = to_int(key, value);
  else if (key == "minmax.climb_step") cfg.minmax.climb_step = to_double(key, value);
  else if (key == "diagnose.eta0") cfg.diagnose_eta0 = to_double(key, value);
  else if (key == "diagnose.scan_radius") cfg.diagnose_scan_radius = to_double(key, value);
  else if (key == "diagnose.eigencount") cfg.diagnose_eigencount = to_int(key, value);
  else if (key == "diagnose.null_tol") cfg.diagnose_null_tol = to_double(key, value);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text, RunConfig cfg) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void RunConfig::validate() const {
  if (mesh_level < 0 || mesh_level > 8) throw ConfigError("mesh_level must lie in [0, 8]");
  if (slice_count < 3) throw ConfigError("slice_count must be at least 3");
  for (size_t i = 0; i < eps_schedule.size(); ++i) {
    const bool last = i + 1 == eps_schedule.size();
    if (eps_schedule[i] < 0.0 || (!last && eps_schedule[i] <= 0.0)) {
      throw ConfigError("eps_schedule must be positive (0 allowed as final entry)");
    }
    if (i > 0 && eps_schedule[i] >= eps_schedule[i - 1]) {
      throw ConfigError("eps_schedule must be strictly decreasing");
    }
  }
  for (double h : h_schedule) {
    if (h < 0.0) throw ConfigError("H values must be nonnegative");
  }
  try {
    flow.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

std::shared_ptr<MetricModel> RunConfig::make_metric() const {
  auto with_tube = [this](std::shared_ptr<MetricModel> m) {
    m->tube_radius = metric_tube_radius;
    return m;
  };
  if (metric_spec == "round") return with_tube(round_s3());
  const auto colon = metric_spec.find(':');
  const std::string name = metric_spec.substr(0, colon);
  const double param = colon == std::string::npos
                           ? 0.0
                           : to_double("metric", metric_spec.substr(colon + 1));
  if (name == "conformal_x4") {
    AmbientScalar phi{
        [param](const Vec4& y) { return param * y[3]; },
        [param](const Vec4&) { return Vec4(0, 0, 0, param); },
        [](const Vec4&) { return Mat4::Zero().eval(); },
    };
    return with_tube(conformal_round(phi));
  }
  if (name == "conformal_const") {
    AmbientScalar phi{
        [param](const Vec4&) { return param; },
        [](const Vec4&) { return Vec4::Zero().eval(); },
        [](const Vec4&) { return Mat4::Zero().eval(); },
    };
    return with_tube(conformal_round(phi));
  }
  throw ConfigError("unknown metric '" + metric_spec + "'");
}

}  // namespace cmcflow::cli
