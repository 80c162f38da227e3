#include "emnet/params.hpp"

#include <cmath>

namespace emn {

const char* to_string(Boundary b) noexcept {
  return b == Boundary::periodic ? "periodic" : "fixed";
}

Boundary boundary_from_string(const std::string& s) {
  if (s == "periodic") return Boundary::periodic;
  if (s == "fixed") return Boundary::fixed;
  throw ConfigError("expected \"periodic\" or \"fixed\", got \"" + s + "\"", "params.boundary");
}

void SimulationParams::validate() const {
  auto need = [](bool ok, const char* field, const char* msg) {
    if (!ok) throw ConfigError(msg, std::string("params.") + field);
  };
  need(width >= 3, "width", "must be >= 3");
  need(height >= 3, "height", "must be >= 3");
  need(std::isfinite(population_pct) && population_pct > 0.0 && population_pct <= 100.0,
       "population_pct", "must be in (0, 100]");
  need(std::isfinite(sensor_angle_deg) && sensor_angle_deg >= 0.0 && sensor_angle_deg < 180.0,
       "sensor_angle_deg", "must be in [0, 180)");
  need(std::isfinite(sensor_offset) && sensor_offset > 0.0, "sensor_offset", "must be > 0");
  need(std::isfinite(rotation_angle_deg), "rotation_angle_deg", "must be finite");
  need(sensor_width >= 1 && sensor_width % 2 == 1, "sensor_width", "must be odd and >= 1");
  need(std::isfinite(step_size) && step_size > 0.0, "step_size", "must be > 0");
  need(std::isfinite(deposit) && deposit > 0.0, "deposit", "must be > 0");
  need(std::isfinite(damp) && damp >= 0.0 && damp < 1.0, "damp", "must be in [0, 1)");
  need(std::isfinite(node_stimulus_scale) && node_stimulus_scale >= 0.0, "node_stimulus_scale",
       "must be >= 0");
  need(std::isfinite(trail_display_cap) && trail_display_cap > 0.0, "trail_display_cap",
       "must be > 0");
}

long long SimulationParams::target_population() const noexcept {
  return std::llround(population_pct / 100.0 * static_cast<double>(cell_count()));
}

bool operator==(const SimulationParams& a, const SimulationParams& b) noexcept {
  return a.width == b.width && a.height == b.height && a.population_pct == b.population_pct &&
         a.sensor_angle_deg == b.sensor_angle_deg && a.sensor_offset == b.sensor_offset &&
         a.rotation_angle_deg == b.rotation_angle_deg && a.sensor_width == b.sensor_width &&
         a.step_size == b.step_size && a.deposit == b.deposit && a.damp == b.damp &&
         a.boundary == b.boundary && a.corner_rule == b.corner_rule &&
         a.node_stimulus_scale == b.node_stimulus_scale &&
         a.trail_display_cap == b.trail_display_cap;
}

namespace {

double* field_for(SimulationParams& p, const std::string& name) {
  if (name == "SA") return &p.sensor_angle_deg;
  if (name == "SO") return &p.sensor_offset;
  if (name == "RA") return &p.rotation_angle_deg;
  if (name == "SS") return &p.step_size;
  if (name == "depT") return &p.deposit;
  if (name == "damp") return &p.damp;
  return nullptr;
}

}  // namespace

bool is_settable_param(const std::string& name) noexcept {
  return name == "SA" || name == "SO" || name == "RA" || name == "SW" || name == "SS" ||
         name == "depT" || name == "damp";
}

bool set_param_by_name(SimulationParams& p, const std::string& name, double value) {
  if (name == "SW") {
    if (value != std::floor(value)) throw ConfigError("must be an integer", "SW");
    if (std::abs(value) > 1.0e6) throw ConfigError("out of range", "SW");
    p.sensor_width = static_cast<int>(value);
    return true;
  }
  double* f = field_for(p, name);
  if (f == nullptr) return false;
  *f = value;
  return true;
}

double get_param_by_name(const SimulationParams& p, const std::string& name) {
  if (name == "SW") return p.sensor_width;
  double* f = field_for(const_cast<SimulationParams&>(p), name);
  if (f == nullptr) throw ConfigError("unknown parameter", name);
  return *f;
}

}  // namespace emn
