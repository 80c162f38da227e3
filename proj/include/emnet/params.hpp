#pragma once

#include <stdexcept>
#include <string>

namespace emn {

/// Raised for any invalid configuration value. `field()` carries the dotted
/// path of the offending key when known (e.g. "params.sensor_angle_deg").
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, std::string field = {})
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class Boundary { periodic, fixed };

const char* to_string(Boundary b) noexcept;
Boundary boundary_from_string(const std::string& s);

/// Agent and lattice knobs. Defaults are the base experiment values
/// (200x200 lattice, 5% population, SA 15, SO 15, RA 45, SW 1, depT 5,
/// damp 0.1); step size defaults to one cell.
struct SimulationParams {
  int width = 200;
  int height = 200;
  double population_pct = 5.0;
  double sensor_angle_deg = 15.0;
  double sensor_offset = 15.0;
  double rotation_angle_deg = 45.0;
  int sensor_width = 1;
  double step_size = 1.0;
  double deposit = 5.0;
  double damp = 0.1;
  Boundary boundary = Boundary::periodic;
  // Fixed boundary only: any sensor outside the lattice forces a right turn.
  bool corner_rule = true;
  double node_stimulus_scale = 100.0;
  double trail_display_cap = 25.0;

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  long long cell_count() const noexcept { return static_cast<long long>(width) * height; }
  /// round(population_pct / 100 * W * H)
  long long target_population() const noexcept;
};

bool operator==(const SimulationParams& a, const SimulationParams& b) noexcept;

/// Names accepted by steering `set_param` and schedule `set_*` actions.
/// Returns false when the name is unknown.
bool set_param_by_name(SimulationParams& p, const std::string& name, double value);
bool is_settable_param(const std::string& name) noexcept;
double get_param_by_name(const SimulationParams& p, const std::string& name);

}  // namespace emn
