#include <doctest.h>

#include "emnet/params.hpp"

using namespace emn;

TEST_CASE("defaults are the base parameter table") {
  const SimulationParams p;
  CHECK(p.width == 200);
  CHECK(p.height == 200);
  CHECK(p.population_pct == 5.0);
  CHECK(p.sensor_angle_deg == 15.0);
  CHECK(p.sensor_offset == 15.0);
  CHECK(p.rotation_angle_deg == 45.0);
  CHECK(p.sensor_width == 1);
  CHECK(p.deposit == 5.0);
  CHECK(p.damp == 0.1);
  CHECK(p.step_size == 1.0);
  CHECK(p.node_stimulus_scale == 100.0);
  CHECK(p.target_population() == 2000);
  CHECK_NOTHROW(p.validate());
}

namespace {
std::string field_of(const SimulationParams& p) {
  try {
    p.validate();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}
}  // namespace

TEST_CASE("validation reports the offending field") {
  SimulationParams p;
  p.sensor_angle_deg = 400;
  CHECK(field_of(p) == "params.sensor_angle_deg");
  p = {};
  p.population_pct = 0;
  CHECK(field_of(p) == "params.population_pct");
  p = {};
  p.sensor_width = 2;
  CHECK(field_of(p) == "params.sensor_width");
  p = {};
  p.damp = 1.0;
  CHECK(field_of(p) == "params.damp");
  p = {};
  p.width = 2;
  CHECK(field_of(p) == "params.width");
  p = {};
  p.sensor_offset = 0;
  CHECK(field_of(p) == "params.sensor_offset");
  p = {};
  p.step_size = -1;
  CHECK(field_of(p) == "params.step_size");
  p = {};
  p.deposit = 0;
  CHECK(field_of(p) == "params.deposit");
  p = {};
  p.trail_display_cap = 0;
  CHECK(field_of(p) == "params.trail_display_cap");
}

TEST_CASE("short parameter names") {
  SimulationParams p;
  CHECK(set_param_by_name(p, "SA", 45));
  CHECK(p.sensor_angle_deg == 45);
  CHECK(set_param_by_name(p, "SW", 3));
  CHECK(p.sensor_width == 3);
  CHECK(set_param_by_name(p, "depT", 7));
  CHECK(get_param_by_name(p, "depT") == 7);
  CHECK_FALSE(set_param_by_name(p, "nope", 1));
  CHECK_FALSE(is_settable_param("width"));
  CHECK_THROWS_AS(set_param_by_name(p, "SW", 2.5), ConfigError);
  CHECK_THROWS_AS(set_param_by_name(p, "SW", 1e300), ConfigError);
  CHECK_THROWS_AS(get_param_by_name(p, "nope"), ConfigError);
  CHECK(boundary_from_string("fixed") == Boundary::fixed);
  CHECK_THROWS_AS(boundary_from_string("torus"), ConfigError);
}
