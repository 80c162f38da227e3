#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "emnet/analysis.hpp"
#include "emnet/model.hpp"
#include "emnet/scenario.hpp"

namespace emn {

using json = nlohmann::json;

/// Raised for file system and format problems (as opposed to bad values).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- scenario files ------------------------------------------------------

/// Strict parse: unknown keys and wrong types raise ConfigError with the
/// dotted field path. Missing keys take their defaults, then method knob
/// defaults are filled and the scenario is validated.
Scenario scenario_from_json(const json& j);
/// Every field is written, so the output parses back to an equal Scenario.
json scenario_to_json(const Scenario& s);

/// Throws IoError when the file cannot be read, ConfigError on bad JSON or
/// bad values.
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& s, const std::filesystem::path& path);

json params_to_json(const SimulationParams& p);
json node_to_json(const NodeSource& n);
/// Parses {x, y[, radius][, weight][, id][, enabled]}. `path` prefixes error
/// fields. The id defaults to `default_id`.
NodeSource node_from_json(const json& j, const std::string& path, int default_id);

// ---- frames --------------------------------------------------------------

/// byte = round_half_up(min(v, cap) / cap * 255). Throws ConfigError when
/// cap <= 0.
std::vector<std::uint8_t> quantize_trail(const TrailField& trail, double cap);

/// Binary PGM (P5, maxval 255) of the quantised trail.
void write_frame(const TrailField& trail, const std::filesystem::path& path, double cap);
/// Agent overlay PGM: occupied cells 255, everything else 0.
void write_agent_overlay(const BinaryMask& occupancy, const std::filesystem::path& path);

struct GrayImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint8_t> pixels;
};

void write_pgm(const std::filesystem::path& path, int width, int height,
               std::span<const std::uint8_t> pixels);
/// Reads P5 (maxval <= 255) or P2 images; comments are skipped.
GrayImage read_pgm(const std::filesystem::path& path);

/// Pixel values as trail units (pixel / maxval * cap).
TrailField image_to_trail(const GrayImage& img, double cap);

// ---- metrics CSV ---------------------------------------------------------

/// Frozen column order of the metrics CSV.
const std::vector<std::string>& metrics_columns();
std::string metrics_csv_header();
/// Floats use %.6g; booleans are 0/1.
std::string metrics_csv_row(const NetworkMetrics& m);
/// Parses a file written by MetricsCsvWriter. Throws IoError on a header
/// mismatch or malformed row.
std::vector<NetworkMetrics> read_metrics_csv(const std::filesystem::path& path);

class MetricsCsvWriter {
 public:
  /// Creates (truncates) the file and writes the header row.
  explicit MetricsCsvWriter(const std::filesystem::path& path);
  ~MetricsCsvWriter();
  MetricsCsvWriter(const MetricsCsvWriter&) = delete;
  MetricsCsvWriter& operator=(const MetricsCsvWriter&) = delete;

  void append(const NetworkMetrics& m);
  void flush();

 private:
  std::FILE* f_ = nullptr;
};

json metrics_to_json(const NetworkMetrics& m);

// ---- state snapshots -----------------------------------------------------

/// Full state including RNG, so a snapshot can be resumed bit-exactly.
json state_to_json(const SimulationState& s);
SimulationState state_from_json(const json& j);
void save_state(const SimulationState& s, const std::filesystem::path& path);
SimulationState load_state(const std::filesystem::path& path);

/// Small bootstrap view: step, size, params, nodes, population.
json state_summary_json(const SimulationState& s);

// ---- JSON helpers --------------------------------------------------------

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace emn
