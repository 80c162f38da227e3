#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "emnet/lattice.hpp"
#include "emnet/params.hpp"
#include "emnet/rng.hpp"

namespace emn {

/// A particle agent. Position is continuous; the agent occupies the cell
/// (floor(x), floor(y)). Heading is in degrees, 0 = +x, counter-clockwise.
struct Agent {
  double x = 0.0;
  double y = 0.0;
  double heading_deg = 0.0;
  bool alive = true;

  int cell_x() const noexcept;
  int cell_y() const noexcept;
};

/// Disc-shaped constant trail source. A cell (cx+dx, cy+dy) belongs to the
/// disc iff dx*dx + dy*dy <= radius*radius.
struct NodeSource {
  int id = 0;
  int cx = 0;
  int cy = 0;
  int radius = 2;
  double weight = 0.05;
  bool enabled = true;

  /// Disc cells in row-major order.
  std::vector<std::pair<int, int>> cells() const;
  void validate(const SimulationParams& p) const;

  friend bool operator==(const NodeSource&, const NodeSource&) = default;
};

enum class InitMode { uniform_random, node_restricted, full_coverage };

struct SimulationState {
  SimulationParams params;
  std::vector<Agent> agents;
  BinaryMask occupancy;
  TrailField trail;
  std::vector<NodeSource> nodes;
  std::uint64_t step = 0;
  Rng rng;
  /// Agents waiting to be placed on free node-disc cells.
  std::uint64_t spawn_queue = 0;
  /// The node-injected share of `trail`. Injection and diffusion are linear,
  /// so trail - source_trail is what the agents deposited.
  TrailField source_trail;

  std::size_t living() const noexcept;
  /// Occupancy lattice is exactly the set of living agents' cells.
  bool occupancy_consistent() const;
  const NodeSource* find_node(int id) const noexcept;
  NodeSource* find_node(int id) noexcept;
  /// Smallest id not used by any node.
  int next_node_id() const noexcept;

  // Reused by system_step so diffusion does not allocate.
  TrailField scratch;
  TrailField source_scratch;
  bool source_live = false;
  std::vector<std::uint32_t> order;
};

/// Builds a fresh state. Placement draws: for k = 0..target-1 one `below`
/// draw (partial Fisher-Yates over the candidate cells) then one `heading`
/// draw. Candidates are all cells (uniform_random, full_coverage) or the
/// union of enabled node discs (node_restricted; agents that do not fit are
/// added to the spawn queue).
SimulationState init_population(const SimulationParams& params, InitMode mode,
                                std::vector<NodeSource> nodes, Rng rng);

/// Places a single agent if its cell is free. Returns false otherwise.
bool place_agent(SimulationState& state, double x, double y, double heading_deg);

/// Sensor readings ahead-left, ahead and ahead-right of an agent.
struct SensorReadings {
  double left = 0.0;
  double front = 0.0;
  double right = 0.0;
  bool any_outside = false;
};

SensorReadings read_sensors(const Agent& agent, const TrailField& trail,
                            const SimulationParams& params);

/// Pure rule table on three readings. Consumes one `coin` draw only when both
/// lateral readings exceed the front one.
double decide_heading(double heading_deg, const SensorReadings& s, double rotation_deg, Rng& rng);

/// Sensing stage for one agent: returns the new heading.
double sense(const Agent& agent, const TrailField& trail, const SimulationParams& params,
             Rng& rng);

/// Movement stage for one agent. On success moves, updates occupancy and
/// deposits at the new cell. On failure draws one random heading.
bool attempt_move(Agent& agent, SimulationState& state);

/// out[c] = (1 - damp) * mean of the 3x3 neighbourhood of in[c].
void diffuse(const TrailField& in, TrailField& out, double damp, Boundary boundary);
TrailField diffuse(const TrailField& in, double damp, Boundary boundary);

/// Adds weight * node_stimulus_scale to every cell of each enabled disc.
void inject_nodes(TrailField& trail, std::span<const NodeSource> nodes,
                  const SimulationParams& params);

/// One scheduler pass: shuffle living agents (Fisher-Yates from the back,
/// one `below` draw per position), sense then move each in that order,
/// inject nodes, diffuse, advance the step counter.
void system_step(SimulationState& state);

/// Moves up to `per_node` queued agents onto free cells of each enabled node
/// disc (nodes in id order, cells row-major). One `heading` draw per placed
/// agent. Returns the number placed.
std::uint64_t spawn_from_queue(SimulationState& state, std::uint64_t per_node);

/// Marks an agent dead and frees its cell.
void remove_agent(SimulationState& state, std::size_t index);

/// Drops dead agents from the agent list.
void compact_agents(SimulationState& state);

double normalize_deg(double deg) noexcept;

/// FNV-1a over the bit patterns of the trail values.
std::uint64_t trail_checksum(const TrailField& trail) noexcept;

}  // namespace emn
