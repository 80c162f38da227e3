#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "emnet/lattice.hpp"
#include "emnet/model.hpp"

namespace emn {

// Connectivity convention used throughout: 8-connected foreground,
// 4-connected background.

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Skeleton {
  BinaryMask cells;
  /// Skeleton cells with three or more skeletal 8-neighbours.
  std::vector<std::pair<int, int>> junctions;
  /// Skeleton cells with exactly one skeletal 8-neighbour.
  std::vector<std::pair<int, int>> endpoints;
};

struct TopologyCounts {
  int components = 0;
  /// First Betti number: independent loops (= enclosed background holes).
  int cycles = 0;
};

struct AnalysisOptions {
  double threshold_rel = 0.1;
  int junction_window = 8;
  /// Branches from an endpoint to a junction shorter than this are pruned
  /// before length and angle measurement. 0 disables pruning.
  int spur_length = 10;
};

struct NetworkMetrics {
  std::uint64_t step = 0;
  double coverage = 0.0;
  double skeleton_length = 0.0;
  int component_count = 0;
  int cycle_count = 0;
  bool nodes_connected = false;
  double top_decile_mass_share = 0.0;
  double junction_angle_mean = 0.0;
  double junction_angle_stddev = 0.0;
  /// Junctions with three or more branches.
  int junction_count = 0;
  std::uint64_t population = 0;
};

/// Foreground iff trail >= theta_rel * max(trail). All-zero trail gives an
/// empty mask. Requires 0 < theta_rel < 1.
BinaryMask threshold_mask(const TrailField& trail, double theta_rel);
/// Same with an explicit reference peak in place of max(trail).
BinaryMask threshold_mask(const TrailField& trail, double theta_rel, double peak);

/// Peak of the agent-deposited share, max(trail - source_trail), so strong
/// node sources do not wash out the network. Falls back to max(trail) when
/// that share is zero everywhere or the source field is absent.
double network_peak(const TrailField& trail, const TrailField& source_trail);

/// 8-connected component labels (0 = background, 1..count).
Grid<int> label_components(const BinaryMask& mask, int* count);

/// Euler characteristic under 8-connectivity from 2x2 bit-quad counts.
int euler_characteristic(const BinaryMask& mask);

TopologyCounts components_and_cycles(const BinaryMask& mask);

/// A foreground cell whose removal changes neither the foreground 8-component
/// structure nor the background 4-component structure.
bool is_simple_point(const BinaryMask& mask, int x, int y);

/// Junction and endpoint lists for an already unit-width mask.
Skeleton make_skeleton(BinaryMask cells);

/// Topology-preserving thinning: directional passes deleting simple,
/// non-endpoint border cells one at a time until nothing changes.
Skeleton skeletonize(const BinaryMask& mask, int spur_length = 0);

/// Removes endpoint-to-junction branches with at most `max_length` cells.
void prune_spurs(BinaryMask& skeleton, int max_length);

/// Sum over skeletal adjacencies: 1 per orthogonal pair, sqrt(2) per
/// diagonal pair that is not already bridged by an orthogonal corner cell.
double skeleton_length(const Skeleton& skeleton);
double skeleton_length(const BinaryMask& cells);

/// Adjacent-branch angles (degrees) at every junction with three or more
/// branches. Branch direction runs from the junction cluster centroid to
/// the branch cell at graph distance `window_radius` (or the farthest one
/// reached). Throws std::invalid_argument when window_radius < 3.
std::vector<double> junction_angles(const Skeleton& skeleton, int window_radius);

/// Same measurement grouped per junction.
std::vector<std::vector<double>> junction_angle_sets(const Skeleton& skeleton, int window_radius);

/// All enabled node centre cells lie in one foreground component.
bool nodes_connected(const BinaryMask& mask, std::span<const NodeSource> nodes);

double mst_length(std::span<const Point> points);

struct SteinerResult {
  double length = 0.0;
  /// False when the instance is too large and `length` is the MST.
  bool exact = true;
};

/// Steiner minimum tree length for up to five points: closed form for three
/// or fewer, otherwise the minimum over all full Steiner topologies of the
/// optimised tree length.
SteinerResult steiner_length_oracle(std::span<const Point> points);

/// Share of total mass held by the top ceil(N/10) cells. A zero field is
/// treated as uniform.
double top_decile_mass_share(const TrailField& trail);

struct BlobShape {
  bool single_blob = false;
  double radius_ratio = 0.0;
};

/// Throws std::domain_error on an empty occupancy lattice.
BlobShape blob_circularity(const BinaryMask& occupancy);

/// Mask threshold is relative to network_peak of the state's fields. When the
/// trail holds node deposits only, every metric but step and population is
/// zero.
NetworkMetrics compute_metrics(const SimulationState& state, const AnalysisOptions& options);

/// Metrics for a bare trail field, thresholded against max(trail).
NetworkMetrics compute_field_metrics(const TrailField& trail, std::span<const NodeSource> nodes,
                                     const AnalysisOptions& options);
/// Same with an explicit reference peak for the mask.
NetworkMetrics compute_field_metrics(const TrailField& trail, std::span<const NodeSource> nodes,
                                     const AnalysisOptions& options, double peak);

}  // namespace emn
