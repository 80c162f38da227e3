#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emnet/analysis.hpp"
#include "emnet/model.hpp"
#include "emnet/params.hpp"

namespace emn {

enum class Method { free_run, filamentous_shrinkage, filamentous_foraging, plasmodial_shrinkage };

const char* to_string(Method m) noexcept;
Method method_from_string(const std::string& s);

enum class ActionKind { set_param, enable_node, disable_node, begin_reduction, set_spawn_rate };

/// One scheduled intervention. Serialised as {"step", "action", "value"}
/// where action is one of set_SA, set_RA, set_SO, set_SW, set_SS, set_depT,
/// set_damp, enable_node, disable_node (value = node id), begin_reduction,
/// set_spawn_rate.
struct ScheduleAction {
  std::uint64_t step = 0;
  ActionKind kind = ActionKind::set_param;
  std::string param;  // set_param only: SA, RA, SO, SW, SS, depT or damp
  double value = 0.0;

  std::string action_name() const;
  static ScheduleAction from_name(std::uint64_t step, const std::string& action, double value);

  friend bool operator==(const ScheduleAction&, const ScheduleAction&) = default;
};

/// Steps are non-decreasing; actions sharing a step apply in listed order.
using Schedule = std::vector<ScheduleAction>;

struct ConvergenceOptions {
  std::uint64_t window_steps = 500;
  double rel_tol = 0.02;
  friend bool operator==(const ConvergenceOptions&, const ConvergenceOptions&) = default;
};

struct Scenario {
  SimulationParams params;
  std::vector<NodeSource> nodes;
  Method method = Method::free_run;
  Schedule schedule;
  std::uint64_t seed = 1;
  std::uint64_t max_steps = 10000;
  std::uint64_t metrics_every = 50;
  /// 0 disables frame output.
  std::uint64_t frames_every = 0;
  std::string output_dir = "out";
  bool stop_on_convergence = false;
  AnalysisOptions analysis;
  ConvergenceOptions convergence;

  // Method knobs. Present exactly when the method uses them.
  std::optional<std::uint64_t> spawn_per_node_per_step;  // foraging
  std::optional<double> p_remove;                        // plasmodial
  std::optional<double> target_population_pct;           // plasmodial
  std::optional<std::uint64_t> hole_free_window;         // plasmodial, in steps

  /// Fills knob defaults for the chosen method (foraging: 1 agent per node
  /// per step; plasmodial: p_remove 0.001, target 4%, window 100 steps).
  void fill_method_defaults();
  /// Throws ConfigError with a field path on the first violation.
  void validate() const;
  InitMode init_mode() const noexcept;
};

bool operator==(const AnalysisOptions& a, const AnalysisOptions& b) noexcept;
bool operator==(const Scenario& a, const Scenario& b);

/// True iff skeleton length and cycle count each have a standard deviation
/// of at most rel_tol * |mean| over the samples. Throws std::invalid_argument for fewer
/// than two samples.
bool check_convergence(std::span<const NetworkMetrics> window, double rel_tol);

enum class Termination { max_steps, converged, command };
const char* to_string(Termination t) noexcept;

struct RunResult {
  SimulationState final_state;
  std::vector<NetworkMetrics> metrics;
  Termination termination = Termination::max_steps;
};

enum class PlasmodialPhase { sheet_forming, reducing, done };

/// Steps one scenario: schedule, method hooks, scheduler pass, sampling.
class Runner {
 public:
  explicit Runner(Scenario scenario);
  /// Starts from a caller-built state (hand-seeded configurations).
  Runner(Scenario scenario, SimulationState initial);

  /// One full step. Order: scheduled actions for the current step index,
  /// method hook (foraging spawn, or plasmodial removal then respawn),
  /// system_step, metrics sample when step % metrics_every == 0.
  void advance();

  /// Steps until max_steps, or convergence when stop_on_convergence is set.
  /// `on_step` runs after every advance.
  RunResult run(const std::function<void(const Runner&)>& on_step = {});

  bool converged() const;
  /// Method-specific work is finished and the run may stop on convergence.
  bool settled() const noexcept;
  bool done() const;

  SimulationState& state() noexcept { return state_; }
  const SimulationState& state() const noexcept { return state_; }
  Scenario& scenario() noexcept { return scenario_; }
  const Scenario& scenario() const noexcept { return scenario_; }
  const std::vector<NetworkMetrics>& metrics() const noexcept { return metrics_; }
  PlasmodialPhase plasmodial_phase() const noexcept { return phase_; }
  /// Step at which plasmodial removal began, if it has.
  std::optional<std::uint64_t> reduction_started() const noexcept { return reduction_started_; }
  std::uint64_t removed_total() const noexcept { return removed_total_; }
  std::uint64_t respawned_total() const noexcept { return respawned_total_; }

  /// Samples metrics for the current state and records them.
  const NetworkMetrics& sample();
  void begin_reduction();

 private:
  void apply_scheduled();
  void method_hook();
  void track_phase(const NetworkMetrics& m);

  Scenario scenario_;
  SimulationState state_;
  std::vector<NetworkMetrics> metrics_;
  std::size_t schedule_pos_ = 0;
  PlasmodialPhase phase_ = PlasmodialPhase::sheet_forming;
  std::optional<std::uint64_t> hole_free_since_;
  std::optional<std::uint64_t> reduction_started_;
  std::uint64_t removed_total_ = 0;
  std::uint64_t respawned_total_ = 0;
};

}  // namespace emn
