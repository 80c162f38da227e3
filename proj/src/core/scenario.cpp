#include "emnet/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace emn {

const char* to_string(Method m) noexcept {
  switch (m) {
    case Method::free_run: return "free_run";
    case Method::filamentous_shrinkage: return "filamentous_shrinkage";
    case Method::filamentous_foraging: return "filamentous_foraging";
    case Method::plasmodial_shrinkage: return "plasmodial_shrinkage";
  }
  return "free_run";
}

Method method_from_string(const std::string& s) {
  for (Method m : {Method::free_run, Method::filamentous_shrinkage, Method::filamentous_foraging,
                   Method::plasmodial_shrinkage}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown method \"" + s + "\"", "method");
}

const char* to_string(Termination t) noexcept {
  switch (t) {
    case Termination::max_steps: return "max_steps";
    case Termination::converged: return "converged";
    case Termination::command: return "command";
  }
  return "max_steps";
}

std::string ScheduleAction::action_name() const {
  switch (kind) {
    case ActionKind::set_param: return "set_" + param;
    case ActionKind::enable_node: return "enable_node";
    case ActionKind::disable_node: return "disable_node";
    case ActionKind::begin_reduction: return "begin_reduction";
    case ActionKind::set_spawn_rate: return "set_spawn_rate";
  }
  return {};
}

ScheduleAction ScheduleAction::from_name(std::uint64_t step, const std::string& action, double value) {
  ScheduleAction a;
  a.step = step;
  a.value = value;
  if (action.rfind("set_", 0) == 0 && is_settable_param(action.substr(4))) {
    a.kind = ActionKind::set_param;
    a.param = action.substr(4);
  } else if (action == "enable_node") {
    a.kind = ActionKind::enable_node;
  } else if (action == "disable_node") {
    a.kind = ActionKind::disable_node;
  } else if (action == "begin_reduction") {
    a.kind = ActionKind::begin_reduction;
  } else if (action == "set_spawn_rate") {
    a.kind = ActionKind::set_spawn_rate;
  } else {
    throw ConfigError("unknown action \"" + action + "\"", "schedule");
  }
  return a;
}

void Scenario::fill_method_defaults() {
  if (method == Method::filamentous_foraging && !spawn_per_node_per_step) spawn_per_node_per_step = 1;
  if (method == Method::plasmodial_shrinkage) {
    if (!p_remove) p_remove = 0.001;
    if (!target_population_pct) target_population_pct = 4.0;
    if (!hole_free_window) hole_free_window = 100;
  }
}

InitMode Scenario::init_mode() const noexcept {
  switch (method) {
    case Method::filamentous_foraging: return InitMode::node_restricted;
    case Method::plasmodial_shrinkage: return InitMode::full_coverage;
    default: return InitMode::uniform_random;
  }
}

void Scenario::validate() const {
  params.validate();
  std::set<int> ids;
  for (const auto& n : nodes) {
    n.validate(params);
    if (!ids.insert(n.id).second) throw ConfigError("duplicate node id", "nodes");
  }
  if (metrics_every == 0) throw ConfigError("must be >= 1", "metrics_every");
  if (!(analysis.threshold_rel > 0.0 && analysis.threshold_rel < 1.0)) {
    throw ConfigError("must be in (0, 1)", "analysis.threshold_rel");
  }
  if (analysis.junction_window < 3) throw ConfigError("must be >= 3", "analysis.junction_window");
  if (analysis.spur_length < 0) throw ConfigError("must be >= 0", "analysis.spur_length");
  if (convergence.window_steps < 2 * metrics_every) {
    throw ConfigError("window must cover at least two samples", "convergence.window_steps");
  }
  if (!(convergence.rel_tol >= 0.0)) throw ConfigError("must be >= 0", "convergence.rel_tol");

  const bool foraging = method == Method::filamentous_foraging;
  const bool plasmodial = method == Method::plasmodial_shrinkage;
  if (spawn_per_node_per_step.has_value() != foraging) {
    throw ConfigError(foraging ? "required by filamentous_foraging"
                               : "only valid for filamentous_foraging",
                      "spawn_per_node_per_step");
  }
  for (auto [present, field] : {std::pair{p_remove.has_value(), "p_remove"},
                                std::pair{target_population_pct.has_value(), "target_population_pct"},
                                std::pair{hole_free_window.has_value(), "hole_free_window"}}) {
    if (present != plasmodial) {
      throw ConfigError(plasmodial ? "required by plasmodial_shrinkage"
                                   : "only valid for plasmodial_shrinkage",
                        field);
    }
  }
  if (plasmodial) {
    if (params.population_pct <= 40.0) {
      throw ConfigError("plasmodial shrinkage needs population_pct > 40", "params.population_pct");
    }
    if (!(*p_remove >= 0.0 && *p_remove <= 1.0)) throw ConfigError("must be in [0, 1]", "p_remove");
    if (!(*target_population_pct > 0.0 && *target_population_pct < params.population_pct)) {
      throw ConfigError("must be in (0, population_pct)", "target_population_pct");
    }
  }

  SimulationParams p = params;
  std::uint64_t last = 0;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& a = schedule[i];
    const std::string at = "schedule[" + std::to_string(i) + "]";
    if (a.step < last) throw ConfigError("steps must be non-decreasing", at + ".step");
    last = a.step;
    switch (a.kind) {
      case ActionKind::set_param:
        try {
          set_param_by_name(p, a.param, a.value);
          p.validate();
        } catch (const ConfigError& e) {
          throw ConfigError(e.what(), at + ".value");
        }
        break;
      case ActionKind::enable_node:
      case ActionKind::disable_node:
        if (!ids.count(static_cast<int>(a.value)) || a.value != std::floor(a.value)) {
          throw ConfigError("no node with this id", at + ".value");
        }
        break;
      case ActionKind::begin_reduction:
        if (!plasmodial) throw ConfigError("only valid for plasmodial_shrinkage", at + ".action");
        break;
      case ActionKind::set_spawn_rate:
        if (!foraging) throw ConfigError("only valid for filamentous_foraging", at + ".action");
        if (!(a.value >= 0.0) || a.value != std::floor(a.value)) {
          throw ConfigError("must be a non-negative integer", at + ".value");
        }
        break;
    }
  }
}

bool operator==(const AnalysisOptions& a, const AnalysisOptions& b) noexcept {
  return a.threshold_rel == b.threshold_rel && a.junction_window == b.junction_window &&
         a.spur_length == b.spur_length;
}

bool operator==(const Scenario& a, const Scenario& b) {
  return a.params == b.params && a.nodes == b.nodes && a.method == b.method &&
         a.schedule == b.schedule && a.seed == b.seed && a.max_steps == b.max_steps &&
         a.metrics_every == b.metrics_every && a.frames_every == b.frames_every &&
         a.output_dir == b.output_dir && a.stop_on_convergence == b.stop_on_convergence &&
         a.analysis == b.analysis && a.convergence == b.convergence &&
         a.spawn_per_node_per_step == b.spawn_per_node_per_step && a.p_remove == b.p_remove &&
         a.target_population_pct == b.target_population_pct &&
         a.hole_free_window == b.hole_free_window;
}

bool check_convergence(std::span<const NetworkMetrics> window, double rel_tol) {
  if (window.size() < 2) throw std::invalid_argument("convergence window needs >= 2 samples");
  // Population standard deviation against the window mean.
  auto stable = [&](auto value_of) {
    const double n = static_cast<double>(window.size());
    double sum = 0.0;
    for (const auto& m : window) sum += value_of(m);
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& m : window) ss += (value_of(m) - mean) * (value_of(m) - mean);
    return std::sqrt(ss / n) <= rel_tol * std::abs(mean);
  };
  return stable([](const NetworkMetrics& m) { return m.skeleton_length; }) &&
         stable([](const NetworkMetrics& m) { return static_cast<double>(m.cycle_count); });
}

namespace {

// Foraging introduces agents gradually: everything starts in the spawn queue
// and enters through the per-step hook. The placement draws of
// init_population are still consumed so the RNG stream matches other modes.
SimulationState initial_state(const Scenario& sc) {
  SimulationState s = init_population(sc.params, sc.init_mode(), sc.nodes, Rng(sc.seed));
  if (sc.method == Method::filamentous_foraging) {
    s.spawn_queue += s.agents.size();
    s.agents.clear();
    s.occupancy.fill(0);
  }
  return s;
}

}  // namespace

Runner::Runner(Scenario scenario) : Runner(scenario, initial_state(scenario)) {}

Runner::Runner(Scenario scenario, SimulationState initial)
    : scenario_(std::move(scenario)), state_(std::move(initial)) {
  scenario_.validate();
  while (schedule_pos_ < scenario_.schedule.size() &&
         scenario_.schedule[schedule_pos_].step < state_.step) {
    ++schedule_pos_;
  }
  if (state_.step % scenario_.metrics_every == 0) sample();
}

const NetworkMetrics& Runner::sample() {
  metrics_.push_back(compute_metrics(state_, scenario_.analysis));
  track_phase(metrics_.back());
  return metrics_.back();
}

void Runner::begin_reduction() {
  if (scenario_.method != Method::plasmodial_shrinkage || phase_ != PlasmodialPhase::sheet_forming) {
    return;
  }
  phase_ = PlasmodialPhase::reducing;
  reduction_started_ = state_.step;
}

void Runner::track_phase(const NetworkMetrics& m) {
  if (scenario_.method != Method::plasmodial_shrinkage || phase_ != PlasmodialPhase::sheet_forming) {
    return;
  }
  if (m.cycle_count != 0) {
    hole_free_since_.reset();
    return;
  }
  if (!hole_free_since_) hole_free_since_ = m.step;
  if (m.step - *hole_free_since_ >= *scenario_.hole_free_window) begin_reduction();
}

void Runner::apply_scheduled() {
  const auto& schedule = scenario_.schedule;
  while (schedule_pos_ < schedule.size() && schedule[schedule_pos_].step == state_.step) {
    const ScheduleAction& a = schedule[schedule_pos_++];
    switch (a.kind) {
      case ActionKind::set_param:
        set_param_by_name(state_.params, a.param, a.value);
        break;
      case ActionKind::enable_node:
      case ActionKind::disable_node:
        if (NodeSource* n = state_.find_node(static_cast<int>(a.value))) {
          n->enabled = a.kind == ActionKind::enable_node;
        }
        break;
      case ActionKind::begin_reduction:
        begin_reduction();
        break;
      case ActionKind::set_spawn_rate:
        scenario_.spawn_per_node_per_step = static_cast<std::uint64_t>(a.value);
        break;
    }
  }
}

void Runner::method_hook() {
  switch (scenario_.method) {
    case Method::filamentous_foraging:
      spawn_from_queue(state_, *scenario_.spawn_per_node_per_step);
      break;
    case Method::plasmodial_shrinkage: {
      if (phase_ != PlasmodialPhase::reducing) break;
      // One uniform01 draw per living agent, in agent-list order.
      const double p = *scenario_.p_remove;
      for (std::size_t i = 0; i < state_.agents.size(); ++i) {
        if (state_.agents[i].alive && state_.rng.uniform01() < p) {
          remove_agent(state_, i);
          ++state_.spawn_queue;
          ++removed_total_;
        }
      }
      compact_agents(state_);
      respawned_total_ += spawn_from_queue(state_, std::uint64_t(-1));
      const auto target = static_cast<std::size_t>(std::llround(
          *scenario_.target_population_pct / 100.0 * static_cast<double>(state_.params.cell_count())));
      if (state_.living() <= target) {
        phase_ = PlasmodialPhase::done;
        state_.spawn_queue = 0;
      }
      break;
    }
    default:
      break;
  }
}

void Runner::advance() {
  apply_scheduled();
  method_hook();
  system_step(state_);
  if (state_.step % scenario_.metrics_every == 0) sample();
}

bool Runner::converged() const {
  if (metrics_.size() < 2) return false;
  const std::uint64_t now = metrics_.back().step;
  const std::uint64_t window = scenario_.convergence.window_steps;
  if (now < window) return false;
  auto first = std::find_if(metrics_.begin(), metrics_.end(),
                            [&](const NetworkMetrics& m) { return m.step >= now - window; });
  if (first == metrics_.end()) return false;
  const std::span<const NetworkMetrics> span(&*first, static_cast<std::size_t>(metrics_.end() - first));
  if (span.size() < 2) return false;
  return check_convergence(span, scenario_.convergence.rel_tol);
}

bool Runner::settled() const noexcept {
  return scenario_.method != Method::plasmodial_shrinkage || phase_ == PlasmodialPhase::done;
}

bool Runner::done() const {
  if (state_.step >= scenario_.max_steps) return true;
  return scenario_.stop_on_convergence && settled() && converged();
}

RunResult Runner::run(const std::function<void(const Runner&)>& on_step) {
  while (!done()) {
    advance();
    if (on_step) on_step(*this);
  }
  RunResult r;
  r.termination = state_.step >= scenario_.max_steps && !(scenario_.stop_on_convergence && settled() && converged())
                      ? Termination::max_steps
                      : Termination::converged;
  r.final_state = state_;
  r.metrics = metrics_;
  return r;
}

}  // namespace emn
