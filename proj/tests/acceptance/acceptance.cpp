// Acceptance suite. One PASS/FAIL line per criterion; exits non-zero when a
// criterion fails that is not on the known-deviation list.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "emnet/analysis.hpp"
#include "emnet/io.hpp"
#include "emnet/scenario.hpp"

using namespace emn;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances -----------------------------------------------------

constexpr double kDeterminismSeconds = 60.0;
constexpr double kDiffusionRelErr = 1e-12;
constexpr int kDiffusionCases = 1000;
constexpr double kLanesStartShare = 0.1;
constexpr double kLanesStartTol = 0.02;
constexpr double kLanesShare = 0.5;
constexpr std::uint64_t kLanesStep = 2000;
constexpr std::uint64_t kStableHorizon = 50000;
constexpr double kJunctionAngle = 120.0;
constexpr double kJunctionTol = 15.0;
constexpr int kMinJunctions = 10;
constexpr int kStableSeeds = 5;
constexpr std::uint64_t kSwitchLoseWithin = 5000;
constexpr std::uint64_t kSwitchRegainWithin = 50000;
constexpr std::uint64_t kBlobSteps = 40000;
constexpr std::uint64_t kBlobTail = 500;
constexpr double kBlobRatio = 1.3;
constexpr std::uint64_t kAnnulusWithin = 10000;
constexpr double kTwoNodeFactor = 1.15;
constexpr double kThreeNodeAllowance = 0.10;
constexpr int kSeedRuns = 10;
constexpr int kSeedPasses = 8;
constexpr std::uint64_t kConvergenceHorizon = 30000;
constexpr std::uint64_t kThreeNodeHorizon = 10000;
constexpr std::uint64_t kFig12Horizon = 10000;
constexpr std::uint64_t kFig12Persist = 2000;
constexpr std::uint64_t kCollapseWithin = 20000;
constexpr double kOracleRelErr = 1e-3;

// Criteria that fail for understood reasons; see the README.
const std::set<std::string> kKnownDeviations = {"fig12-failure-modes"};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("emnet_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---- scenario builders -----------------------------------------------------

Scenario node_scenario(std::vector<NodeSource> nodes, double pct, std::uint64_t seed) {
  Scenario sc;
  sc.method = Method::filamentous_shrinkage;
  sc.params.sensor_angle_deg = 45;
  sc.params.boundary = Boundary::fixed;
  sc.params.population_pct = pct;
  sc.nodes = std::move(nodes);
  sc.seed = seed;
  sc.metrics_every = 50;
  sc.max_steps = kConvergenceHorizon;
  sc.stop_on_convergence = true;
  sc.fill_method_defaults();
  sc.validate();
  return sc;
}

NodeSource node(int id, int x, int y, double weight = 0.05) {
  NodeSource n;
  n.id = id;
  n.cx = x;
  n.cy = y;
  n.weight = weight;
  return n;
}

std::vector<NodeSource> triangle_nodes(double side = 100) {
  const double h = side * std::sqrt(3.0) / 2;
  return {node(0, int(std::lround(100 - side / 2)), int(std::lround(100 - h / 3))),
          node(1, int(std::lround(100 + side / 2)), int(std::lround(100 - h / 3))),
          node(2, 100, int(std::lround(100 + 2 * h / 3)))};
}

// Hexagon of radius 70 plus its centre.
std::vector<NodeSource> wheel_nodes(double weight) {
  std::vector<NodeSource> out{node(6, 100, 100, weight)};
  for (int i = 0; i < 6; ++i) {
    const double a = 2 * M_PI * i / 6;
    out.push_back(node(i, int(std::lround(100 + 70 * std::cos(a))), int(std::lround(100 + 70 * std::sin(a))), weight));
  }
  return out;
}

std::vector<Point> centres(const std::vector<NodeSource>& nodes) {
  std::vector<Point> out;
  for (const auto& n : nodes) out.push_back({double(n.cx), double(n.cy)});
  return out;
}

// ---- criteria ----------------------------------------------------------------

Outcome determinism(const std::string& cli) {
  const fs::path dir = scratch("determinism");
  Scenario sc;
  sc.max_steps = 10000;
  sc.metrics_every = 100;
  sc.frames_every = 100;
  sc.seed = 1;
  save_scenario(sc, dir / "scenario.json");
  double worst = 0.0;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = cli + " run " + (dir / "scenario.json").string() + " --out " + (dir / run).string() +
                            " > " + (dir / run).string() + ".log 2>&1";
    const auto t0 = std::chrono::steady_clock::now();
    if (std::system(cmd.c_str()) != 0) return {false, "cli run failed: " + cmd};
    worst = std::max(worst, seconds_since(t0));
  }
  for (const char* f : {"frames/frame_00000100.pgm", "frames/frame_00001000.pgm", "frames/frame_00010000.pgm",
                        "frames/agents_00000100.pgm", "frames/agents_00001000.pgm", "frames/agents_00010000.pgm",
                        "metrics.csv", "final_state.json"}) {
    const std::string a = slurp(dir / "a" / f), b = slurp(dir / "b" / f);
    if (a.empty() || a != b) return {false, std::string("outputs differ or missing: ") + f};
  }
  const auto rows = read_metrics_csv(dir / "a" / "metrics.csv");
  if (rows.size() != 101) return {false, fmt("expected 101 metrics rows, got %zu", rows.size())};
  return {worst < kDeterminismSeconds,
          fmt("frames, overlays and metrics identical at 100/1000/10000; slowest run %.1f s (limit %.0f s)", worst,
              kDeterminismSeconds)};
}

Outcome diffusion_law() {
  std::mt19937_64 g(20240611);
  std::uniform_int_distribution<int> dim(3, 48);
  std::uniform_real_distribution<double> val(0.0, 50.0), coef(-3.0, 3.0);
  double worst_mass = 0, worst_lin = 0;
  int negatives = 0, non_positive = 0;
  for (int c = 0; c < kDiffusionCases; ++c) {
    const int w = dim(g), h = dim(g);
    TrailField f(w, h, 0.0), k(w, h, 0.0), mix(w, h, 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) {
      f[i] = val(g);
      k[i] = val(g);
    }
    const double a = coef(g), b = coef(g);
    for (std::size_t i = 0; i < f.size(); ++i) mix[i] = a * f[i] + b * k[i];
    const TrailField df = diffuse(f, 0.1, Boundary::periodic);
    const TrailField dk = diffuse(k, 0.1, Boundary::periodic);
    const TrailField dm = diffuse(mix, 0.1, Boundary::periodic);
    const double before = std::accumulate(f.values().begin(), f.values().end(), 0.0);
    const double after = std::accumulate(df.values().begin(), df.values().end(), 0.0);
    worst_mass = std::max(worst_mass, std::abs(after - 0.9 * before) / (0.9 * before));
    double scale = 0;
    for (std::size_t i = 0; i < f.size(); ++i) scale = std::max(scale, std::abs(a * df[i]) + std::abs(b * dk[i]));
    for (std::size_t i = 0; i < f.size(); ++i) {
      worst_lin = std::max(worst_lin, std::abs(dm[i] - (a * df[i] + b * dk[i])) / scale);
      negatives += df[i] < 0;
      // Strictly positive input stays strictly positive.
      non_positive += f[i] > 0 && df[i] <= 0;
    }
  }
  const bool pass = worst_mass <= kDiffusionRelErr && worst_lin <= kDiffusionRelErr && negatives == 0 && non_positive == 0;
  return {pass, fmt("%d cases: worst mass error %.2e, worst linearity error %.2e, negative outputs %d", kDiffusionCases,
                    worst_mass, worst_lin, negatives + non_positive)};
}

Outcome lanes() {
  Scenario sc;
  sc.max_steps = kLanesStep;
  sc.metrics_every = 100;
  Runner r(sc);
  const double start = r.metrics().front().top_decile_mass_share;
  while (r.state().step < kLanesStep) r.advance();
  const double end = r.metrics().back().top_decile_mass_share;
  const bool pass = std::abs(start - kLanesStartShare) <= kLanesStartTol && end >= kLanesShare;
  return {pass, fmt("top-decile share %.3f at step 0, %.3f at step %llu (need >= %.2f)", start, end,
                    (unsigned long long)kLanesStep, kLanesShare)};
}

Scenario stable_scenario(std::uint64_t seed) {
  Scenario sc;
  sc.params.sensor_angle_deg = 45;
  sc.seed = seed;
  sc.max_steps = kStableHorizon;
  sc.metrics_every = 50;
  return sc;
}

void run_to_convergence(Runner& r, std::uint64_t limit) {
  while (!r.converged() && r.state().step < limit) r.advance();
}

Outcome stable_regime() {
  std::vector<double> angles;
  int junctions = 0;
  std::string steps;
  bool all_converged = true;
  for (int seed = 1; seed <= kStableSeeds; ++seed) {
    Runner r(stable_scenario(seed));
    run_to_convergence(r, kStableHorizon);
    all_converged = all_converged && r.converged();
    steps += fmt("%s%llu", seed > 1 ? "," : "", (unsigned long long)r.state().step);
    const Skeleton sk = skeletonize(threshold_mask(r.state().trail, r.scenario().analysis.threshold_rel),
                                    r.scenario().analysis.spur_length);
    for (const auto& set : junction_angle_sets(sk, r.scenario().analysis.junction_window)) {
      ++junctions;
      angles.insert(angles.end(), set.begin(), set.end());
    }
  }
  const double mean = angles.empty() ? 0.0 : std::accumulate(angles.begin(), angles.end(), 0.0) / angles.size();
  double rms = 0;
  for (double a : angles) rms += (a - kJunctionAngle) * (a - kJunctionAngle);
  rms = angles.empty() ? 0.0 : std::sqrt(rms / angles.size());
  const bool pass = all_converged && junctions >= kMinJunctions && std::abs(mean - kJunctionAngle) <= kJunctionTol;
  return {pass, fmt("converged at steps %s; %d junctions pooled over %d seeds, mean angle %.1f (rms deviation from "
                    "120: %.1f)",
                    steps.c_str(), junctions, kStableSeeds, mean, rms)};
}

Outcome regime_switch() {
  Runner r(stable_scenario(1));
  run_to_convergence(r, kStableHorizon);
  if (!r.converged()) return {false, "SA=45 run did not converge"};
  const std::uint64_t s0 = r.state().step;
  r.state().params.sensor_angle_deg = 15;
  std::uint64_t lost = 0;
  while (r.state().step < s0 + kSwitchLoseWithin && !lost) {
    r.advance();
    if (r.state().step % r.scenario().metrics_every == 0 && !r.converged()) lost = r.state().step;
  }
  if (!lost) return {false, fmt("SA=15 from step %llu: still converged after %llu steps", (unsigned long long)s0,
                                (unsigned long long)kSwitchLoseWithin)};
  while (r.state().step < s0 + kSwitchLoseWithin) r.advance();
  const std::uint64_t s1 = r.state().step;
  r.state().params.sensor_angle_deg = 45;
  // The convergence window must lie entirely after the reset.
  const std::uint64_t window = r.scenario().convergence.window_steps;
  while (!(r.converged() && r.state().step >= s1 + window) && r.state().step < s1 + kSwitchRegainWithin) r.advance();
  const bool regained = r.converged() && r.state().step >= s1 + window;
  return {regained, fmt("converged at %llu; SA=15 lost convergence after %llu steps; SA=45 at %llu regained it "
                        "after %llu steps",
                        (unsigned long long)s0, (unsigned long long)(lost - s0), (unsigned long long)s1,
                        (unsigned long long)(r.state().step - s1))};
}

struct BlobCheck {
  bool single_round = false;
  double best_ratio = 0.0;
  bool any_single = false;
};

BlobCheck blob_run(bool corner_rule) {
  Scenario sc;
  sc.params.sensor_angle_deg = 45;
  sc.params.boundary = Boundary::fixed;
  sc.params.corner_rule = corner_rule;
  sc.seed = 1;
  sc.max_steps = kBlobSteps;
  sc.metrics_every = 100;
  Runner r(sc);
  while (r.state().step < kBlobSteps - kBlobTail) r.advance();
  BlobCheck out;
  out.best_ratio = 1e9;
  while (r.state().step < kBlobSteps) {
    r.advance();
    if (r.state().step % 10) continue;
    const BlobShape b = blob_circularity(r.state().occupancy);
    out.any_single = out.any_single || b.single_blob;
    if (b.single_blob) out.best_ratio = std::min(out.best_ratio, b.radius_ratio);
    out.single_round = out.single_round || (b.single_blob && b.radius_ratio <= kBlobRatio);
  }
  if (!out.any_single) out.best_ratio = blob_circularity(r.state().occupancy).radius_ratio;
  return out;
}

Outcome minimal_surface() {
  const BlobCheck with = blob_run(true);
  const BlobCheck without = blob_run(false);
  return {with.single_round && !without.single_round,
          fmt("corner rule: single blob %s, radius ratio %.3f (limit %.1f); no corner rule: single blob %s, ratio "
              "%.3f, blob test %s",
              with.any_single ? "yes" : "no", with.best_ratio, kBlobRatio, without.any_single ? "yes" : "no",
              without.best_ratio, without.single_round ? "passes" : "fails")};
}

Outcome annulus() {
  Scenario sc;
  sc.params.sensor_angle_deg = 45;
  sc.params.population_pct = 1;
  sc.seed = 1;
  sc.max_steps = kAnnulusWithin;
  sc.metrics_every = 50;
  SimulationState st = init_population(sc.params, InitMode::uniform_random, {}, Rng(sc.seed));
  for (std::size_t i = 0; i < st.agents.size(); ++i) remove_agent(st, i);
  compact_agents(st);
  // Ring of radius 40-44 around the centre: trail laid down, half the cells
  // hold an agent heading along the ring.
  Rng rng(sc.seed + 1000);
  for (int y = 0; y < 200; ++y) {
    for (int x = 0; x < 200; ++x) {
      const double dx = x + 0.5 - 100, dy = y + 0.5 - 100, rad = std::hypot(dx, dy);
      if (rad < 40 || rad > 44) continue;
      st.trail(x, y) = sc.params.deposit;
      if (rng.uniform01() >= 0.5) continue;
      place_agent(st, x + 0.5, y + 0.5, std::atan2(dy, dx) * 180 / M_PI + (rng.coin() ? 90 : -90));
    }
  }
  Runner r(sc, st);
  const int start_cycles = r.metrics().front().cycle_count;
  std::uint64_t closed = 0;
  while (r.state().step < kAnnulusWithin && !closed) {
    r.advance();
    if (r.state().step % sc.metrics_every == 0 && r.metrics().back().cycle_count == 0) closed = r.state().step;
  }
  return {start_cycles >= 1 && closed > 0,
          closed ? fmt("%zu agents on a ring, %d cycle(s) at start, cycle_count 0 at step %llu", st.living(),
                       start_cycles, (unsigned long long)closed)
                 : fmt("cycle_count still %d at step %llu", r.metrics().back().cycle_count,
                       (unsigned long long)kAnnulusWithin)};
}

Outcome two_node() {
  const std::vector<NodeSource> nodes{node(0, 50, 100), node(1, 150, 100)};
  const double d = 100.0;
  Runner r(node_scenario(nodes, 1, 1));
  const RunResult res = r.run();
  const NetworkMetrics& m = res.metrics.back();
  const bool pass = res.termination == Termination::converged && m.nodes_connected && m.skeleton_length <= kTwoNodeFactor * d;
  return {pass, fmt("converged %s at step %llu, connected %s, skeleton length %.1f (limit %.1f)",
                    res.termination == Termination::converged ? "yes" : "no", (unsigned long long)m.step,
                    m.nodes_connected ? "yes" : "no", m.skeleton_length, kTwoNodeFactor * d)};
}

// Converged seed-1 3-node state, shared with the node-removal criterion.
std::optional<Runner> three_node_seed1;

Outcome three_node() {
  const auto nodes = triangle_nodes();
  const auto pts = centres(nodes);
  const double smt = steiner_length_oracle(pts).length;
  const double mst = mst_length(pts);
  int passes = 0;
  std::string lengths;
  for (int seed = 1; seed <= kSeedRuns; ++seed) {
    // The first convergence signal fires while lanes still shorten slowly, so
    // length is read at a fixed horizon where convergence must also hold.
    Scenario sc = node_scenario(nodes, 1, seed);
    sc.stop_on_convergence = false;
    sc.max_steps = kThreeNodeHorizon;
    Runner r(sc);
    r.run();
    const NetworkMetrics& m = r.metrics().back();
    const bool ok = r.converged() && m.nodes_connected && m.skeleton_length >= smt &&
                    m.skeleton_length <= mst * (1 + kThreeNodeAllowance);
    passes += ok;
    lengths += fmt("%s%.0f%s", seed > 1 ? " " : "", m.skeleton_length, ok ? "" : "*");
    if (seed == 1) three_node_seed1.emplace(std::move(r));
  }
  return {passes >= kSeedPasses, fmt("%d/%d seeds with %.1f <= L <= %.1f and connected; L = %s", passes, kSeedRuns,
                                     smt, mst * (1 + kThreeNodeAllowance), lengths.c_str())};
}

Outcome fig12() {
  int strong = 0, weak = 0;
  for (int seed = 1; seed <= kSeedRuns; ++seed) {
    for (bool heavy : {true, false}) {
      Scenario sc = node_scenario(wheel_nodes(heavy ? 0.05 * 20 : 0.05 / 20), 2, seed);
      sc.stop_on_convergence = false;
      sc.max_steps = kFig12Horizon;
      const RunResult res = Runner(sc).run();
      if (heavy) {
        bool persistent = true;
        for (const auto& m : res.metrics) {
          if (m.step + kFig12Persist >= kFig12Horizon) persistent = persistent && m.cycle_count > 0;
        }
        strong += persistent;
      } else {
        weak += !res.metrics.back().nodes_connected;
      }
    }
  }
  return {strong >= kSeedPasses && weak >= kSeedPasses,
          fmt("7-node wheel at step %llu: weight x20 keeps cycles in %d/%d seeds; weight /20 disconnects in %d/%d "
              "seeds (need %d)",
              (unsigned long long)kFig12Horizon, strong, kSeedRuns, weak, kSeedRuns, kSeedPasses)};
}

Outcome node_removal() {
  if (!three_node_seed1) return {false, "no converged 3-node state"};
  Runner& r = *three_node_seed1;
  const std::vector<NodeSource> original = r.state().nodes;
  const std::uint64_t s0 = r.state().step;
  for (auto& n : r.state().nodes) n.enabled = false;
  std::uint64_t collapsed = 0;
  while (r.state().step < s0 + kCollapseWithin && !collapsed) {
    r.advance();
    if (r.state().step % 50) continue;
    const BinaryMask mask = threshold_mask(r.state().trail, r.scenario().analysis.threshold_rel);
    if (!nodes_connected(mask, original)) collapsed = r.state().step;
  }
  return {collapsed > 0, collapsed ? fmt("nodes disabled at step %llu; node sites disconnected after %llu steps",
                                         (unsigned long long)s0, (unsigned long long)(collapsed - s0))
                                   : fmt("still connected %llu steps after disabling", (unsigned long long)kCollapseWithin)};
}

Outcome plasmodial() {
  Scenario sc = node_scenario(triangle_nodes(), 45, 1);
  sc.method = Method::plasmodial_shrinkage;
  sc.analysis.threshold_rel = 0.05;
  sc.max_steps = kConvergenceHorizon;
  sc.fill_method_defaults();
  sc.validate();
  Runner r(sc);
  std::size_t disc_cells = 0;
  for (const auto& n : sc.nodes) disc_cells += n.cells().size();
  std::size_t prev = r.state().living();
  const std::size_t start = prev;
  std::size_t worst_rise = 0;
  bool sampled_monotone = true;
  std::size_t last_sample = start;
  int cycles_at_start = -1;
  while (!r.done()) {
    r.advance();
    const std::size_t now = r.state().living();
    if (r.reduction_started() && cycles_at_start < 0) cycles_at_start = r.metrics().back().cycle_count;
    if (r.plasmodial_phase() != PlasmodialPhase::sheet_forming) {
      if (now > prev) worst_rise = std::max(worst_rise, now - prev);
      if (r.state().step % sc.metrics_every == 0) {
        sampled_monotone = sampled_monotone && now <= last_sample;
        last_sample = now;
      }
    }
    prev = now;
  }
  const NetworkMetrics& m = r.metrics().back();
  const std::size_t target = std::size_t(std::llround(*sc.target_population_pct / 100.0 * 40000));
  const bool pass = r.reduction_started().has_value() && cycles_at_start == 0 && worst_rise <= disc_cells &&
                    sampled_monotone && r.plasmodial_phase() == PlasmodialPhase::done && m.population <= target &&
                    m.nodes_connected && r.converged();
  return {pass, fmt("start %zu agents; holes closed, reduction from step %llu; largest one-step rise %zu (bound %zu), "
                    "sampled population %s; final %llu agents (target %zu) at step %llu, connected %s",
                    start, (unsigned long long)r.reduction_started().value_or(0), worst_rise, disc_cells,
                    sampled_monotone ? "non-increasing" : "rose", (unsigned long long)m.population, target,
                    (unsigned long long)m.step, m.nodes_connected ? "yes" : "no")};
}

// Brute-force homology: 8-flood foreground components, 4-flood background
// components on a one-cell padded copy; holes = background components - 1.
std::pair<int, int> brute_homology(const BinaryMask& m) {
  const int w = m.width() + 2, h = m.height() + 2;
  std::vector<int> fg(std::size_t(w) * h, 0), seen(std::size_t(w) * h, 0);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) fg[std::size_t(y + 1) * w + x + 1] = m(x, y) != 0;
  auto flood = [&](int sx, int sy, int want, bool eight) {
    std::vector<std::pair<int, int>> stack{{sx, sy}};
    seen[std::size_t(sy) * w + sx] = 1;
    while (!stack.empty()) {
      auto [x, y] = stack.back();
      stack.pop_back();
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0)) continue;
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t i = std::size_t(ny) * w + nx;
          if (seen[i] || fg[i] != want) continue;
          seen[i] = 1;
          stack.push_back({nx, ny});
        }
    }
  };
  int comps = 0, bg = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = std::size_t(y) * w + x;
      if (seen[i]) continue;
      if (fg[i]) {
        ++comps;
        flood(x, y, 1, true);
      } else {
        ++bg;
        flood(x, y, 0, false);
      }
    }
  return {comps, bg - 1};
}

Outcome oracle_suite() {
  auto rel = [](double got, double want) { return std::abs(got - want) / want; };
  const std::vector<Point> two{{20, 30}, {80, 110}};
  const std::vector<Point> tri{{0, 0}, {100, 0}, {50, 50 * std::sqrt(3.0)}};
  const std::vector<Point> sq{{0, 0}, {100, 0}, {100, 100}, {0, 100}};
  const double e2 = rel(steiner_length_oracle(two).length, 100.0);
  const double e3 = rel(steiner_length_oracle(tri).length, 100 * std::sqrt(3.0));
  const double e4 = rel(steiner_length_oracle(sq).length, (1 + std::sqrt(3.0)) * 100);

  // Mask corpus: every size up to 32x32 at several densities, plus rings.
  std::mt19937_64 g(77);
  int masks = 0, mismatches = 0, thinning = 0;
  for (int w = 1; w <= 32; w += 1) {
    for (int h = 1; h <= 32; h += 3) {
      for (double density : {0.2, 0.45, 0.6, 0.8}) {
        std::bernoulli_distribution on(density);
        BinaryMask m(w, h, 0);
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = on(g);
        if (w >= 7 && h >= 7 && density == 0.8) {
          const double cx = w / 2.0, cy = h / 2.0, r = std::min(w, h) / 3.0;
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
              const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
              m(x, y) = d >= r - 1.5 && d <= r;
            }
        }
        ++masks;
        const auto [comps, holes] = brute_homology(m);
        const TopologyCounts t = components_and_cycles(m);
        mismatches += t.components != comps || t.cycles != holes;
        const TopologyCounts s = components_and_cycles(skeletonize(m).cells);
        thinning += s.components != comps || s.cycles != holes;
      }
    }
  }
  const bool pass = e2 <= kOracleRelErr && e3 <= kOracleRelErr && e4 <= kOracleRelErr && mismatches == 0 && thinning == 0;
  return {pass, fmt("Steiner relative errors: 2-node %.1e, triangle %.1e, square %.1e; %d masks: %d homology "
                    "mismatches, %d changed by thinning",
                    e2, e3, e4, masks, mismatches, thinning)};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli = EMNET_CLI_PATH;
  std::string only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) cli = argv[++i];
    else if (a == "--only" && i + 1 < argc) only = argv[++i];
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"determinism", [&] { return determinism(cli); }},
      {"diffusion-law", diffusion_law},
      {"lane-formation", lanes},
      {"stable-regime", stable_regime},
      {"regime-switch", regime_switch},
      {"minimal-surface", minimal_surface},
      {"loop-closure", annulus},
      {"two-node", two_node},
      {"three-node", three_node},
      {"fig12-failure-modes", fig12},
      {"node-removal", node_removal},
      {"plasmodial", plasmodial},
      {"oracle-suite", oracle_suite},
  };
  int failed = 0, unexpected = 0;
  const auto t_all = std::chrono::steady_clock::now();
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && name.find(only) == std::string::npos) continue;
    if (name == "node-removal" && !three_node_seed1) three_node();
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool known = !o.pass && kKnownDeviations.count(name);
    failed += !o.pass;
    unexpected += !o.pass && !known;
    std::printf("%s %-20s %s [%.0f s]%s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                seconds_since(t0), known ? " (known deviation)" : "");
    std::fflush(stdout);
  }
  std::printf("%d failed, %d unexpected, %.0f s total\n", failed, unexpected, seconds_since(t_all));
  return unexpected ? 1 : 0;
}
