#include "emnet/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace emn {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double wrap_coord(double v, int n) noexcept {
  if (v >= 0.0 && v < n) return v;
  double r = std::fmod(v, static_cast<double>(n));
  if (r < 0.0) r += n;
  if (r >= n) r = 0.0;
  return r;
}

// Unit direction of the three sensors from the heading's sine and cosine.
struct SensorDirections {
  double lx, ly, fx, fy, rx, ry;
};

SensorDirections sensor_directions(double heading_deg, double cos_sa, double sin_sa) noexcept {
  const double a = heading_deg * kDegToRad;
  const double c = std::cos(a);
  const double s = std::sin(a);
  return {c * cos_sa - s * sin_sa, s * cos_sa + c * sin_sa, c, s,
          c * cos_sa + s * sin_sa, s * cos_sa - c * sin_sa};
}

}  // namespace

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::deserialize(const std::string& s) {
  std::istringstream is(s);
  is >> engine_;
  if (!is) throw std::runtime_error("malformed rng state");
}

int Agent::cell_x() const noexcept { return static_cast<int>(std::floor(x)); }
int Agent::cell_y() const noexcept { return static_cast<int>(std::floor(y)); }

double normalize_deg(double deg) noexcept {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  if (r >= 360.0) r = 0.0;
  return r;
}

std::vector<std::pair<int, int>> NodeSource::cells() const {
  std::vector<std::pair<int, int>> out;
  const int r2 = radius * radius;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= r2) out.emplace_back(cx + dx, cy + dy);
    }
  }
  return out;
}

void NodeSource::validate(const SimulationParams& p) const {
  const std::string at = "nodes[" + std::to_string(id) + "]";
  if (radius < 1) throw ConfigError("radius must be >= 1", at + ".radius");
  if (!(std::isfinite(weight) && weight > 0.0)) throw ConfigError("weight must be > 0", at + ".weight");
  if (cx - radius < 0 || cy - radius < 0 || cx + radius >= p.width || cy + radius >= p.height) {
    throw ConfigError("disc does not fit inside the lattice", at);
  }
}

std::size_t SimulationState::living() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(agents.begin(), agents.end(), [](const Agent& a) { return a.alive; }));
}

bool SimulationState::occupancy_consistent() const {
  Grid<int> count(params.width, params.height, 0);
  for (const Agent& a : agents) {
    if (!a.alive) continue;
    if (!count.contains(a.cell_x(), a.cell_y())) return false;
    if (++count(a.cell_x(), a.cell_y()) > 1) return false;
  }
  for (std::size_t i = 0; i < count.size(); ++i) {
    if ((count[i] != 0) != (occupancy[i] != 0)) return false;
  }
  return true;
}

const NodeSource* SimulationState::find_node(int id) const noexcept {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

NodeSource* SimulationState::find_node(int id) noexcept {
  for (auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

int SimulationState::next_node_id() const noexcept {
  int id = 0;
  for (const auto& n : nodes) id = std::max(id, n.id + 1);
  return id;
}

bool place_agent(SimulationState& state, double x, double y, double heading_deg) {
  Agent a{x, y, normalize_deg(heading_deg), true};
  const int cx = a.cell_x();
  const int cy = a.cell_y();
  if (!state.occupancy.contains(cx, cy) || state.occupancy(cx, cy)) return false;
  state.occupancy(cx, cy) = 1;
  state.agents.push_back(a);
  return true;
}

SimulationState init_population(const SimulationParams& params, InitMode mode,
                                std::vector<NodeSource> nodes, Rng rng) {
  params.validate();
  std::set<int> ids;
  for (const auto& n : nodes) {
    n.validate(params);
    if (!ids.insert(n.id).second) throw ConfigError("duplicate node id", "nodes");
  }

  SimulationState s;
  s.params = params;
  s.nodes = std::move(nodes);
  s.rng = std::move(rng);
  s.occupancy = BinaryMask(params.width, params.height, 0);
  s.trail = TrailField(params.width, params.height, 0.0);
  s.scratch = TrailField(params.width, params.height, 0.0);
  s.source_trail = TrailField(params.width, params.height, 0.0);
  s.source_scratch = TrailField(params.width, params.height, 0.0);

  const long long target = params.target_population();
  if (mode == InitMode::full_coverage && params.population_pct <= 40.0) {
    throw ConfigError("full coverage needs population_pct > 40", "params.population_pct");
  }
  if (target > params.cell_count()) {
    throw ConfigError("population exceeds lattice area", "params.population_pct");
  }

  std::vector<std::uint32_t> candidates;
  if (mode == InitMode::node_restricted) {
    std::vector<const NodeSource*> sorted;
    for (const auto& n : s.nodes) {
      if (n.enabled) sorted.push_back(&n);
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const NodeSource* a, const NodeSource* b) { return a->id < b->id; });
    std::vector<std::uint8_t> seen(s.occupancy.size(), 0);
    for (const NodeSource* n : sorted) {
      for (auto [x, y] : n->cells()) {
        const auto i = s.occupancy.index(x, y);
        if (!seen[i]) {
          seen[i] = 1;
          candidates.push_back(static_cast<std::uint32_t>(i));
        }
      }
    }
  } else {
    candidates.resize(s.occupancy.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = static_cast<std::uint32_t>(i);
  }

  const auto placed = static_cast<std::size_t>(
      std::min<long long>(target, static_cast<long long>(candidates.size())));
  s.spawn_queue = static_cast<std::uint64_t>(target) - placed;
  s.agents.reserve(static_cast<std::size_t>(target));
  for (std::size_t k = 0; k < placed; ++k) {
    const auto j = k + s.rng.below(candidates.size() - k);
    std::swap(candidates[k], candidates[j]);
    const int cx = static_cast<int>(candidates[k] % params.width);
    const int cy = static_cast<int>(candidates[k] / params.width);
    place_agent(s, cx + 0.5, cy + 0.5, s.rng.heading());
  }
  return s;
}

namespace {

// Returns the SW x SW block mean around the cell containing (px, py) and
// whether the point itself lies outside a fixed-boundary lattice.
std::pair<double, bool> sample_sensor(double px, double py, const TrailField& trail,
                                      const SimulationParams& p) {
  const int w = trail.width();
  const int h = trail.height();
  const bool periodic = p.boundary == Boundary::periodic;
  bool outside = false;
  int cx;
  int cy;
  if (periodic) {
    cx = static_cast<int>(wrap_coord(px, w));
    cy = static_cast<int>(wrap_coord(py, h));
  } else {
    outside = px < 0.0 || py < 0.0 || px >= w || py >= h;
    cx = static_cast<int>(std::floor(px));
    cy = static_cast<int>(std::floor(py));
  }
  if (p.sensor_width == 1) {
    if (outside) return {0.0, true};
    return {trail(cx, cy), false};
  }
  const int half = p.sensor_width / 2;
  double sum = 0.0;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      int x = cx + dx;
      int y = cy + dy;
      if (periodic) {
        x = wrap_index(x, w);
        y = wrap_index(y, h);
      } else if (!trail.contains(x, y)) {
        continue;
      }
      sum += trail(x, y);
    }
  }
  return {sum / (static_cast<double>(p.sensor_width) * p.sensor_width), outside};
}

}  // namespace

namespace {

SensorReadings read_sensors_with(const Agent& agent, const TrailField& trail,
                                 const SimulationParams& params, double cos_sa, double sin_sa) {
  const SensorDirections d = sensor_directions(agent.heading_deg, cos_sa, sin_sa);
  const double so = params.sensor_offset;
  const auto [left, lo] = sample_sensor(agent.x + so * d.lx, agent.y + so * d.ly, trail, params);
  const auto [front, fo] = sample_sensor(agent.x + so * d.fx, agent.y + so * d.fy, trail, params);
  const auto [right, ro] = sample_sensor(agent.x + so * d.rx, agent.y + so * d.ry, trail, params);
  return {left, front, right, lo || fo || ro};
}

double sense_with(const Agent& agent, const TrailField& trail, const SimulationParams& params,
                  Rng& rng, double cos_sa, double sin_sa) {
  const SensorReadings r = read_sensors_with(agent, trail, params, cos_sa, sin_sa);
  if (params.boundary == Boundary::fixed && params.corner_rule && r.any_outside) {
    return normalize_deg(agent.heading_deg - params.rotation_angle_deg);
  }
  return decide_heading(agent.heading_deg, r, params.rotation_angle_deg, rng);
}

}  // namespace

SensorReadings read_sensors(const Agent& agent, const TrailField& trail,
                            const SimulationParams& params) {
  const double sa = params.sensor_angle_deg * kDegToRad;
  return read_sensors_with(agent, trail, params, std::cos(sa), std::sin(sa));
}

double decide_heading(double heading_deg, const SensorReadings& s, double rotation_deg, Rng& rng) {
  if (s.front > s.left && s.front > s.right) return heading_deg;
  if (s.front < s.left && s.front < s.right) {
    return normalize_deg(rng.coin() ? heading_deg + rotation_deg : heading_deg - rotation_deg);
  }
  if (s.left > s.right) return normalize_deg(heading_deg + rotation_deg);
  if (s.right > s.left) return normalize_deg(heading_deg - rotation_deg);
  return heading_deg;
}

double sense(const Agent& agent, const TrailField& trail, const SimulationParams& params,
             Rng& rng) {
  const double sa = params.sensor_angle_deg * kDegToRad;
  return sense_with(agent, trail, params, rng, std::cos(sa), std::sin(sa));
}

bool attempt_move(Agent& agent, SimulationState& state) {
  const SimulationParams& p = state.params;
  const double a = agent.heading_deg * kDegToRad;
  double nx = agent.x + p.step_size * std::cos(a);
  double ny = agent.y + p.step_size * std::sin(a);
  bool blocked = false;
  if (p.boundary == Boundary::periodic) {
    nx = wrap_coord(nx, p.width);
    ny = wrap_coord(ny, p.height);
  } else if (nx < 0.0 || ny < 0.0 || nx >= p.width || ny >= p.height) {
    blocked = true;
  }
  if (!blocked) {
    const int cx = static_cast<int>(std::floor(nx));
    const int cy = static_cast<int>(std::floor(ny));
    const int ox = agent.cell_x();
    const int oy = agent.cell_y();
    const bool own = cx == ox && cy == oy;
    if (own || !state.occupancy(cx, cy)) {
      state.occupancy(ox, oy) = 0;
      state.occupancy(cx, cy) = 1;
      agent.x = nx;
      agent.y = ny;
      state.trail(cx, cy) += p.deposit;
      return true;
    }
  }
  agent.heading_deg = state.rng.heading();
  return false;
}

void diffuse(const TrailField& in, TrailField& out, double damp, Boundary boundary) {
  const int w = in.width();
  const int h = in.height();
  if (out.width() != w || out.height() != h) out = TrailField(w, h, 0.0);
  const bool periodic = boundary == Boundary::periodic;
  const double keep = 1.0 - damp;
  const double* src = in.values().data();
  double* dst = out.values().data();

  // Column indices for x-1 and x+1; -1 marks an out-of-lattice column.
  std::vector<int> xm(w), xp(w);
  for (int x = 0; x < w; ++x) {
    xm[x] = x > 0 ? x - 1 : (periodic ? w - 1 : -1);
    xp[x] = x < w - 1 ? x + 1 : (periodic ? 0 : -1);
  }
  auto row_sum = [&](const double* row, int x) {
    double s = row[x];
    if (xm[x] >= 0) s += row[xm[x]];
    if (xp[x] >= 0) s += row[xp[x]];
    return s;
  };
  for (int y = 0; y < h; ++y) {
    const int ym = y > 0 ? y - 1 : (periodic ? h - 1 : -1);
    const int yp = y < h - 1 ? y + 1 : (periodic ? 0 : -1);
    const double* up = ym >= 0 ? src + static_cast<std::size_t>(ym) * w : nullptr;
    const double* mid = src + static_cast<std::size_t>(y) * w;
    const double* down = yp >= 0 ? src + static_cast<std::size_t>(yp) * w : nullptr;
    double* o = dst + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      if (up) s += row_sum(up, x);
      s += row_sum(mid, x);
      if (down) s += row_sum(down, x);
      o[x] = s / 9.0 * keep;
    }
  }
}

TrailField diffuse(const TrailField& in, double damp, Boundary boundary) {
  TrailField out(in.width(), in.height(), 0.0);
  diffuse(in, out, damp, boundary);
  return out;
}

void inject_nodes(TrailField& trail, std::span<const NodeSource> nodes,
                  const SimulationParams& params) {
  for (const NodeSource& n : nodes) {
    if (!n.enabled) continue;
    const double amount = n.weight * params.node_stimulus_scale;
    for (auto [x, y] : n.cells()) {
      if (trail.contains(x, y)) trail(x, y) += amount;
    }
  }
}

void system_step(SimulationState& state) {
  auto& order = state.order;
  order.clear();
  for (std::size_t i = 0; i < state.agents.size(); ++i) {
    if (state.agents[i].alive) order.push_back(static_cast<std::uint32_t>(i));
  }
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = state.rng.below(i);
    std::swap(order[i - 1], order[j]);
  }
  const double sa = state.params.sensor_angle_deg * kDegToRad;
  const double cos_sa = std::cos(sa);
  const double sin_sa = std::sin(sa);
  for (const std::uint32_t idx : order) {
    Agent& a = state.agents[idx];
    a.heading_deg = sense_with(a, state.trail, state.params, state.rng, cos_sa, sin_sa);
    attempt_move(a, state);
  }
  inject_nodes(state.trail, state.nodes, state.params);
  diffuse(state.trail, state.scratch, state.params.damp, state.params.boundary);
  std::swap(state.trail, state.scratch);
  if (state.source_trail.size() != state.trail.size()) {
    state.source_trail = TrailField(state.trail.width(), state.trail.height(), 0.0);
  }
  if (!state.nodes.empty() || state.source_live) {
    if (state.source_scratch.size() != state.trail.size()) state.source_scratch = state.source_trail;
    inject_nodes(state.source_trail, state.nodes, state.params);
    diffuse(state.source_trail, state.source_scratch, state.params.damp, state.params.boundary);
    std::swap(state.source_trail, state.source_scratch);
    const auto v = state.source_trail.values();
    state.source_live = std::any_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
  }
  ++state.step;
}

std::uint64_t spawn_from_queue(SimulationState& state, std::uint64_t per_node) {
  std::vector<const NodeSource*> sorted;
  for (const auto& n : state.nodes) {
    if (n.enabled) sorted.push_back(&n);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const NodeSource* a, const NodeSource* b) { return a->id < b->id; });
  std::uint64_t placed = 0;
  for (const NodeSource* n : sorted) {
    std::uint64_t here = 0;
    for (auto [x, y] : n->cells()) {
      if (state.spawn_queue == 0 || here == per_node) break;
      if (state.occupancy(x, y)) continue;
      place_agent(state, x + 0.5, y + 0.5, state.rng.heading());
      --state.spawn_queue;
      ++here;
    }
    placed += here;
  }
  return placed;
}

void remove_agent(SimulationState& state, std::size_t index) {
  Agent& a = state.agents[index];
  if (!a.alive) return;
  a.alive = false;
  state.occupancy(a.cell_x(), a.cell_y()) = 0;
}

void compact_agents(SimulationState& state) {
  std::erase_if(state.agents, [](const Agent& a) { return !a.alive; });
}

std::uint64_t trail_checksum(const TrailField& trail) noexcept {
  std::uint64_t hash = 1469598103934665603ULL;
  for (const double v : trail.values()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      hash ^= bits & 0xFFu;
      hash *= 1099511628211ULL;
      bits >>= 8;
    }
  }
  return hash;
}

}  // namespace emn
