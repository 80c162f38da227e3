#include "emnet/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace emn {

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::uint64_t as_u64(const json& v, const std::string& field) {
  const bool ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  if (!ok) throw ConfigError("expected a non-negative integer", field);
  return v.get<std::uint64_t>();
}

double as_number(const json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError("expected a number", field);
  return v.get<double>();
}

/// Typed access to one JSON object; remembers which keys were consumed so
/// leftovers can be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("expected an object", path_.empty() ? "$" : path_);
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string at(const std::string& key) const { return join(path_, key); }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) out = as_number(*v, at(key));
  }
  void integer(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError("expected an integer", at(key));
      const auto x = v->get<long long>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        throw ConfigError("out of range", at(key));
      }
      out = static_cast<int>(x);
    }
  }
  void unsigned64(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) out = as_u64(*v, at(key));
  }
  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError("expected true or false", at(key));
      out = v->get<bool>();
    }
  }
  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError("expected a string", at(key));
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key", at(it.key()));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

SimulationParams params_from_json(const json& j) {
  SimulationParams p;
  ObjectReader r(j, "params");
  r.integer("width", p.width);
  r.integer("height", p.height);
  r.number("population_pct", p.population_pct);
  r.number("sensor_angle_deg", p.sensor_angle_deg);
  r.number("sensor_offset", p.sensor_offset);
  r.number("rotation_angle_deg", p.rotation_angle_deg);
  r.integer("sensor_width", p.sensor_width);
  r.number("step_size", p.step_size);
  r.number("deposit", p.deposit);
  r.number("damp", p.damp);
  std::string boundary = to_string(p.boundary);
  r.string("boundary", boundary);
  p.boundary = boundary_from_string(boundary);
  r.boolean("corner_rule", p.corner_rule);
  r.number("node_stimulus_scale", p.node_stimulus_scale);
  r.number("trail_display_cap", p.trail_display_cap);
  r.finish();
  p.validate();
  return p;
}

ScheduleAction action_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  std::uint64_t step = 0;
  std::string action;
  double value = 0.0;
  if (!r.has("step")) throw ConfigError("required", r.at("step"));
  if (!r.has("action")) throw ConfigError("required", r.at("action"));
  r.unsigned64("step", step);
  r.string("action", action);
  r.number("value", value);
  r.finish();
  try {
    return ScheduleAction::from_name(step, action, value);
  } catch (const ConfigError&) {
    throw ConfigError("unknown action \"" + action + "\"", r.at("action"));
  }
}

void require_open(std::ifstream& in, const std::filesystem::path& path) {
  if (!in) throw IoError("cannot open " + path.string());
}

}  // namespace

// ---- scenario ------------------------------------------------------------

json params_to_json(const SimulationParams& p) {
  return json{{"width", p.width},
              {"height", p.height},
              {"population_pct", p.population_pct},
              {"sensor_angle_deg", p.sensor_angle_deg},
              {"sensor_offset", p.sensor_offset},
              {"rotation_angle_deg", p.rotation_angle_deg},
              {"sensor_width", p.sensor_width},
              {"step_size", p.step_size},
              {"deposit", p.deposit},
              {"damp", p.damp},
              {"boundary", to_string(p.boundary)},
              {"corner_rule", p.corner_rule},
              {"node_stimulus_scale", p.node_stimulus_scale},
              {"trail_display_cap", p.trail_display_cap}};
}

json node_to_json(const NodeSource& n) {
  return json{{"id", n.id},         {"x", n.cx},           {"y", n.cy},
              {"radius", n.radius}, {"weight", n.weight}, {"enabled", n.enabled}};
}

NodeSource node_from_json(const json& j, const std::string& path, int default_id) {
  ObjectReader r(j, path);
  NodeSource n;
  n.id = default_id;
  if (!r.has("x")) throw ConfigError("required", r.at("x"));
  if (!r.has("y")) throw ConfigError("required", r.at("y"));
  r.integer("id", n.id);
  r.integer("x", n.cx);
  r.integer("y", n.cy);
  r.integer("radius", n.radius);
  r.number("weight", n.weight);
  r.boolean("enabled", n.enabled);
  r.finish();
  return n;
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  ObjectReader r(j, "");
  if (const json* p = r.find("params")) s.params = params_from_json(*p);
  if (const json* nodes = r.find("nodes")) {
    if (!nodes->is_array()) throw ConfigError("expected an array", "nodes");
    for (std::size_t i = 0; i < nodes->size(); ++i) {
      s.nodes.push_back(node_from_json((*nodes)[i], "nodes[" + std::to_string(i) + "]",
                                       static_cast<int>(i)));
    }
  }
  if (!r.has("method")) throw ConfigError("required", "method");
  std::string method;
  r.string("method", method);
  s.method = method_from_string(method);

  if (const json* v = r.find("spawn_per_node_per_step")) {
    s.spawn_per_node_per_step = as_u64(*v, "spawn_per_node_per_step");
  }
  if (const json* v = r.find("p_remove")) s.p_remove = as_number(*v, "p_remove");
  if (const json* v = r.find("target_population_pct")) {
    s.target_population_pct = as_number(*v, "target_population_pct");
  }
  if (const json* v = r.find("hole_free_window")) {
    s.hole_free_window = as_u64(*v, "hole_free_window");
  }

  if (const json* sched = r.find("schedule")) {
    if (!sched->is_array()) throw ConfigError("expected an array", "schedule");
    for (std::size_t i = 0; i < sched->size(); ++i) {
      s.schedule.push_back(action_from_json((*sched)[i], "schedule[" + std::to_string(i) + "]"));
    }
  }
  r.unsigned64("seed", s.seed);
  r.unsigned64("max_steps", s.max_steps);
  r.unsigned64("metrics_every", s.metrics_every);
  r.unsigned64("frames_every", s.frames_every);
  r.string("output_dir", s.output_dir);
  r.boolean("stop_on_convergence", s.stop_on_convergence);
  if (const json* a = r.find("analysis")) {
    ObjectReader ar(*a, "analysis");
    ar.number("threshold_rel", s.analysis.threshold_rel);
    ar.integer("junction_window", s.analysis.junction_window);
    ar.integer("spur_length", s.analysis.spur_length);
    ar.finish();
  }
  if (const json* c = r.find("convergence")) {
    ObjectReader cr(*c, "convergence");
    cr.unsigned64("window_steps", s.convergence.window_steps);
    cr.number("rel_tol", s.convergence.rel_tol);
    cr.finish();
  }
  r.finish();
  s.fill_method_defaults();
  s.validate();
  return s;
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["params"] = params_to_json(s.params);
  j["nodes"] = json::array();
  for (const auto& n : s.nodes) j["nodes"].push_back(node_to_json(n));
  j["method"] = to_string(s.method);
  if (s.spawn_per_node_per_step) j["spawn_per_node_per_step"] = *s.spawn_per_node_per_step;
  if (s.p_remove) j["p_remove"] = *s.p_remove;
  if (s.target_population_pct) j["target_population_pct"] = *s.target_population_pct;
  if (s.hole_free_window) j["hole_free_window"] = *s.hole_free_window;
  j["schedule"] = json::array();
  for (const auto& a : s.schedule) {
    j["schedule"].push_back(json{{"step", a.step}, {"action", a.action_name()}, {"value", a.value}});
  }
  j["seed"] = s.seed;
  j["max_steps"] = s.max_steps;
  j["metrics_every"] = s.metrics_every;
  j["frames_every"] = s.frames_every;
  j["output_dir"] = s.output_dir;
  j["stop_on_convergence"] = s.stop_on_convergence;
  j["analysis"] = json{{"threshold_rel", s.analysis.threshold_rel},
                       {"junction_window", s.analysis.junction_window},
                       {"spur_length", s.analysis.spur_length}};
  j["convergence"] = json{{"window_steps", s.convergence.window_steps},
                          {"rel_tol", s.convergence.rel_tol}};
  return j;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require_open(in, path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("JSON parse error: ") + e.what(), path.string());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(read_json_file(path));
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  write_text_file(path, scenario_to_json(s).dump(2) + "\n");
}

// ---- frames --------------------------------------------------------------

std::vector<std::uint8_t> quantize_trail(const TrailField& trail, double cap) {
  if (!(cap > 0.0) || !std::isfinite(cap)) throw ConfigError("must be > 0", "trail_display_cap");
  std::vector<std::uint8_t> out(trail.size());
  const auto values = trail.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = std::clamp(values[i], 0.0, cap);
    out[i] = static_cast<std::uint8_t>(std::floor(v / cap * 255.0 + 0.5));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, int width, int height,
               std::span<const std::uint8_t> pixels) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_frame(const TrailField& trail, const std::filesystem::path& path, double cap) {
  const auto bytes = quantize_trail(trail, cap);
  write_pgm(path, trail.width(), trail.height(), bytes);
}

void write_agent_overlay(const BinaryMask& occupancy, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(occupancy.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = occupancy[i] ? 255 : 0;
  write_pgm(path, occupancy.width(), occupancy.height(), bytes);
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require_open(in, path);
  auto token = [&]() {
    std::string t;
    for (;;) {
      const int c = in.get();
      if (c == EOF) break;
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        if (!t.empty()) break;
        continue;
      }
      if (std::isspace(c)) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(static_cast<char>(c));
    }
    return t;
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P2") throw IoError("not a PGM file: " + path.string());
  GrayImage img;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    img.maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw IoError("malformed PGM header: " + path.string());
  }
  if (img.width <= 0 || img.height <= 0 || img.maxval <= 0 || img.maxval > 255) {
    throw IoError("unsupported PGM dimensions or maxval: " + path.string());
  }
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  img.pixels.resize(n);
  if (magic == "P5") {
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw IoError("truncated PGM: " + path.string());
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::string t = token();
      if (t.empty()) throw IoError("truncated PGM: " + path.string());
      const int v = std::stoi(t);
      if (v < 0 || v > img.maxval) throw IoError("pixel out of range: " + path.string());
      img.pixels[i] = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

TrailField image_to_trail(const GrayImage& img, double cap) {
  TrailField t(img.width, img.height, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = img.pixels[i] * cap / img.maxval;
  return t;
}

// ---- metrics CSV ---------------------------------------------------------

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "step",           "population",      "coverage",
      "skeleton_length", "component_count", "cycle_count",
      "nodes_connected", "top_decile_mass_share", "junction_count",
      "junction_angle_mean", "junction_angle_stddev"};
  return cols;
}

std::string metrics_csv_header() {
  std::string h;
  for (const auto& c : metrics_columns()) h += (h.empty() ? "" : ",") + c;
  return h;
}

std::string metrics_csv_row(const NetworkMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%llu,%llu,%.6g,%.6g,%d,%d,%d,%.6g,%d,%.6g,%.6g",
                static_cast<unsigned long long>(m.step), static_cast<unsigned long long>(m.population),
                m.coverage, m.skeleton_length, m.component_count, m.cycle_count,
                m.nodes_connected ? 1 : 0, m.top_decile_mass_share, m.junction_count,
                m.junction_angle_mean, m.junction_angle_stddev);
  return buf;
}

std::vector<NetworkMetrics> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require_open(in, path);
  std::string line;
  if (!std::getline(in, line) || line != metrics_csv_header()) {
    throw IoError("unexpected metrics header in " + path.string());
  }
  std::vector<NetworkMetrics> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != metrics_columns().size()) throw IoError("malformed metrics row: " + line);
    NetworkMetrics m;
    try {
      m.step = std::stoull(f[0]);
      m.population = std::stoull(f[1]);
      m.coverage = std::stod(f[2]);
      m.skeleton_length = std::stod(f[3]);
      m.component_count = std::stoi(f[4]);
      m.cycle_count = std::stoi(f[5]);
      m.nodes_connected = std::stoi(f[6]) != 0;
      m.top_decile_mass_share = std::stod(f[7]);
      m.junction_count = std::stoi(f[8]);
      m.junction_angle_mean = std::stod(f[9]);
      m.junction_angle_stddev = std::stod(f[10]);
    } catch (const std::exception&) {
      throw IoError("malformed metrics row: " + line);
    }
    rows.push_back(m);
  }
  return rows;
}

MetricsCsvWriter::MetricsCsvWriter(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  f_ = std::fopen(path.string().c_str(), "wb");
  if (!f_) throw IoError("cannot write " + path.string());
  std::fprintf(f_, "%s\n", metrics_csv_header().c_str());
}

MetricsCsvWriter::~MetricsCsvWriter() {
  if (f_) std::fclose(f_);
}

void MetricsCsvWriter::append(const NetworkMetrics& m) {
  if (std::fprintf(f_, "%s\n", metrics_csv_row(m).c_str()) < 0) throw IoError("metrics write failed");
}

void MetricsCsvWriter::flush() { std::fflush(f_); }

json metrics_to_json(const NetworkMetrics& m) {
  return json{{"step", m.step},
              {"population", m.population},
              {"coverage", m.coverage},
              {"skeleton_length", m.skeleton_length},
              {"component_count", m.component_count},
              {"cycle_count", m.cycle_count},
              {"nodes_connected", m.nodes_connected},
              {"top_decile_mass_share", m.top_decile_mass_share},
              {"junction_count", m.junction_count},
              {"junction_angle_mean", m.junction_angle_mean},
              {"junction_angle_stddev", m.junction_angle_stddev}};
}

// ---- state snapshots -----------------------------------------------------

json state_to_json(const SimulationState& s) {
  json j;
  j["format"] = "emnet-state-1";
  j["step"] = s.step;
  j["params"] = params_to_json(s.params);
  j["nodes"] = json::array();
  for (const auto& n : s.nodes) j["nodes"].push_back(node_to_json(n));
  j["rng"] = s.rng.serialize();
  j["spawn_queue"] = s.spawn_queue;
  j["source_live"] = s.source_live;
  json agents = json::array();
  for (const auto& a : s.agents) agents.push_back(json::array({a.x, a.y, a.heading_deg, a.alive}));
  j["agents"] = std::move(agents);
  j["trail"] = std::vector<double>(s.trail.values().begin(), s.trail.values().end());
  j["source_trail"] =
      std::vector<double>(s.source_trail.values().begin(), s.source_trail.values().end());
  return j;
}

SimulationState state_from_json(const json& j) {
  try {
    if (j.at("format") != "emnet-state-1") throw IoError("unknown state format");
    SimulationState s;
    s.params = params_from_json(j.at("params"));
    const auto& nodes = j.at("nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      s.nodes.push_back(node_from_json(nodes[i], "nodes[" + std::to_string(i) + "]",
                                       static_cast<int>(i)));
    }
    s.step = j.at("step").get<std::uint64_t>();
    s.rng.deserialize(j.at("rng").get<std::string>());
    s.spawn_queue = j.at("spawn_queue").get<std::uint64_t>();
    s.source_live = j.at("source_live").get<bool>();
    const int w = s.params.width;
    const int h = s.params.height;
    s.occupancy = BinaryMask(w, h, 0);
    s.trail = TrailField(w, h, 0.0);
    s.scratch = TrailField(w, h, 0.0);
    s.source_trail = TrailField(w, h, 0.0);
    s.source_scratch = TrailField(w, h, 0.0);
    const auto trail = j.at("trail").get<std::vector<double>>();
    const auto source = j.at("source_trail").get<std::vector<double>>();
    if (trail.size() != s.trail.size() || source.size() != s.trail.size()) {
      throw IoError("trail size does not match params");
    }
    std::copy(trail.begin(), trail.end(), s.trail.values().begin());
    std::copy(source.begin(), source.end(), s.source_trail.values().begin());
    for (const auto& a : j.at("agents")) {
      Agent ag{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>(),
               a.at(3).get<bool>()};
      if (ag.alive) {
        const int cx = ag.cell_x();
        const int cy = ag.cell_y();
        if (!s.occupancy.contains(cx, cy) || s.occupancy(cx, cy)) {
          throw IoError("agent cells overlap or lie outside the lattice");
        }
        s.occupancy(cx, cy) = 1;
      }
      s.agents.push_back(ag);
    }
    return s;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed state snapshot: ") + e.what());
  }
}

void save_state(const SimulationState& s, const std::filesystem::path& path) {
  write_text_file(path, state_to_json(s).dump() + "\n");
}

SimulationState load_state(const std::filesystem::path& path) {
  return state_from_json(read_json_file(path));
}

json state_summary_json(const SimulationState& s) {
  json j;
  j["step"] = s.step;
  j["width"] = s.params.width;
  j["height"] = s.params.height;
  j["params"] = params_to_json(s.params);
  j["nodes"] = json::array();
  for (const auto& n : s.nodes) j["nodes"].push_back(node_to_json(n));
  j["population"] = s.living();
  return j;
}

}  // namespace emn
