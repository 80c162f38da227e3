// emnet command line. Talks to the library only through emnet.h.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emnet/emnet.h"

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kConfig = 2;

int report(emn_status st) {
  std::cerr << "emnet: error: " << emn_last_error() << "\n";
  return st == EMN_ERR_CONFIG || st == EMN_ERR_ARGUMENT ? kConfig : kRuntime;
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> steps;
  std::optional<std::string> out;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--steps", o.steps, "Step count (replaces max_steps)");
  cmd->add_option("--out", o.out, "Output directory");
}

struct ScenarioHandle {
  emn_scenario* p = nullptr;
  ~ScenarioHandle() { emn_scenario_free(p); }
};

// Any failure to obtain a scenario counts as a configuration error,
// including a missing file.
int load(const std::string& path, const Overrides& o, ScenarioHandle& h) {
  emn_status st = emn_scenario_load(path.c_str(), &h.p);
  if (st != EMN_OK) {
    report(st);
    return kConfig;
  }
  if (o.seed) emn_scenario_set_seed(h.p, *o.seed);
  if (o.steps && (st = emn_scenario_set_max_steps(h.p, *o.steps)) != EMN_OK) {
    report(st);
    return kConfig;
  }
  if (o.out) emn_scenario_set_output_dir(h.p, o.out->c_str());
  return kOk;
}

void print_summary(const emn_run_summary& s, bool replay) {
  nlohmann::json j{{"steps", s.steps},
                   {"checksum", s.checksum},
                   {"termination", s.converged ? "converged" : "max_steps"},
                   {"metrics_rows", s.metrics_rows}};
  if (replay) j["commands_applied"] = s.commands_applied;
  std::cout << j.dump() << "\n";
}

// Points come as JSON ([[x,y],...], [{"x":..,"y":..},...] or a scenario with
// "nodes") or as plain text with two numbers per line.
std::vector<double> read_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<double> xy;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.is_object()) j = j.at("nodes");
    for (const auto& p : j) {
      if (p.is_array()) {
        xy.push_back(p.at(0).get<double>());
        xy.push_back(p.at(1).get<double>());
      } else {
        xy.push_back(p.at("x").get<double>());
        xy.push_back(p.at("y").get<double>());
      }
    }
    return xy;
  }
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    for (char& c : line) {
      if (c == ',' || c == ';') c = ' ';
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t\r")] == '#') {
      continue;
    }
    std::istringstream ls(line);
    double x = 0, y = 0;
    if (!(ls >> x >> y)) throw std::runtime_error("expected two numbers per line: " + line);
    xy.push_back(x);
    xy.push_back(y);
  }
  return xy;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emnet: agent-based transport network simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", emn_version());

  Overrides run_o;
  std::string run_scenario;
  auto* run = app.add_subcommand("run", "Batch run; writes frames, metrics and the final state");
  run->add_option("scenario", run_scenario, "Scenario JSON")->required();
  add_overrides(run, run_o);

  Overrides replay_o;
  std::string replay_scenario, replay_log;
  auto* replay = app.add_subcommand("replay", "Re-run a scenario applying a recorded command log");
  replay->add_option("scenario", replay_scenario, "Scenario JSON")->required();
  replay->add_option("log", replay_log, "Command log (JSON lines)")->required();
  add_overrides(replay, replay_o);

  std::string analyze_input;
  double analyze_threshold = 0.0;
  int analyze_spur = -1;
  double analyze_cap = 0.0;
  auto* analyze = app.add_subcommand("analyze", "One-shot metrics for a PGM frame or a state file");
  analyze->add_option("input", analyze_input, "frame.pgm or state.json")->required();
  analyze->add_option("--threshold", analyze_threshold, "Mask threshold relative to the peak");
  analyze->add_option("--spur", analyze_spur, "Spur pruning length (0 disables)");
  analyze->add_option("--cap", analyze_cap, "Trail value of a white pixel");

  Overrides serve_o;
  std::string serve_scenario, serve_host = "127.0.0.1", serve_log;
  std::uint16_t serve_port = 8080;
  bool serve_paused = false;
  double serve_speed = 0.0;
  auto* serve = app.add_subcommand("serve", "Run a steerable simulation behind a WebSocket");
  serve->add_option("scenario", serve_scenario, "Scenario JSON")->required();
  serve->add_option("--port", serve_port, "TCP port (0 picks one)");
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_flag("--paused", serve_paused, "Start paused");
  serve->add_option("--speed", serve_speed, "Steps per second (0 = unthrottled)");
  serve->add_option("--command-log", serve_log, "Command log path ('-' disables)");
  add_overrides(serve, serve_o);

  std::string oracle_nodes;
  auto* oracle = app.add_subcommand("oracle", "MST and Steiner tree lengths for a node set");
  oracle->add_option("--nodes", oracle_nodes, "File with node coordinates")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  if (*run) {
    ScenarioHandle h;
    if (int rc = load(run_scenario, run_o, h)) return rc;
    emn_run_summary s{};
    if (emn_status st = emn_run(h.p, &s)) return report(st);
    print_summary(s, false);
    return kOk;
  }
  if (*replay) {
    ScenarioHandle h;
    if (int rc = load(replay_scenario, replay_o, h)) return rc;
    emn_run_summary s{};
    if (emn_status st = emn_replay(h.p, replay_log.c_str(), &s)) return report(st);
    print_summary(s, true);
    return kOk;
  }
  if (*analyze) {
    char* out = nullptr;
    if (emn_status st = emn_analyze_file(analyze_input.c_str(), analyze_threshold, analyze_spur,
                                         analyze_cap, &out)) {
      return report(st);
    }
    std::cout << out << "\n";
    emn_string_free(out);
    return kOk;
  }
  if (*serve) {
    ScenarioHandle h;
    if (int rc = load(serve_scenario, serve_o, h)) return rc;
    emn_server_options opt;
    emn_server_options_init(&opt);
    opt.host = serve_host.c_str();
    opt.port = serve_port;
    opt.start_paused = serve_paused ? 1 : 0;
    opt.steps_per_second = serve_speed;
    if (!serve_log.empty()) opt.command_log = serve_log.c_str();
    emn_server* srv = nullptr;
    if (emn_status st = emn_server_create(h.p, &opt, &srv)) return report(st);
    std::uint16_t port = 0;
    emn_status st = emn_server_start(srv, &port);
    if (st != EMN_OK) {
      emn_server_free(srv);
      return report(st);
    }
    std::cout << "listening on http://" << serve_host << ":" << port << " (ws at /ws, state at /state)"
              << std::endl;
    st = emn_server_wait_signal(srv);
    emn_server_free(srv);
    return st == EMN_OK ? kOk : report(st);
  }
  if (*oracle) {
    std::vector<double> xy;
    try {
      xy = read_points(oracle_nodes);
    } catch (const std::exception& e) {
      std::cerr << "emnet: error: " << e.what() << "\n";
      return kConfig;
    }
    double steiner = 0.0, mst = 0.0;
    int exact = 0;
    if (emn_status st = emn_oracle(xy.data(), xy.size() / 2, &steiner, &exact, &mst)) return report(st);
    char line[160];
    std::snprintf(line, sizeof line, "MST %.6f\nSteiner %.6f%s\n", mst, steiner,
                  exact ? "" : " (spanning tree bound; more than 5 nodes)");
    std::cout << line;
    return kOk;
  }
  return kOk;
}
