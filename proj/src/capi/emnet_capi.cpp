#include "emnet/emnet.h"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emnet/command.hpp"
#include "emnet/frame.hpp"
#include "emnet/io.hpp"
#include "emnet/server.hpp"

struct emn_scenario {
  emn::Scenario scenario;
};

struct emn_sim {
  emn::Runner runner;
};

struct emn_server {
  emn::SteeringServer server;
};

namespace {

thread_local std::string last_error;
thread_local std::string last_field;

emn_status fail(emn_status code, const std::string& message, const std::string& field = {}) {
  last_error = message;
  last_field = field;
  return code;
}

template <class F>
emn_status guard(F&& body) {
  last_error.clear();
  last_field.clear();
  try {
    body();
    return EMN_OK;
  } catch (const emn::ConfigError& e) {
    return fail(EMN_ERR_CONFIG, e.what(), e.field());
  } catch (const emn::CommandError& e) {
    return fail(EMN_ERR_COMMAND, e.what());
  } catch (const emn::IoError& e) {
    return fail(EMN_ERR_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(EMN_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(EMN_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(EMN_ERR_RUNTIME, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

std::string numbered(const char* stem, std::uint64_t step, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%08llu%s", stem, static_cast<unsigned long long>(step), ext);
  return buf;
}

// Shared by run and replay. With a log the run goes exactly to max_steps;
// without one it also honours stop_on_convergence.
emn_run_summary run_with_outputs(const emn::Scenario& sc, const std::vector<emn::LoggedCommand>* log) {
  namespace fs = std::filesystem;
  const fs::path out = sc.output_dir.empty() ? fs::path(".") : fs::path(sc.output_dir);
  fs::create_directories(out);
  if (sc.frames_every > 0) fs::create_directories(out / "frames");

  emn::Runner r(sc);
  emn::MetricsCsvWriter csv(out / "metrics.csv");
  std::size_t written = 0;
  auto flush_metrics = [&] {
    while (written < r.metrics().size()) csv.append(r.metrics()[written++]);
  };
  auto emit_frame = [&] {
    const auto& s = r.state();
    if (sc.frames_every == 0 || s.step % sc.frames_every != 0) return;
    emn::write_frame(s.trail, out / "frames" / numbered("frame", s.step, ".pgm"), s.params.trail_display_cap);
    emn::write_agent_overlay(s.occupancy, out / "frames" / numbered("agents", s.step, ".pgm"));
  };

  emn_run_summary summary{};
  std::size_t next = 0;
  flush_metrics();
  emit_frame();
  for (;;) {
    if (log) {
      while (next < log->size() && (*log)[next].step == r.state().step) {
        if (emn::changes_state((*log)[next].command)) {
          emn::apply_command(r, (*log)[next].command);
          ++summary.commands_applied;
        }
        ++next;
      }
      if (r.state().step >= sc.max_steps) break;
    } else if (r.done()) {
      break;
    }
    r.advance();
    flush_metrics();
    emit_frame();
  }
  csv.flush();

  const auto& s = r.state();
  emn::write_frame(s.trail, out / "final_frame.pgm", s.params.trail_display_cap);
  emn::write_agent_overlay(s.occupancy, out / "final_agents.pgm");
  emn::save_state(s, out / "final_state.json");

  summary.steps = s.step;
  summary.checksum = emn::trail_checksum(s.trail);
  summary.converged = !log && s.step < sc.max_steps ? 1 : 0;
  summary.metrics_rows = r.metrics().size();
  emn::json j{{"steps", summary.steps},
              {"checksum", summary.checksum},
              {"termination", summary.converged ? "converged" : "max_steps"},
              {"metrics_rows", summary.metrics_rows}};
  if (log) j["commands_applied"] = summary.commands_applied;
  emn::write_text_file(out / "summary.json", j.dump(2) + "\n");
  return summary;
}

#define EMN_REQUIRE(cond)                                               \
  do {                                                                  \
    if (!(cond)) return fail(EMN_ERR_ARGUMENT, "null argument: " #cond); \
  } while (0)

}  // namespace

extern "C" {

const char* emn_version(void) { return "0.1.0"; }
const char* emn_last_error(void) { return last_error.c_str(); }
const char* emn_last_error_field(void) { return last_field.c_str(); }
void emn_string_free(char* s) { std::free(s); }

emn_status emn_scenario_load(const char* path, emn_scenario** out) {
  EMN_REQUIRE(path && out);
  *out = nullptr;
  return guard([&] { *out = new emn_scenario{emn::load_scenario(path)}; });
}

emn_status emn_scenario_from_json(const char* text, emn_scenario** out) {
  EMN_REQUIRE(text && out);
  *out = nullptr;
  return guard([&] {
    emn::json j;
    try {
      j = emn::json::parse(text);
    } catch (const emn::json::parse_error& e) {
      throw emn::ConfigError(e.what(), "scenario");
    }
    *out = new emn_scenario{emn::scenario_from_json(j)};
  });
}

emn_status emn_scenario_to_json(const emn_scenario* s, char** out) {
  EMN_REQUIRE(s && out);
  return guard([&] { *out = dup_string(emn::scenario_to_json(s->scenario).dump(2)); });
}

void emn_scenario_free(emn_scenario* s) { delete s; }

emn_status emn_scenario_set_seed(emn_scenario* s, uint64_t seed) {
  EMN_REQUIRE(s);
  s->scenario.seed = seed;
  return EMN_OK;
}

emn_status emn_scenario_set_max_steps(emn_scenario* s, uint64_t steps) {
  EMN_REQUIRE(s);
  return guard([&] {
    emn::Scenario copy = s->scenario;
    copy.max_steps = steps;
    copy.validate();
    s->scenario = std::move(copy);
  });
}

emn_status emn_scenario_set_output_dir(emn_scenario* s, const char* dir) {
  EMN_REQUIRE(s && dir);
  s->scenario.output_dir = dir;
  return EMN_OK;
}

emn_status emn_sim_create(const emn_scenario* s, emn_sim** out) {
  EMN_REQUIRE(s && out);
  *out = nullptr;
  return guard([&] { *out = new emn_sim{emn::Runner(s->scenario)}; });
}

emn_status emn_sim_from_state(const emn_scenario* s, const char* state_path, emn_sim** out) {
  EMN_REQUIRE(s && state_path && out);
  *out = nullptr;
  return guard([&] { *out = new emn_sim{emn::Runner(s->scenario, emn::load_state(state_path))}; });
}

void emn_sim_free(emn_sim* sim) { delete sim; }

emn_status emn_sim_step(emn_sim* sim, uint64_t count) {
  EMN_REQUIRE(sim);
  return guard([&] {
    for (uint64_t i = 0; i < count; ++i) sim->runner.advance();
  });
}

uint64_t emn_sim_current_step(const emn_sim* sim) { return sim ? sim->runner.state().step : 0; }

emn_status emn_sim_checksum(const emn_sim* sim, uint64_t* out) {
  EMN_REQUIRE(sim && out);
  *out = emn::trail_checksum(sim->runner.state().trail);
  return EMN_OK;
}

emn_status emn_sim_metrics_json(const emn_sim* sim, char** out) {
  EMN_REQUIRE(sim && out);
  return guard([&] {
    const auto m = emn::compute_metrics(sim->runner.state(), sim->runner.scenario().analysis);
    *out = dup_string(emn::metrics_to_json(m).dump());
  });
}

emn_status emn_sim_write_frame(const emn_sim* sim, const char* pgm_path, const char* overlay_path) {
  EMN_REQUIRE(sim && pgm_path);
  return guard([&] {
    const auto& s = sim->runner.state();
    emn::write_frame(s.trail, pgm_path, s.params.trail_display_cap);
    if (overlay_path) emn::write_agent_overlay(s.occupancy, overlay_path);
  });
}

emn_status emn_sim_save_state(const emn_sim* sim, const char* path) {
  EMN_REQUIRE(sim && path);
  return guard([&] { emn::save_state(sim->runner.state(), path); });
}

emn_status emn_sim_apply_command(emn_sim* sim, const char* command_json, char** ack_json) {
  EMN_REQUIRE(sim && command_json);
  return guard([&] {
    const emn::Command c = emn::parse_command(std::string(command_json));
    const std::uint64_t at = sim->runner.state().step;
    emn::json ack{{"type", "ack"}, {"command", emn::command_to_json(c)}, {"applied_at_step", at}};
    if (emn::changes_state(c)) ack.update(emn::apply_command(sim->runner, c));
    if (ack_json) *ack_json = dup_string(ack.dump());
  });
}

emn_status emn_run(const emn_scenario* s, emn_run_summary* out) {
  EMN_REQUIRE(s);
  return guard([&] {
    const emn_run_summary r = run_with_outputs(s->scenario, nullptr);
    if (out) *out = r;
  });
}

emn_status emn_replay(const emn_scenario* s, const char* command_log, emn_run_summary* out) {
  EMN_REQUIRE(s && command_log);
  return guard([&] {
    const auto log = emn::read_command_log(command_log);
    const emn_run_summary r = run_with_outputs(s->scenario, &log);
    if (out) *out = r;
  });
}

emn_status emn_analyze_file(const char* path, double threshold_rel, int spur_length, double cap,
                            char** metrics_json) {
  EMN_REQUIRE(path && metrics_json);
  return guard([&] {
    emn::AnalysisOptions opt;
    if (threshold_rel > 0.0) {
      if (threshold_rel >= 1.0) throw emn::ConfigError("must be in (0, 1)", "threshold_rel");
      opt.threshold_rel = threshold_rel;
    }
    if (spur_length >= 0) opt.spur_length = spur_length;
    const std::filesystem::path p(path);
    emn::NetworkMetrics m;
    if (p.extension() == ".json") {
      m = emn::compute_metrics(emn::load_state(p), opt);
    } else {
      const double c = cap > 0.0 ? cap : emn::SimulationParams{}.trail_display_cap;
      const emn::TrailField trail = emn::image_to_trail(emn::read_pgm(p), c);
      m = emn::compute_field_metrics(trail, {}, opt);
    }
    *metrics_json = dup_string(emn::metrics_to_json(m).dump());
  });
}

emn_status emn_oracle(const double* xy, size_t n, double* length, int* exact, double* mst) {
  EMN_REQUIRE((xy || n == 0) && length);
  return guard([&] {
    std::vector<emn::Point> pts(n);
    for (size_t i = 0; i < n; ++i) pts[i] = {xy[2 * i], xy[2 * i + 1]};
    const emn::SteinerResult r = emn::steiner_length_oracle(pts);
    *length = r.length;
    if (exact) *exact = r.exact ? 1 : 0;
    if (mst) *mst = emn::mst_length(pts);
  });
}

void emn_server_options_init(emn_server_options* o) {
  if (!o) return;
  *o = emn_server_options{};
  o->port = 8080;
}

namespace {
emn::ServerOptions to_options(const emn_server_options* o) {
  emn::ServerOptions opt;
  if (!o) return opt;
  if (o->host) opt.host = o->host;
  opt.port = o->port;
  opt.start_paused = o->start_paused != 0;
  if (!(o->steps_per_second >= 0.0)) throw emn::ConfigError("must be >= 0", "steps_per_second");
  opt.steps_per_second = o->steps_per_second;
  if (o->command_log) opt.command_log = o->command_log;
  return opt;
}
}  // namespace

emn_status emn_server_create(const emn_scenario* s, const emn_server_options* o, emn_server** out) {
  EMN_REQUIRE(s && out);
  *out = nullptr;
  return guard([&] { *out = new emn_server{emn::SteeringServer(s->scenario, to_options(o))}; });
}

emn_status emn_server_start(emn_server* srv, uint16_t* port) {
  EMN_REQUIRE(srv);
  return guard([&] {
    const std::uint16_t p = srv->server.start();
    if (port) *port = p;
  });
}

emn_status emn_server_stop(emn_server* srv) {
  EMN_REQUIRE(srv);
  return guard([&] { srv->server.stop(); });
}

emn_status emn_server_wait_signal(emn_server* srv) {
  EMN_REQUIRE(srv);
  return guard([&] { srv->server.run_until_signal(); });
}

uint64_t emn_server_step(const emn_server* srv) { return srv ? srv->server.step() : 0; }

void emn_server_free(emn_server* srv) { delete srv; }

emn_status emn_serve(const emn_scenario* s, const emn_server_options* o) {
  EMN_REQUIRE(s);
  return guard([&] {
    emn::SteeringServer server(s->scenario, to_options(o));
    server.start();
    server.run_until_signal();
  });
}

}  // extern "C"
