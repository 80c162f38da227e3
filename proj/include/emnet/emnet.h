#ifndef EMNET_EMNET_H
#define EMNET_EMNET_H

/* C interface to the emnet simulation library.
 *
 * Every call returns an emn_status. On failure emn_last_error() holds a
 * message for the calling thread until its next emnet call. Strings handed
 * out through char** are owned by the caller and released with
 * emn_string_free. Handles are not thread safe; use one per thread. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EMN_API __declspec(dllexport)
#else
#define EMN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum emn_status {
  EMN_OK = 0,
  EMN_ERR_CONFIG = 1,   /* bad scenario or parameter value */
  EMN_ERR_IO = 2,       /* unreadable or unwritable file, malformed format */
  EMN_ERR_COMMAND = 3,  /* steering command rejected */
  EMN_ERR_RUNTIME = 4,  /* anything else */
  EMN_ERR_ARGUMENT = 5  /* null handle or pointer */
} emn_status;

typedef struct emn_scenario emn_scenario;
typedef struct emn_sim emn_sim;
typedef struct emn_server emn_server;

EMN_API const char* emn_version(void);
EMN_API const char* emn_last_error(void);
/* Dotted field path of the last EMN_ERR_CONFIG, or "". */
EMN_API const char* emn_last_error_field(void);
EMN_API void emn_string_free(char* s);

/* ---- scenarios ---- */

EMN_API emn_status emn_scenario_load(const char* path, emn_scenario** out);
EMN_API emn_status emn_scenario_from_json(const char* text, emn_scenario** out);
EMN_API emn_status emn_scenario_to_json(const emn_scenario* s, char** out);
EMN_API void emn_scenario_free(emn_scenario* s);
EMN_API emn_status emn_scenario_set_seed(emn_scenario* s, uint64_t seed);
EMN_API emn_status emn_scenario_set_max_steps(emn_scenario* s, uint64_t steps);
EMN_API emn_status emn_scenario_set_output_dir(emn_scenario* s, const char* dir);

/* ---- stepping a simulation by hand ---- */

EMN_API emn_status emn_sim_create(const emn_scenario* s, emn_sim** out);
/* Resumes from a state file written by emn_sim_save_state. */
EMN_API emn_status emn_sim_from_state(const emn_scenario* s, const char* state_path, emn_sim** out);
EMN_API void emn_sim_free(emn_sim* sim);
/* Runs `count` scenario steps (schedule and method hooks included). */
EMN_API emn_status emn_sim_step(emn_sim* sim, uint64_t count);
EMN_API uint64_t emn_sim_current_step(const emn_sim* sim);
EMN_API emn_status emn_sim_checksum(const emn_sim* sim, uint64_t* out);
/* Network metrics of the current state as a JSON object. */
EMN_API emn_status emn_sim_metrics_json(const emn_sim* sim, char** out);
/* overlay_path may be NULL. */
EMN_API emn_status emn_sim_write_frame(const emn_sim* sim, const char* pgm_path, const char* overlay_path);
EMN_API emn_status emn_sim_save_state(const emn_sim* sim, const char* path);
/* Applies one steering command between steps. Control commands (pause,
 * resume, step, set_speed, snapshot) are accepted and ignored. ack_json may
 * be NULL. */
EMN_API emn_status emn_sim_apply_command(emn_sim* sim, const char* command_json, char** ack_json);

/* ---- batch runs ---- */

typedef struct emn_run_summary {
  uint64_t steps;
  uint64_t checksum;         /* trail checksum of the final state */
  int converged;             /* 1 when the run stopped on convergence */
  uint64_t metrics_rows;
  uint64_t commands_applied; /* replay only */
} emn_run_summary;

/* Runs to max_steps (or convergence when the scenario asks for it) and writes
 * into the output directory: metrics.csv, frames/ when frames_every > 0,
 * final_frame.pgm, final_agents.pgm, final_state.json and summary.json. */
EMN_API emn_status emn_run(const emn_scenario* s, emn_run_summary* out);
/* Same outputs, stepping exactly to max_steps while applying a command log
 * at the recorded step boundaries. */
EMN_API emn_status emn_replay(const emn_scenario* s, const char* command_log, emn_run_summary* out);

/* ---- offline analysis ---- */

/* Input is a PGM trail image or a state file (.json). threshold_rel <= 0,
 * spur_length < 0 and cap <= 0 select the defaults. */
EMN_API emn_status emn_analyze_file(const char* path, double threshold_rel, int spur_length,
                                    double cap, char** metrics_json);

/* Steiner tree length for n points given as x0,y0,x1,y1,...; exact is 0 when
 * n > 5 and the result is the spanning tree length. mst may be NULL. */
EMN_API emn_status emn_oracle(const double* xy, size_t n, double* length, int* exact, double* mst);

/* ---- steering service ---- */

typedef struct emn_server_options {
  const char* host;          /* NULL: 127.0.0.1 */
  uint16_t port;             /* 0: any free port */
  int start_paused;
  double steps_per_second;   /* 0: unthrottled */
  const char* command_log;   /* NULL: <output_dir>/commands.jsonl, "-": none */
} emn_server_options;

EMN_API void emn_server_options_init(emn_server_options* o);
EMN_API emn_status emn_server_create(const emn_scenario* s, const emn_server_options* o, emn_server** out);
/* Non-blocking. Writes the bound port to *port when port is not NULL. */
EMN_API emn_status emn_server_start(emn_server* srv, uint16_t* port);
EMN_API emn_status emn_server_stop(emn_server* srv);
/* Blocks until SIGINT or SIGTERM, then stops the server. */
EMN_API emn_status emn_server_wait_signal(emn_server* srv);
EMN_API uint64_t emn_server_step(const emn_server* srv);
EMN_API void emn_server_free(emn_server* srv);
/* Blocks until SIGINT or SIGTERM. */
EMN_API emn_status emn_serve(const emn_scenario* s, const emn_server_options* o);

#ifdef __cplusplus
}
#endif

#endif
