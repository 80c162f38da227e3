#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "emnet/scenario.hpp"

namespace emn {

struct ServerOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 8080;  // 0 picks a free port
  bool start_paused = false;
  double steps_per_second = 0.0;  // 0 = as fast as possible
  bool overlay = true;            // include the agent bitmap in frames
  /// Frames a slow client may have waiting before older ones are dropped.
  std::size_t max_pending_frames = 4;
  /// Empty: <output_dir>/commands.jsonl. "-" disables the log.
  std::filesystem::path command_log;
};

/// One live simulation behind a WebSocket endpoint at /ws and a JSON
/// bootstrap view at GET /state.
///
/// The simulation thread owns the state. The network thread talks to it
/// only through the command queue and posted outbound messages, and
/// commands are applied between steps in arrival order.
class SteeringServer {
 public:
  SteeringServer(Scenario scenario, ServerOptions options);
  ~SteeringServer();
  SteeringServer(const SteeringServer&) = delete;
  SteeringServer& operator=(const SteeringServer&) = delete;

  /// Binds and starts both threads. Returns the bound port.
  std::uint16_t start();
  /// Idempotent.
  void stop();
  /// Blocks until SIGINT/SIGTERM, then stops.
  void run_until_signal();

  std::uint16_t port() const noexcept;
  std::uint64_t step() const noexcept;

  struct Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace emn
