#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "emnet/scenario.hpp"

namespace emn {

/// A steering command was malformed or does not fit the current state.
class CommandError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CommandType {
  set_param,
  add_node,
  remove_node,
  enable_node,
  pause,
  resume,
  step,
  set_speed,
  snapshot
};

const char* to_string(CommandType t) noexcept;

/// Wire form is a JSON object with a "type" member, e.g.
/// {"type":"set_param","name":"SA","value":15}
/// {"type":"add_node","x":50,"y":60,"radius":2,"weight":0.05}
/// {"type":"remove_node","id":3}
/// {"type":"enable_node","id":3,"enabled":false}
/// {"type":"pause"} {"type":"resume"} {"type":"step","count":1}
/// {"type":"set_speed","steps_per_second":30} {"type":"snapshot"}
struct Command {
  CommandType type = CommandType::pause;
  std::string name;  // set_param
  double value = 0.0;
  int x = 0;  // add_node
  int y = 0;
  int radius = 2;
  double weight = 0.05;
  int id = 0;  // remove_node, enable_node
  bool enabled = true;
  std::uint64_t count = 1;         // step
  double steps_per_second = 0.0;  // set_speed; 0 = unthrottled

  friend bool operator==(const Command&, const Command&) = default;
};

/// Syntax and static checks only (types, known names, ranges that do not
/// depend on the state). Throws CommandError.
Command parse_command(const nlohmann::json& j);
Command parse_command(const std::string& text);
inline Command parse_command(const char* text) { return parse_command(std::string(text)); }
nlohmann::json command_to_json(const Command& c);

/// set_param, add_node, remove_node and enable_node change the simulation;
/// the rest only steer the service loop.
bool changes_state(const Command& c) noexcept;

/// Applies a state-changing command between steps. Checks against the live
/// state first, so on CommandError nothing has changed. Returns extra ack
/// members (the new id for add_node). Control commands are a no-op here.
nlohmann::json apply_command(Runner& runner, const Command& c);

struct LoggedCommand {
  std::uint64_t step = 0;
  Command command;
  friend bool operator==(const LoggedCommand&, const LoggedCommand&) = default;
};

/// One JSON object per line: {"step":S,"command":{...}}.
std::string command_log_line(const LoggedCommand& e);
/// Throws IoError on unreadable files, CommandError on bad lines or
/// decreasing steps.
std::vector<LoggedCommand> read_command_log(const std::filesystem::path& path);

class CommandLogWriter {
 public:
  explicit CommandLogWriter(const std::filesystem::path& path);
  void append(const LoggedCommand& e);

 private:
  std::filesystem::path path_;
  std::uint64_t last_step_ = 0;
};

/// Steps `runner` to `until_step`, applying each logged state-changing
/// command at the boundary before the step it is stamped with.
void replay_commands(Runner& runner, const std::vector<LoggedCommand>& log,
                     std::uint64_t until_step);

}  // namespace emn
