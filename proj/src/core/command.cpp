#include "emnet/command.hpp"

#include <cmath>
#include <fstream>

#include "emnet/io.hpp"

namespace emn {

namespace {

const json& member(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw CommandError(std::string("missing \"") + key + "\"");
  return *it;
}

double number_member(const json& j, const char* key) {
  const json& v = member(j, key);
  if (!v.is_number()) throw CommandError(std::string("\"") + key + "\" must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw CommandError(std::string("\"") + key + "\" must be finite");
  return d;
}

int int_member(const json& j, const char* key) {
  const json& v = member(j, key);
  if (!v.is_number_integer()) throw CommandError(std::string("\"") + key + "\" must be an integer");
  const auto x = v.get<long long>();
  if (x < -1000000000LL || x > 1000000000LL) {
    throw CommandError(std::string("\"") + key + "\" out of range");
  }
  return static_cast<int>(x);
}

void only_keys(const json& j, std::initializer_list<const char*> keys) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = it.key() == "type";
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw CommandError("unknown member \"" + it.key() + "\"");
  }
}

}  // namespace

const char* to_string(CommandType t) noexcept {
  switch (t) {
    case CommandType::set_param: return "set_param";
    case CommandType::add_node: return "add_node";
    case CommandType::remove_node: return "remove_node";
    case CommandType::enable_node: return "enable_node";
    case CommandType::pause: return "pause";
    case CommandType::resume: return "resume";
    case CommandType::step: return "step";
    case CommandType::set_speed: return "set_speed";
    case CommandType::snapshot: return "snapshot";
  }
  return "pause";
}

Command parse_command(const json& j) {
  if (!j.is_object()) throw CommandError("command must be a JSON object");
  const json& t = member(j, "type");
  if (!t.is_string()) throw CommandError("\"type\" must be a string");
  const std::string type = t.get<std::string>();
  Command c;
  if (type == "set_param") {
    only_keys(j, {"name", "value"});
    c.type = CommandType::set_param;
    const json& n = member(j, "name");
    if (!n.is_string()) throw CommandError("\"name\" must be a string");
    c.name = n.get<std::string>();
    if (!is_settable_param(c.name)) throw CommandError("unknown parameter \"" + c.name + "\"");
    c.value = number_member(j, "value");
    SimulationParams probe;
    try {
      set_param_by_name(probe, c.name, c.value);
      probe.validate();
    } catch (const ConfigError& e) {
      throw CommandError(e.what());
    }
  } else if (type == "add_node") {
    only_keys(j, {"x", "y", "radius", "weight"});
    c.type = CommandType::add_node;
    c.x = int_member(j, "x");
    c.y = int_member(j, "y");
    if (j.contains("radius")) c.radius = int_member(j, "radius");
    if (j.contains("weight")) c.weight = number_member(j, "weight");
    if (c.radius < 1) throw CommandError("radius must be >= 1");
    if (!(c.weight > 0.0)) throw CommandError("weight must be > 0");
  } else if (type == "remove_node") {
    only_keys(j, {"id"});
    c.type = CommandType::remove_node;
    c.id = int_member(j, "id");
  } else if (type == "enable_node") {
    only_keys(j, {"id", "enabled"});
    c.type = CommandType::enable_node;
    c.id = int_member(j, "id");
    const json& e = member(j, "enabled");
    if (!e.is_boolean()) throw CommandError("\"enabled\" must be true or false");
    c.enabled = e.get<bool>();
  } else if (type == "pause") {
    only_keys(j, {});
    c.type = CommandType::pause;
  } else if (type == "resume") {
    only_keys(j, {});
    c.type = CommandType::resume;
  } else if (type == "step") {
    only_keys(j, {"count"});
    c.type = CommandType::step;
    if (j.contains("count")) {
      const json& n = j["count"];
      if (!n.is_number_integer() || n.get<long long>() < 1) {
        throw CommandError("\"count\" must be an integer >= 1");
      }
      c.count = n.get<std::uint64_t>();
    }
  } else if (type == "set_speed") {
    only_keys(j, {"steps_per_second"});
    c.type = CommandType::set_speed;
    c.steps_per_second = number_member(j, "steps_per_second");
    if (c.steps_per_second < 0.0) throw CommandError("steps_per_second must be >= 0");
  } else if (type == "snapshot") {
    only_keys(j, {});
    c.type = CommandType::snapshot;
  } else {
    throw CommandError("unknown command type \"" + type + "\"");
  }
  return c;
}

Command parse_command(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    throw CommandError("malformed JSON");
  }
  return parse_command(j);
}

json command_to_json(const Command& c) {
  json j{{"type", to_string(c.type)}};
  switch (c.type) {
    case CommandType::set_param:
      j["name"] = c.name;
      j["value"] = c.value;
      break;
    case CommandType::add_node:
      j["x"] = c.x;
      j["y"] = c.y;
      j["radius"] = c.radius;
      j["weight"] = c.weight;
      break;
    case CommandType::remove_node:
      j["id"] = c.id;
      break;
    case CommandType::enable_node:
      j["id"] = c.id;
      j["enabled"] = c.enabled;
      break;
    case CommandType::step:
      j["count"] = c.count;
      break;
    case CommandType::set_speed:
      j["steps_per_second"] = c.steps_per_second;
      break;
    default:
      break;
  }
  return j;
}

bool changes_state(const Command& c) noexcept {
  return c.type == CommandType::set_param || c.type == CommandType::add_node ||
         c.type == CommandType::remove_node || c.type == CommandType::enable_node;
}

json apply_command(Runner& runner, const Command& c) {
  SimulationState& s = runner.state();
  json extra = json::object();
  switch (c.type) {
    case CommandType::set_param: {
      SimulationParams p = s.params;
      try {
        set_param_by_name(p, c.name, c.value);
        p.validate();
      } catch (const ConfigError& e) {
        throw CommandError(e.what());
      }
      s.params = p;
      break;
    }
    case CommandType::add_node: {
      NodeSource n;
      n.id = s.next_node_id();
      n.cx = c.x;
      n.cy = c.y;
      n.radius = c.radius;
      n.weight = c.weight;
      try {
        n.validate(s.params);
      } catch (const ConfigError& e) {
        throw CommandError(e.what());
      }
      s.nodes.push_back(n);
      extra["id"] = n.id;
      break;
    }
    case CommandType::remove_node: {
      auto it = std::find_if(s.nodes.begin(), s.nodes.end(),
                             [&](const NodeSource& n) { return n.id == c.id; });
      if (it == s.nodes.end()) throw CommandError("no node with id " + std::to_string(c.id));
      s.nodes.erase(it);
      break;
    }
    case CommandType::enable_node: {
      NodeSource* n = s.find_node(c.id);
      if (!n) throw CommandError("no node with id " + std::to_string(c.id));
      n->enabled = c.enabled;
      break;
    }
    default:
      break;
  }
  return extra;
}

std::string command_log_line(const LoggedCommand& e) {
  return json{{"step", e.step}, {"command", command_to_json(e.command)}}.dump();
}

std::vector<LoggedCommand> read_command_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<LoggedCommand> log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    try {
      const json j = json::parse(line);
      if (!j.is_object() || !j.contains("step") || !j.contains("command") ||
          !j["step"].is_number_unsigned()) {
        throw CommandError("expected {\"step\": S, \"command\": {...}}");
      }
      LoggedCommand e{j["step"].get<std::uint64_t>(), parse_command(j["command"])};
      if (!log.empty() && e.step < log.back().step) throw CommandError("steps must be non-decreasing");
      log.push_back(e);
    } catch (const json::parse_error&) {
      throw CommandError(where + "malformed JSON");
    } catch (const CommandError& err) {
      throw CommandError(where + err.what());
    }
  }
  return log;
}

CommandLogWriter::CommandLogWriter(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path_.string());
}

void CommandLogWriter::append(const LoggedCommand& e) {
  if (e.step < last_step_) throw CommandError("command log steps must be non-decreasing");
  std::ofstream out(path_, std::ios::app);
  out << command_log_line(e) << '\n';
  if (!out) throw IoError("write failed: " + path_.string());
  last_step_ = e.step;
}

void replay_commands(Runner& runner, const std::vector<LoggedCommand>& log,
                     std::uint64_t until_step) {
  std::size_t next = 0;
  while (next < log.size() && log[next].step < runner.state().step) ++next;
  for (;;) {
    while (next < log.size() && log[next].step == runner.state().step) {
      if (changes_state(log[next].command)) apply_command(runner, log[next].command);
      ++next;
    }
    if (runner.state().step >= until_step) break;
    runner.advance();
  }
}

}  // namespace emn
