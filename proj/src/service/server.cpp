#include "emnet/server.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <csignal>
#include <cstdio>
#include <deque>
#include <mutex>
#include <optional>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "emnet/command.hpp"
#include "emnet/frame.hpp"
#include "emnet/io.hpp"

namespace emn {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

class WsSession;

using Message = std::shared_ptr<const std::string>;

}  // namespace

struct SteeringServer::Impl {
  Impl(Scenario s, ServerOptions o) : options(std::move(o)), runner(std::move(s)) {}

  // ---- network side (io thread only) ----
  void accept();
  void on_text(const std::shared_ptr<WsSession>& from, const std::string& text);
  void add_session(const std::shared_ptr<WsSession>& s);
  void remove_session(const WsSession* s);
  void broadcast(Message msg, bool binary);

  // ---- simulation side (sim thread only) ----
  void sim_loop();
  void handle(const std::weak_ptr<WsSession>& from, const Command& c);
  void step_once(bool force_frame);
  void send_frame();
  void send_metrics(const NetworkMetrics& m);
  void publish_state();
  void reply(const std::weak_ptr<WsSession>& to, const json& j);
  void post_broadcast(Message msg, bool binary);

  std::string state_json() {
    std::lock_guard lk(state_mu);
    return state_text;
  }

  ServerOptions options;
  Runner runner;
  std::optional<CommandLogWriter> log;

  net::io_context ioc;
  std::optional<tcp::acceptor> acceptor;
  std::vector<std::weak_ptr<WsSession>> sessions;
  std::atomic<int> session_count{0};
  std::uint16_t bound_port = 0;

  struct Pending {
    std::weak_ptr<WsSession> from;
    Command command;
  };
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Pending> queue;
  bool stopping = false;

  // Owned by the sim thread.
  bool paused = false;
  std::uint64_t manual_steps = 0;
  double steps_per_second = 0.0;

  std::atomic<std::uint64_t> current_step{0};
  std::mutex state_mu;
  std::string state_text;

  std::thread io_thread;
  std::thread sim_thread;
  bool started = false;
  bool stopped = false;
};

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, SteeringServer::Impl* server)
      : ws_(std::move(socket)), server_(server) {}

  void start(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->server_->add_session(self);
      self->read();
    });
  }

  /// Frames beyond the pending limit replace the oldest unsent frame; text
  /// is never dropped.
  void send(Message msg, bool binary) {
    if (closed_) return;
    if (binary) {
      std::size_t waiting = 0;
      for (std::size_t i = writing_ ? 1 : 0; i < queue_.size(); ++i) waiting += queue_[i].binary;
      if (waiting >= server_->options.max_pending_frames) {
        for (std::size_t i = writing_ ? 1 : 0; i < queue_.size(); ++i) {
          if (queue_[i].binary) {
            queue_.erase(queue_.begin() + static_cast<std::ptrdiff_t>(i));
            break;
          }
        }
      }
    }
    queue_.push_back({std::move(msg), binary});
    if (!writing_) write();
  }

 private:
  struct Out {
    Message data;
    bool binary;
  };

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      if (!self->ws_.got_text()) {
        self->send(std::make_shared<std::string>(
                       json{{"type", "error"}, {"reason", "commands must be JSON text"}}.dump()),
                   false);
      } else {
        const std::string text = beast::buffers_to_string(self->buffer_.data());
        self->server_->on_text(self, text);
      }
      self->buffer_.consume(self->buffer_.size());
      self->read();
    });
  }

  void write() {
    writing_ = true;
    ws_.binary(queue_.front().binary);
    ws_.async_write(net::buffer(*queue_.front().data),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->close();
                        return;
                      }
                      self->queue_.pop_front();
                      if (self->queue_.empty()) {
                        self->writing_ = false;
                      } else {
                        self->write();
                      }
                    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    queue_.clear();
    server_->remove_session(this);
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  SteeringServer::Impl* server_;
  std::deque<Out> queue_;
  bool writing_ = false;
  bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, SteeringServer::Impl* server)
      : stream_(std::move(socket)), server_(server) {}

  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       self->on_read(ec);
                     });
  }

 private:
  void on_read(beast::error_code ec) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;
    const std::string target(req_.target());
    const std::string path = target.substr(0, target.find('?'));
    if (websocket::is_upgrade(req_) && path == "/ws") {
      stream_.expires_never();
      std::make_shared<WsSession>(stream_.release_socket(), server_)->start(std::move(req_));
      return;
    }
    auto res = std::make_shared<http::response<http::string_body>>();
    res->version(req_.version());
    res->keep_alive(req_.keep_alive());
    res->set(http::field::server, "emnet");
    res->set(http::field::access_control_allow_origin, "*");
    if (path == "/state" && req_.method() == http::verb::get) {
      res->result(http::status::ok);
      res->set(http::field::content_type, "application/json");
      res->body() = server_->state_json();
    } else if (path == "/state") {
      res->result(http::status::method_not_allowed);
      res->set(http::field::content_type, "text/plain");
      res->body() = "method not allowed\n";
    } else {
      res->result(http::status::not_found);
      res->set(http::field::content_type, "text/plain");
      res->body() = "not found\n";
    }
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!res->keep_alive()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  SteeringServer::Impl* server_;
};

}  // namespace

// ---- network side ----------------------------------------------------------

void SteeringServer::Impl::accept() {
  acceptor->async_accept([self = this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<HttpSession>(std::move(socket), self)->read();
    self->accept();
  });
}

void SteeringServer::Impl::add_session(const std::shared_ptr<WsSession>& s) {
  sessions.push_back(s);
  session_count = static_cast<int>(sessions.size());
}

void SteeringServer::Impl::remove_session(const WsSession* s) {
  std::erase_if(sessions, [&](const std::weak_ptr<WsSession>& w) {
    auto p = w.lock();
    return !p || p.get() == s;
  });
  session_count = static_cast<int>(sessions.size());
}

void SteeringServer::Impl::broadcast(Message msg, bool binary) {
  for (const auto& w : sessions) {
    if (auto s = w.lock()) s->send(msg, binary);
  }
}

void SteeringServer::Impl::on_text(const std::shared_ptr<WsSession>& from, const std::string& text) {
  Command c;
  try {
    c = parse_command(text);
  } catch (const CommandError& e) {
    from->send(std::make_shared<std::string>(json{{"type", "error"}, {"reason", e.what()}}.dump()),
               false);
    return;
  }
  std::optional<Pending> superseded;
  {
    std::lock_guard lk(mu);
    // A still-queued set_param or set_speed for the same key is replaced.
    if (c.type == CommandType::set_param || c.type == CommandType::set_speed) {
      auto it = std::find_if(queue.begin(), queue.end(), [&](const Pending& p) {
        return p.command.type == c.type && p.command.name == c.name;
      });
      if (it != queue.end()) {
        superseded = std::move(*it);
        queue.erase(it);
      }
    }
    queue.push_back({from, c});
  }
  cv.notify_one();
  if (superseded) {
    if (auto s = superseded->from.lock()) {
      s->send(std::make_shared<std::string>(json{{"type", "error"},
                                                 {"reason", "superseded by a later command"},
                                                 {"command", command_to_json(superseded->command)}}
                                                .dump()),
              false);
    }
  }
}

// ---- simulation side -------------------------------------------------------

void SteeringServer::Impl::post_broadcast(Message msg, bool binary) {
  net::post(ioc, [self = this, msg = std::move(msg), binary] {
    self->broadcast(msg, binary);
  });
}

void SteeringServer::Impl::reply(const std::weak_ptr<WsSession>& to, const json& j) {
  auto msg = std::make_shared<std::string>(j.dump());
  net::post(ioc, [to, msg] {
    if (auto s = to.lock()) s->send(msg, false);
  });
}

void SteeringServer::Impl::send_frame() {
  if (session_count.load() == 0) return;
  const SimulationState& s = runner.state();
  post_broadcast(std::make_shared<std::string>(encode_frame(
                     s.step, s.trail, s.params.trail_display_cap, options.overlay ? &s.occupancy : nullptr)),
                 true);
}

void SteeringServer::Impl::send_metrics(const NetworkMetrics& m) {
  if (session_count.load() == 0) return;
  json j{{"type", "metrics"}};
  j.update(metrics_to_json(m));
  post_broadcast(std::make_shared<std::string>(j.dump()), false);
}

void SteeringServer::Impl::publish_state() {
  const SimulationState& s = runner.state();
  json j = state_summary_json(s);
  json steerable = json::object();
  for (const char* name : {"SA", "SO", "RA", "SW", "SS", "depT", "damp"}) {
    steerable[name] = get_param_by_name(s.params, name);
  }
  j["steerable"] = steerable;
  j["method"] = to_string(runner.scenario().method);
  j["paused"] = paused;
  j["steps_per_second"] = steps_per_second;
  j["frames_every"] = runner.scenario().frames_every;
  j["metrics_every"] = runner.scenario().metrics_every;
  j["trail_checksum"] = trail_checksum(s.trail);
  std::string text = j.dump();
  current_step = s.step;
  std::lock_guard lk(state_mu);
  state_text = std::move(text);
}

void SteeringServer::Impl::step_once(bool force_frame) {
  runner.advance();
  const SimulationState& s = runner.state();
  const std::uint64_t every = std::max<std::uint64_t>(runner.scenario().frames_every, 1);
  if (force_frame || s.step % every == 0) send_frame();
  if (!runner.metrics().empty() && runner.metrics().back().step == s.step) {
    send_metrics(runner.metrics().back());
  }
  publish_state();
}

void SteeringServer::Impl::handle(const std::weak_ptr<WsSession>& from, const Command& c) {
  const std::uint64_t at = runner.state().step;
  json ack{{"type", "ack"}, {"command", command_to_json(c)}, {"applied_at_step", at}};
  try {
    switch (c.type) {
      case CommandType::pause:
        paused = true;
        break;
      case CommandType::resume:
        paused = false;
        break;
      case CommandType::step:
        manual_steps += c.count;
        break;
      case CommandType::set_speed:
        steps_per_second = c.steps_per_second;
        break;
      case CommandType::snapshot: {
        const std::filesystem::path dir =
            runner.scenario().output_dir.empty() ? "." : runner.scenario().output_dir;
        char name[64];
        std::snprintf(name, sizeof name, "snapshot_%08llu.json", static_cast<unsigned long long>(at));
        save_state(runner.state(), dir / name);
        ack["path"] = (dir / name).string();
        send_frame();
        send_metrics(compute_metrics(runner.state(), runner.scenario().analysis));
        break;
      }
      default:
        ack.update(apply_command(runner, c));
        break;
    }
    if (log) log->append({at, c});
  } catch (const std::exception& e) {
    reply(from, json{{"type", "error"}, {"reason", e.what()}, {"command", command_to_json(c)}});
    return;
  }
  reply(from, ack);
}

void SteeringServer::Impl::sim_loop() {
  using clock = std::chrono::steady_clock;
  auto next_tick = clock::now();
  for (;;) {
    std::deque<Pending> batch;
    {
      std::unique_lock lk(mu);
      for (;;) {
        if (stopping) return;
        if (!queue.empty() || manual_steps > 0) break;
        if (!paused) {
          if (steps_per_second <= 0.0 || clock::now() >= next_tick) break;
          cv.wait_until(lk, next_tick);
          continue;
        }
        cv.wait(lk);
      }
      batch.swap(queue);
    }
    for (const auto& p : batch) handle(p.from, p.command);
    if (!batch.empty()) publish_state();

    if (manual_steps > 0) {
      --manual_steps;
      step_once(true);
      continue;
    }
    if (paused) continue;
    if (steps_per_second > 0.0) {
      const auto now = clock::now();
      if (now < next_tick) continue;
      const auto period = std::chrono::duration_cast<clock::duration>(
          std::chrono::duration<double>(1.0 / steps_per_second));
      next_tick = std::max(next_tick + period, now - period);
    }
    step_once(false);
  }
}

// ---- public face -----------------------------------------------------------

SteeringServer::SteeringServer(Scenario scenario, ServerOptions options)
    : impl_(std::make_shared<Impl>(std::move(scenario), std::move(options))) {
  impl_->paused = impl_->options.start_paused;
  impl_->steps_per_second = impl_->options.steps_per_second;
}

SteeringServer::~SteeringServer() { stop(); }

std::uint16_t SteeringServer::start() {
  Impl& s = *impl_;
  if (s.started) return s.bound_port;
  std::filesystem::path log_path = s.options.command_log;
  if (log_path.empty()) {
    const std::string& dir = s.runner.scenario().output_dir;
    log_path = std::filesystem::path(dir.empty() ? "." : dir) / "commands.jsonl";
  }
  if (log_path != "-") s.log.emplace(log_path);

  const auto address = net::ip::make_address(s.options.host);
  s.acceptor.emplace(s.ioc);
  tcp::endpoint ep(address, s.options.port);
  s.acceptor->open(ep.protocol());
  s.acceptor->set_option(net::socket_base::reuse_address(true));
  s.acceptor->bind(ep);
  s.acceptor->listen(net::socket_base::max_listen_connections);
  s.bound_port = s.acceptor->local_endpoint().port();
  s.publish_state();
  s.accept();
  s.started = true;
  s.io_thread = std::thread([impl = impl_.get()] { impl->ioc.run(); });
  s.sim_thread = std::thread([impl = impl_.get()] { impl->sim_loop(); });
  return s.bound_port;
}

void SteeringServer::stop() {
  Impl& s = *impl_;
  if (!s.started || s.stopped) return;
  s.stopped = true;
  {
    std::lock_guard lk(s.mu);
    s.stopping = true;
  }
  s.cv.notify_all();
  s.sim_thread.join();
  net::post(s.ioc, [impl = impl_.get()] {
    beast::error_code ec;
    impl->acceptor->close(ec);
  });
  s.ioc.stop();
  s.io_thread.join();
  s.sessions.clear();
}

void SteeringServer::run_until_signal() {
  if (!impl_->started) start();
  net::io_context waiter;
  net::signal_set signals(waiter, SIGINT, SIGTERM);
  signals.async_wait([](beast::error_code, int) {});
  waiter.run();
  stop();
}

std::uint16_t SteeringServer::port() const noexcept { return impl_->bound_port; }

std::uint64_t SteeringServer::step() const noexcept { return impl_->current_step.load(); }

}  // namespace emn
