#pragma once

#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "pcbf/teleop/core.hpp"

namespace pcbf::teleop {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

/// "host:port" to an endpoint; throws ConfigError.
inline tcp::endpoint parse_bind(const std::string & bind)
{
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) { throw ConfigError("bind address must be host:port, got '" + bind + "'"); }
  boost::system::error_code ec;
  const auto addr = net::ip::make_address(bind.substr(0, colon), ec);
  if (ec) { throw ConfigError("bad bind host '" + bind.substr(0, colon) + "'"); }
  unsigned long port = 0;
  try {
    std::size_t used = 0;
    port = std::stoul(bind.substr(colon + 1), &used);
    if (used != bind.size() - colon - 1) { throw std::invalid_argument("trailing"); }
  } catch (const std::exception &) {
    throw ConfigError("bad bind port in '" + bind + "'");
  }
  if (port > 65535) { throw ConfigError("bad bind port in '" + bind + "'"); }
  return {addr, static_cast<unsigned short>(port)};
}

class WsSession;

/// Fans immutable frames out to every open session.
class Broadcaster
{
public:
  void add(const std::shared_ptr<WsSession> & s)
  {
    std::lock_guard lock(mu_);
    sessions_.push_back(s);
  }

  void remove(const WsSession * s)
  {
    std::lock_guard lock(mu_);
    std::erase_if(sessions_, [s](const auto & w) {
      const auto p = w.lock();
      return !p || p.get() == s;
    });
  }

  void send(const std::shared_ptr<const std::string> & frame);

private:
  std::mutex mu_;
  std::vector<std::weak_ptr<WsSession>> sessions_;
};

class WsSession : public std::enable_shared_from_this<WsSession>
{
public:
  static constexpr std::size_t max_queue = 256;

  WsSession(tcp::socket socket, Hub & hub, Broadcaster & bc) : ws_(std::move(socket)), hub_(hub), bc_(bc) {}

  void run(http::request<http::string_body> req)
  {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(1 << 16);
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

  void send(std::shared_ptr<const std::string> frame)
  {
    net::post(ws_.get_executor(), [self = shared_from_this(), frame = std::move(frame)]() mutable {
      if (self->closed_ || self->queue_.size() >= max_queue) { return; }
      self->queue_.push_back(std::move(frame));
      if (self->queue_.size() == 1) { self->do_write(); }
    });
  }

private:
  void on_accept(beast::error_code ec)
  {
    if (ec) { return; }
    id_ = hub_.open_session();
    bc_.add(shared_from_this());
    do_read();
  }

  void do_read() { ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t)
  {
    if (ec) {
      close();
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    for (auto & reply : hub_.handle(id_, text)) { send(std::make_shared<const std::string>(std::move(reply))); }
    do_read();
  }

  void do_write()
  {
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front()), beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t)
  {
    if (ec) {
      close();
      return;
    }
    queue_.pop_front();
    if (!queue_.empty()) { do_write(); }
  }

  void close()
  {
    if (closed_) { return; }
    closed_ = true;
    queue_.clear();
    if (!id_.empty()) { hub_.close_session(id_); }
    bc_.remove(this);
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  Hub & hub_;
  Broadcaster & bc_;
  std::string id_;
  bool closed_ = false;
};

inline void Broadcaster::send(const std::shared_ptr<const std::string> & frame)
{
  std::vector<std::shared_ptr<WsSession>> live;
  {
    std::lock_guard lock(mu_);
    for (const auto & w : sessions_) {
      if (auto p = w.lock()) { live.push_back(std::move(p)); }
    }
  }
  for (const auto & s : live) { s->send(frame); }
}

/// Plain HTTP: /healthz, or an upgrade to the websocket on /ws.
class HttpSession : public std::enable_shared_from_this<HttpSession>
{
public:
  HttpSession(tcp::socket socket, Hub & hub, Broadcaster & bc, const TeleopCore & core)
      : stream_(std::move(socket)), hub_(hub), bc_(bc), core_(core)
  {}

  void run()
  {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

private:
  void on_read(beast::error_code ec, std::size_t)
  {
    if (ec) { return; }
    if (websocket::is_upgrade(req_)) {
      if (req_.target() == "/ws") {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), hub_, bc_)->run(std::move(req_));
        return;
      }
      reply(http::status::not_found, R"({"error":"not found"})");
      return;
    }
    if (req_.method() == http::verb::get && req_.target() == "/healthz") {
      reply(http::status::ok, serialize(nlohmann::json{{"status", "ok"}, {"t", core_.sim_time()}}));
      return;
    }
    reply(http::status::not_found, R"({"error":"not found"})");
  }

  void reply(http::status status, std::string body)
  {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::content_type, "application/json");
    res->keep_alive(false);
    res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  Hub & hub_;
  Broadcaster & bc_;
  const TeleopCore & core_;
};

/**
 * Websocket front end plus the real-time loop thread. Bind to port 0 to let
 * the OS pick; port() reports the bound port.
 */
class Server
{
public:
  Server(TeleopOptions opt, const std::string & bind, int io_threads = 2)
      : core_(std::move(opt)), hub_(core_), acceptor_(ioc_), io_threads_(std::max(1, io_threads))
  {
    const tcp::endpoint ep = parse_bind(bind);
    beast::error_code ec;
    acceptor_.open(ep.protocol(), ec);
    if (!ec) { acceptor_.set_option(net::socket_base::reuse_address(true), ec); }
    if (!ec) { acceptor_.bind(ep, ec); }
    if (!ec) { acceptor_.listen(net::socket_base::max_listen_connections, ec); }
    if (ec) { throw Error("cannot listen on " + bind + ": " + ec.message()); }
    core_.set_sink([this](std::shared_ptr<const std::string> frame) { bc_.send(frame); });
  }

  ~Server() { stop(); }

  Server(const Server &) = delete;
  Server & operator=(const Server &) = delete;

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void start()
  {
    do_accept();
    for (int i = 0; i < io_threads_; ++i) {
      io_.emplace_back([this] { ioc_.run(); });
    }
    loop_ = std::jthread([this](std::stop_token st) { core_.run_realtime(st); });
  }

  /// Stops the loop and the network; the core keeps the trace for inspection.
  void stop()
  {
    if (stopped_) { return; }
    stopped_ = true;
    if (loop_.joinable()) {
      loop_.request_stop();
      loop_.join();
    }
    ioc_.stop();
    for (auto & t : io_) {
      if (t.joinable()) { t.join(); }
    }
  }

  TeleopCore & core() { return core_; }
  Hub & hub() { return hub_; }

private:
  void do_accept()
  {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (!ec) { std::make_shared<HttpSession>(std::move(socket), hub_, bc_, core_)->run(); }
      if (acceptor_.is_open()) { do_accept(); }
    });
  }

  TeleopCore core_;
  Hub hub_;
  Broadcaster bc_;
  net::io_context ioc_;
  tcp::acceptor acceptor_;
  int io_threads_;
  std::vector<std::thread> io_;
  std::jthread loop_;
  bool stopped_ = false;
};

}  // namespace pcbf::teleop
