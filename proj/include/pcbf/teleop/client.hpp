#pragma once

#include <atomic>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "pcbf/errors.hpp"

namespace pcbf::teleop {

/**
 * Minimal websocket client with its own I/O thread. Frames arrive through
 * the callback on that thread; send() may be called from any thread.
 */
class WsClient
{
public:
  using Handler = std::function<void(const std::string &)>;

  WsClient(const std::string & host, unsigned short port, Handler on_message)
      : resolver_(ioc_), ws_(ioc_), on_message_(std::move(on_message))
  {
    namespace net = boost::asio;
    auto results = resolver_.resolve(host, std::to_string(port));
    net::connect(ws_.next_layer(), results.begin(), results.end());
    ws_.read_message_max(1 << 20);
    ws_.handshake(host + ":" + std::to_string(port), "/ws");
    do_read();
    thread_ = std::thread([this] { ioc_.run(); });
  }

  ~WsClient() { close(); }

  WsClient(const WsClient &) = delete;
  WsClient & operator=(const WsClient &) = delete;

  void send(std::string text)
  {
    boost::asio::post(ioc_, [this, text = std::move(text)]() mutable {
      if (closing_) { return; }
      out_.push_back(std::move(text));
      if (out_.size() == 1) { do_write(); }
    });
  }

  /// Blocks until queued frames are written and the close handshake has been sent.
  void close()
  {
    if (!thread_.joinable()) { return; }
    boost::asio::post(ioc_, [this] {
      closing_ = true;
      if (out_.empty()) { do_close(); }
    });
    thread_.join();
  }

  bool failed() const { return failed_; }

private:
  void do_read()
  {
    ws_.async_read(in_, [this](boost::beast::error_code ec, std::size_t) {
      if (ec) {
        if (!closing_) { failed_ = true; }
        return;
      }
      if (on_message_) { on_message_(boost::beast::buffers_to_string(in_.data())); }
      in_.consume(in_.size());
      do_read();
    });
  }

  void do_write()
  {
    ws_.text(true);
    ws_.async_write(boost::asio::buffer(out_.front()), [this](boost::beast::error_code ec, std::size_t) {
      if (ec) {
        failed_ = true;
        out_.clear();
        return;
      }
      out_.pop_front();
      if (!out_.empty()) {
        do_write();
      } else if (closing_) {
        do_close();
      }
    });
  }

  void do_close()
  {
    ws_.async_close(boost::beast::websocket::close_code::normal, [this](boost::beast::error_code) {
      boost::beast::error_code ignored;
      ws_.next_layer().close(ignored);
    });
  }

  boost::asio::io_context ioc_;
  boost::asio::ip::tcp::resolver resolver_;
  boost::beast::websocket::stream<boost::asio::ip::tcp::socket> ws_;
  boost::beast::flat_buffer in_;
  std::deque<std::string> out_;
  Handler on_message_;
  std::thread thread_;
  bool closing_ = false;
  std::atomic<bool> failed_{false};
};

/// Synchronous GET returning the response body.
inline std::string http_get(const std::string & host, unsigned short port, const std::string & target)
{
  namespace net = boost::asio;
  namespace http = boost::beast::http;
  net::io_context ioc;
  net::ip::tcp::resolver resolver(ioc);
  boost::beast::tcp_stream stream(ioc);
  stream.connect(resolver.resolve(host, std::to_string(port)));
  http::request<http::empty_body> req{http::verb::get, target, 11};
  req.set(http::field::host, host);
  http::write(stream, req);
  boost::beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(stream, buf, res);
  boost::beast::error_code ignored;
  stream.socket().shutdown(net::ip::tcp::socket::shutdown_both, ignored);
  if (res.result() != http::status::ok) { throw Error("GET " + target + " returned " + std::to_string(res.result_int())); }
  return res.body();
}

}  // namespace pcbf::teleop
