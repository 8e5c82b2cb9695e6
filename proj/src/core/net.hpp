#pragma once

// Minimal blocking TCP over POSIX sockets with poll()-based deadlines.

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace ndcp::net {

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

/// Splits "host:port"; the port must be numeric.
std::pair<std::string, std::uint16_t> parse_host_port(const std::string& address);

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) noexcept : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  void shutdown() noexcept;

 private:
  int fd_ = -1;
};

/// Connected stream with newline framing.
class TcpStream {
 public:
  static constexpr std::size_t kMaxLine = 1 << 20;

  explicit TcpStream(Socket s) : socket_(std::move(s)) {}

  static TcpStream connect(const std::string& address, std::chrono::milliseconds timeout);

  void write_all(std::string_view bytes, Clock::time_point deadline);
  /// Next line without its terminator; nullopt on orderly EOF. Throws on
  /// deadline expiry or when a line exceeds kMaxLine.
  std::optional<std::string> read_line(Clock::time_point deadline);
  /// True when a buffered line or socket data is available within `wait`.
  bool wait_readable(std::chrono::milliseconds wait);

  void shutdown() noexcept { socket_.shutdown(); }
  int fd() const noexcept { return socket_.fd(); }

 private:
  Socket socket_;
  std::string buffer_;
};

class TcpListener {
 public:
  /// Binds and listens; port 0 picks an ephemeral port.
  static TcpListener bind(const std::string& address);

  std::uint16_t port() const noexcept { return port_; }
  /// Waits up to `wait` for a client.
  std::optional<TcpStream> accept(std::chrono::milliseconds wait);

 private:
  TcpListener(Socket s, std::uint16_t port) : socket_(std::move(s)), port_(port) {}
  Socket socket_;
  std::uint16_t port_;
};

}  // namespace ndcp::net
