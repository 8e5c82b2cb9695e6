#pragma once

// Networked NDCP: each source serves intervals from its private shard, an
// aggregator fans a request out and combines the replies.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "aggregation.hpp"
#include "conformal.hpp"
#include "net.hpp"

namespace ndcp {

/// Serves one fitted predictor. Listening starts in the constructor; the
/// model is never mutated, so connections are handled concurrently.
class NodeServer {
 public:
  NodeServer(std::shared_ptr<const ConformalPredictor> model, const std::string& bind_address);
  ~NodeServer();
  NodeServer(const NodeServer&) = delete;
  NodeServer& operator=(const NodeServer&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();

  /// Reply line for one request line.
  static std::string respond(const ConformalPredictor& model, std::string_view line);

 private:
  struct Connection {
    std::jthread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  void accept_loop(std::stop_token stop);
  static void serve_connection(std::stop_token stop, const ConformalPredictor& model, net::TcpStream stream);

  std::shared_ptr<const ConformalPredictor> model_;
  std::optional<net::TcpListener> listener_;
  std::uint16_t port_ = 0;
  std::mutex mutex_;
  std::list<Connection> connections_;
  std::atomic<bool> stopped_{false};
  std::jthread acceptor_;
};

struct AggregatorOptions {
  std::chrono::milliseconds timeout{10000};
  /// Minimum number of responders; unset means every node.
  std::optional<std::size_t> quorum;
};

/// Observer of every byte the aggregator sends or receives, per node.
using WireTap = std::function<void(std::size_t node, bool outgoing, std::string_view bytes)>;

/// Holds one persistent connection per node. Not safe for concurrent
/// predict() calls.
class Aggregator {
 public:
  explicit Aggregator(std::vector<std::string> addresses, AggregatorOptions options = {}, WireTap tap = {});

  std::size_t node_count() const noexcept { return links_.size(); }

  /// Fans (x, eps) out to every node and combines the replies in node order.
  CombinedInterval predict(std::span<const double> x, double epsilon);
  /// Feature count reported by each node; nullopt for unreachable ones.
  std::vector<std::optional<std::size_t>> health();

 private:
  struct Link {
    std::string address;
    std::optional<net::TcpStream> stream;
  };

  std::string exchange(std::size_t node, const std::string& line);

  std::vector<Link> links_;
  AggregatorOptions options_;
  WireTap tap_;
  std::mutex tap_mutex_;
  std::uint64_t next_id_ = 0;
};

CombinedInterval aggregate_predict(const std::vector<std::string>& addresses, std::span<const double> x,
                                   double epsilon, const AggregatorOptions& options = {});

}  // namespace ndcp
