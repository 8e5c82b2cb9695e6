#include "node.hpp"

#include <future>

#include "protocol.hpp"

namespace ndcp {

namespace {

constexpr std::chrono::milliseconds kPollInterval{100};
constexpr std::chrono::seconds kLineTimeout{30};

}  // namespace

NodeServer::NodeServer(std::shared_ptr<const ConformalPredictor> model, const std::string& bind_address)
    : model_(std::move(model)) {
  if (!model_) throw std::invalid_argument("node: no model");
  listener_.emplace(net::TcpListener::bind(bind_address));
  port_ = listener_->port();
  acceptor_ = std::jthread([this](std::stop_token st) { accept_loop(st); });
}

NodeServer::~NodeServer() { stop(); }

void NodeServer::stop() {
  acceptor_.request_stop();
  if (acceptor_.joinable()) acceptor_.join();
  listener_.reset();
  std::list<Connection> connections;
  {
    std::lock_guard lock(mutex_);
    connections.swap(connections_);
  }
  for (auto& c : connections) c.thread.request_stop();
  connections.clear();
  stopped_ = true;
  stopped_.notify_all();
}

void NodeServer::wait() { stopped_.wait(false); }

std::string NodeServer::respond(const ConformalPredictor& model, std::string_view line) {
  std::string id;
  try {
    const auto message = protocol::decode(line, &id);
    if (std::holds_alternative<protocol::HealthRequest>(message)) {
      return protocol::encode(protocol::HealthResponse{model.feature_count()});
    }
    const auto* request = std::get_if<protocol::PredictRequest>(&message);
    if (request == nullptr) return protocol::encode(protocol::ErrorResponse{id, "unexpected message type"});
    if (request->x.size() != model.feature_count()) {
      return protocol::encode(protocol::ErrorResponse{
          id, "expected " + std::to_string(model.feature_count()) + " features, got " +
                  std::to_string(request->x.size())});
    }
    const auto iv = model.interval(request->x, request->eps);
    return protocol::encode(protocol::IntervalResponse{request->id, iv.lower, iv.upper});
  } catch (const std::exception& e) {
    return protocol::encode(protocol::ErrorResponse{id, e.what()});
  }
}

void NodeServer::accept_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    std::optional<net::TcpStream> stream;
    try {
      stream = listener_->accept(kPollInterval);
    } catch (const net::NetworkError&) {
      continue;
    }
    std::lock_guard lock(mutex_);
    connections_.remove_if([](const Connection& c) { return c.done->load(); });
    if (!stream) continue;
    auto done = std::make_shared<std::atomic<bool>>(false);
    connections_.push_back(
        {std::jthread([model = model_, done, s = std::move(*stream)](std::stop_token st) mutable {
           serve_connection(st, *model, std::move(s));
           *done = true;
         }),
         done});
  }
}

void NodeServer::serve_connection(std::stop_token stop, const ConformalPredictor& model, net::TcpStream stream) {
  try {
    while (!stop.stop_requested()) {
      if (!stream.wait_readable(kPollInterval)) continue;
      const auto line = stream.read_line(net::Clock::now() + kLineTimeout);
      if (!line) return;
      if (line->empty()) continue;
      stream.write_all(respond(model, *line) + "\n", net::Clock::now() + kLineTimeout);
    }
  } catch (const std::exception&) {
    // Peer went away or misbehaved; drop the connection.
  }
}

Aggregator::Aggregator(std::vector<std::string> addresses, AggregatorOptions options, WireTap tap)
    : options_(options), tap_(std::move(tap)) {
  if (addresses.empty()) throw std::invalid_argument("aggregator: no node addresses");
  for (auto& a : addresses) {
    net::parse_host_port(a);
    links_.push_back({std::move(a), std::nullopt});
  }
  if (options_.quorum && (*options_.quorum == 0 || *options_.quorum > links_.size())) {
    throw std::invalid_argument("aggregator: quorum must be between 1 and the number of nodes");
  }
}

std::string Aggregator::exchange(std::size_t node, const std::string& line) {
  auto& link = links_[node];
  const auto deadline = net::Clock::now() + options_.timeout;
  try {
    if (!link.stream) link.stream.emplace(net::TcpStream::connect(link.address, options_.timeout));
    const std::string out = line + "\n";
    if (tap_) {
      std::lock_guard lock(tap_mutex_);
      tap_(node, true, out);
    }
    link.stream->write_all(out, deadline);
    auto reply = link.stream->read_line(deadline);
    if (!reply) throw net::NetworkError("connection closed by node");
    if (tap_) {
      std::lock_guard lock(tap_mutex_);
      tap_(node, false, *reply + "\n");
    }
    return *reply;
  } catch (...) {
    link.stream.reset();
    throw;
  }
}

CombinedInterval Aggregator::predict(std::span<const double> x, double epsilon) {
  validate_significance(epsilon);
  const std::string id = "q" + std::to_string(next_id_++);
  const std::string line = protocol::encode(protocol::PredictRequest{id, {x.begin(), x.end()}, epsilon});

  std::vector<std::future<PredictionInterval>> replies;
  replies.reserve(links_.size());
  for (std::size_t k = 0; k < links_.size(); ++k) {
    replies.push_back(std::async(std::launch::async, [this, k, &line, &id, epsilon] {
      const auto message = protocol::decode(exchange(k, line));
      if (const auto* err = std::get_if<protocol::ErrorResponse>(&message)) {
        throw std::runtime_error("node error: " + err->msg);
      }
      const auto* iv = std::get_if<protocol::IntervalResponse>(&message);
      if (iv == nullptr) throw protocol::ProtocolError("unexpected reply type");
      if (iv->id != id) throw protocol::ProtocolError("reply id mismatch");
      if (!(iv->lo <= iv->hi)) throw protocol::ProtocolError("reply bounds out of order");
      return PredictionInterval{iv->lo, iv->hi, epsilon};
    }));
  }

  CombinedInterval out;
  out.source_count = links_.size();
  std::vector<std::string> outcomes;
  for (std::size_t k = 0; k < replies.size(); ++k) {
    try {
      out.per_source.push_back(replies[k].get());
      outcomes.push_back(links_[k].address + ": ok");
    } catch (const std::exception& e) {
      out.failed_sources.push_back(k);
      outcomes.push_back(links_[k].address + ": " + e.what());
    }
  }
  const std::size_t required = options_.quorum.value_or(links_.size());
  if (out.per_source.size() < required) throw QuorumError(out.per_source.size(), required, std::move(outcomes));
  out.interval = combine(out.per_source);
  return out;
}

std::vector<std::optional<std::size_t>> Aggregator::health() {
  const std::string line = protocol::encode(protocol::HealthRequest{});
  std::vector<std::optional<std::size_t>> out(links_.size());
  for (std::size_t k = 0; k < links_.size(); ++k) {
    try {
      const auto message = protocol::decode(exchange(k, line));
      if (const auto* h = std::get_if<protocol::HealthResponse>(&message)) out[k] = h->p;
    } catch (const std::exception&) {
    }
  }
  return out;
}

CombinedInterval aggregate_predict(const std::vector<std::string>& addresses, std::span<const double> x,
                                   double epsilon, const AggregatorOptions& options) {
  Aggregator aggregator(addresses, options);
  return aggregator.predict(x, epsilon);
}

}  // namespace ndcp
