#pragma once

// Wire messages for the node protocol: one JSON object per line.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ndcp::protocol {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PredictRequest {
  std::string id;
  std::vector<double> x;
  double eps = 0.0;
  bool operator==(const PredictRequest&) const = default;
};

struct HealthRequest {
  bool operator==(const HealthRequest&) const = default;
};

/// Carries the interval and nothing else about the source.
struct IntervalResponse {
  std::string id;
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const IntervalResponse&) const = default;
};

struct HealthResponse {
  std::size_t p = 0;
  bool operator==(const HealthResponse&) const = default;
};

struct ErrorResponse {
  std::string id;
  std::string msg;
  bool operator==(const ErrorResponse&) const = default;
};

using Message = std::variant<PredictRequest, HealthRequest, IntervalResponse, HealthResponse, ErrorResponse>;

/// Single line, no terminator.
std::string encode(const Message& message);

/// Parses one line. Throws ProtocolError on malformed input; the id of a
/// malformed predict request is reported through `id_out` when readable.
Message decode(std::string_view line, std::string* id_out = nullptr);

}  // namespace ndcp::protocol
