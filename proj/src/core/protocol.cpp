#include "protocol.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

namespace ndcp::protocol {

using nlohmann::json;

namespace {

template <typename... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <typename... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

json bound(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double read_bound(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ProtocolError(std::string("missing field '") + key + "'");
  if (it->is_string()) {
    const auto& s = it->get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ProtocolError(std::string("field '") + key + "' is not a number");
  }
  if (!it->is_number()) throw ProtocolError(std::string("field '") + key + "' is not a number");
  return it->get<double>();
}

std::string read_string(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw ProtocolError(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

}  // namespace

std::string encode(const Message& message) {
  const json j = std::visit(
      Overloaded{
          [](const PredictRequest& m) -> json {
            for (double v : m.x) {
              if (!std::isfinite(v)) throw ProtocolError("feature values must be finite");
            }
            return {{"type", "predict"}, {"id", m.id}, {"x", m.x}, {"eps", m.eps}};
          },
          [](const HealthRequest&) -> json { return {{"type", "health"}}; },
          [](const IntervalResponse& m) -> json {
            return {{"type", "interval"}, {"id", m.id}, {"lo", bound(m.lo)}, {"hi", bound(m.hi)}};
          },
          [](const HealthResponse& m) -> json { return {{"type", "ok"}, {"status", "ready"}, {"p", m.p}}; },
          [](const ErrorResponse& m) -> json { return {{"type", "error"}, {"id", m.id}, {"msg", m.msg}}; },
      },
      message);
  return j.dump();
}

Message decode(std::string_view line, std::string* id_out) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error&) {
    throw ProtocolError("malformed JSON");
  }
  if (!j.is_object()) throw ProtocolError("message must be a JSON object");
  if (id_out != nullptr) {
    if (auto it = j.find("id"); it != j.end() && it->is_string()) *id_out = it->get<std::string>();
  }
  const std::string type = read_string(j, "type");
  if (type == "predict") {
    PredictRequest r;
    r.id = read_string(j, "id");
    const auto x = j.find("x");
    if (x == j.end() || !x->is_array()) throw ProtocolError("missing array field 'x'");
    r.x.reserve(x->size());
    for (const auto& v : *x) {
      if (!v.is_number()) throw ProtocolError("feature values must be numbers");
      r.x.push_back(v.get<double>());
    }
    const auto eps = j.find("eps");
    if (eps == j.end() || !eps->is_number()) throw ProtocolError("missing number field 'eps'");
    r.eps = eps->get<double>();
    return r;
  }
  if (type == "health") return HealthRequest{};
  if (type == "interval") return IntervalResponse{read_string(j, "id"), read_bound(j, "lo"), read_bound(j, "hi")};
  if (type == "ok") {
    const auto p = j.find("p");
    if (p == j.end() || !p->is_number_unsigned()) throw ProtocolError("missing field 'p'");
    return HealthResponse{p->get<std::size_t>()};
  }
  if (type == "error") {
    std::string id;
    if (auto it = j.find("id"); it != j.end() && it->is_string()) id = it->get<std::string>();
    return ErrorResponse{id, read_string(j, "msg")};
  }
  throw ProtocolError("unknown message type '" + type + "'");
}

}  // namespace ndcp::protocol
