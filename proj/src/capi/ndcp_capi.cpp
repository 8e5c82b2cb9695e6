#include "ndcp/ndcp.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "aggregation.hpp"
#include "config.hpp"
#include "conformal.hpp"
#include "data.hpp"
#include "experiment.hpp"
#include "node.hpp"
#include "protocol.hpp"
#include "report.hpp"

struct ndcp_dataset {
  ndcp::Dataset data;
};

struct ndcp_predictor {
  std::shared_ptr<const ndcp::ConformalPredictor> model;
};

struct ndcp_node {
  std::unique_ptr<ndcp::NodeServer> server;
};

struct ndcp_aggregator {
  std::unique_ptr<ndcp::Aggregator> aggregator;
};

struct ndcp_report {
  ndcp::ExperimentReport report;
};

namespace {

thread_local std::string last_error;

ndcp_status fail(ndcp_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
ndcp_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return NDCP_OK;
  } catch (const ndcp::QuorumError& e) {
    return fail(NDCP_ERR_QUORUM, e.what());
  } catch (const ndcp::net::NetworkError& e) {
    return fail(NDCP_ERR_NETWORK, e.what());
  } catch (const ndcp::protocol::ProtocolError& e) {
    return fail(NDCP_ERR_NETWORK, e.what());
  } catch (const ndcp::DataError& e) {
    return fail(NDCP_ERR_PARSE, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(NDCP_ERR_PARSE, e.what());
  } catch (const ndcp::FitError& e) {
    return fail(NDCP_ERR_FIT, e.what());
  } catch (const ndcp::ExperimentError& e) {
    return fail(NDCP_ERR_FIT, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(NDCP_ERR_INVALID, e.what());
  } catch (const std::out_of_range& e) {
    return fail(NDCP_ERR_INVALID, e.what());
  } catch (const std::bad_alloc&) {
    return fail(NDCP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(NDCP_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(NDCP_ERR_INTERNAL, "unknown error");
  }
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json parse_json(const char* text) {
  if (text == nullptr || *text == '\0') return nlohmann::json::object();
  return nlohmann::json::parse(text);
}

bool readable(const std::filesystem::path& path) {
  std::ifstream in(path);
  return static_cast<bool>(in);
}

#define NDCP_REQUIRE(cond, msg) \
  do {                          \
    if (!(cond)) return fail(NDCP_ERR_INVALID, msg); \
  } while (0)

}  // namespace

extern "C" {

const char* ndcp_last_error(void) { return last_error.c_str(); }

void ndcp_free_string(char* s) { std::free(s); }

const char* ndcp_version(void) { return "1.0.0"; }

ndcp_status ndcp_dataset_load_csv(const char* path, const char* label_column, ndcp_dataset** out) {
  NDCP_REQUIRE(path != nullptr && out != nullptr, "null argument");
  *out = nullptr;
  if (!readable(path)) return fail(NDCP_ERR_IO, std::string("cannot open '") + path + "'");
  return guarded([&] { *out = new ndcp_dataset{ndcp::load_csv(path, label_column ? label_column : "")}; });
}

ndcp_status ndcp_dataset_from_arrays(const double* features, const double* labels, size_t n, size_t p,
                                     ndcp_dataset** out) {
  NDCP_REQUIRE(features != nullptr && labels != nullptr && out != nullptr, "null argument");
  *out = nullptr;
  return guarded([&] {
    std::vector<std::string> names;
    for (size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
    *out = new ndcp_dataset{ndcp::Dataset(p, std::vector<double>(features, features + n * p),
                                          std::vector<double>(labels, labels + n), std::move(names), "y")};
  });
}

size_t ndcp_dataset_size(const ndcp_dataset* d) { return d ? d->data.size() : 0; }

size_t ndcp_dataset_feature_count(const ndcp_dataset* d) { return d ? d->data.feature_count() : 0; }

ndcp_status ndcp_dataset_row(const ndcp_dataset* d, size_t i, double* features_out, double* label_out) {
  NDCP_REQUIRE(d != nullptr, "null dataset");
  NDCP_REQUIRE(i < d->data.size(), "row index out of range");
  if (features_out != nullptr) {
    const auto row = d->data.row(i);
    std::copy(row.begin(), row.end(), features_out);
  }
  if (label_out != nullptr) *label_out = d->data.label(i);
  last_error.clear();
  return NDCP_OK;
}

ndcp_status ndcp_dataset_split(const ndcp_dataset* d, double test_fraction, uint64_t seed, ndcp_dataset** train,
                               ndcp_dataset** test) {
  NDCP_REQUIRE(d != nullptr && train != nullptr && test != nullptr, "null argument");
  *train = *test = nullptr;
  return guarded([&] {
    auto [a, b] = ndcp::train_test_split(d->data, test_fraction, seed);
    auto tr = std::make_unique<ndcp_dataset>(ndcp_dataset{std::move(a)});
    auto te = std::make_unique<ndcp_dataset>(ndcp_dataset{std::move(b)});
    *train = tr.release();
    *test = te.release();
  });
}

ndcp_status ndcp_dataset_partition(const ndcp_dataset* d, const char* scheme, size_t k, uint64_t seed,
                                   ndcp_dataset** shards_out) {
  NDCP_REQUIRE(d != nullptr && scheme != nullptr && shards_out != nullptr, "null argument");
  return guarded([&] {
    ndcp::PartitionPlan plan;
    plan.scheme = ndcp::partition_scheme_from_string(scheme);
    plan.source_count = k;
    plan.seed = seed;
    auto shards = ndcp::partition(d->data, plan);
    std::vector<std::unique_ptr<ndcp_dataset>> owned;
    for (auto& s : shards) owned.push_back(std::make_unique<ndcp_dataset>(ndcp_dataset{std::move(s)}));
    for (size_t i = 0; i < owned.size(); ++i) shards_out[i] = owned[i].release();
  });
}

ndcp_status ndcp_dataset_write_csv(const ndcp_dataset* d, const char* path) {
  NDCP_REQUIRE(d != nullptr && path != nullptr, "null argument");
  try {
    ndcp::write_csv(d->data, path);
  } catch (const std::exception& e) {
    return fail(NDCP_ERR_IO, e.what());
  }
  last_error.clear();
  return NDCP_OK;
}

void ndcp_dataset_free(ndcp_dataset* d) { delete d; }

ndcp_status ndcp_predictor_fit(const ndcp_dataset* shard, const char* config_json, uint64_t seed,
                               ndcp_predictor** out) {
  NDCP_REQUIRE(shard != nullptr && out != nullptr, "null argument");
  *out = nullptr;
  return guarded([&] {
    const auto config = ndcp::predictor_config_from_json(parse_json(config_json));
    auto model = std::make_shared<const ndcp::ConformalPredictor>(ndcp::fit_conformal(shard->data, config, seed));
    *out = new ndcp_predictor{std::move(model)};
  });
}

size_t ndcp_predictor_feature_count(const ndcp_predictor* p) { return p ? p->model->feature_count() : 0; }

ndcp_status ndcp_predictor_interval(const ndcp_predictor* p, const double* x, size_t len, double epsilon,
                                    double* lower, double* upper) {
  NDCP_REQUIRE(p != nullptr && x != nullptr && lower != nullptr && upper != nullptr, "null argument");
  return guarded([&] {
    const auto iv = p->model->interval(std::span<const double>(x, len), epsilon);
    *lower = iv.lower;
    *upper = iv.upper;
  });
}

ndcp_status ndcp_predictor_point(const ndcp_predictor* p, const double* x, size_t len, double* out) {
  NDCP_REQUIRE(p != nullptr && x != nullptr && out != nullptr, "null argument");
  NDCP_REQUIRE(len == p->model->feature_count(), "feature length does not match the model");
  return guarded([&] { *out = p->model->predict(std::span<const double>(x, len)); });
}

void ndcp_predictor_free(ndcp_predictor* p) { delete p; }

ndcp_status ndcp_combine(const double* lowers, const double* uppers, size_t k, double* lower, double* upper) {
  NDCP_REQUIRE(lowers != nullptr && uppers != nullptr && lower != nullptr && upper != nullptr, "null argument");
  return guarded([&] {
    std::vector<ndcp::PredictionInterval> intervals;
    intervals.reserve(k);
    for (size_t i = 0; i < k; ++i) intervals.push_back({lowers[i], uppers[i], 0.05});
    const auto iv = ndcp::combine(intervals);
    *lower = iv.lower;
    *upper = iv.upper;
  });
}

ndcp_status ndcp_node_start(const ndcp_predictor* p, const char* bind, ndcp_node** out) {
  NDCP_REQUIRE(p != nullptr && bind != nullptr && out != nullptr, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new ndcp_node{std::make_unique<ndcp::NodeServer>(p->model, bind)}; });
}

uint16_t ndcp_node_port(const ndcp_node* n) { return n ? n->server->port() : 0; }

void ndcp_node_stop(ndcp_node* n) {
  if (n != nullptr) n->server->stop();
}

void ndcp_node_wait(ndcp_node* n) {
  if (n != nullptr) n->server->wait();
}

void ndcp_node_free(ndcp_node* n) { delete n; }

ndcp_status ndcp_aggregator_create(const char* const* addresses, size_t count, uint32_t timeout_ms, size_t quorum,
                                   ndcp_wire_tap tap, void* tap_user, ndcp_aggregator** out) {
  NDCP_REQUIRE(addresses != nullptr && out != nullptr, "null argument");
  *out = nullptr;
  return guarded([&] {
    std::vector<std::string> list;
    for (size_t i = 0; i < count; ++i) {
      if (addresses[i] == nullptr) throw std::invalid_argument("null node address");
      list.emplace_back(addresses[i]);
    }
    ndcp::AggregatorOptions options;
    options.timeout = std::chrono::milliseconds(timeout_ms);
    if (quorum > 0) options.quorum = quorum;
    ndcp::WireTap wire;
    if (tap != nullptr) {
      wire = [tap, tap_user](std::size_t node, bool outgoing, std::string_view bytes) {
        tap(tap_user, node, outgoing ? 1 : 0, bytes.data(), bytes.size());
      };
    }
    *out = new ndcp_aggregator{std::make_unique<ndcp::Aggregator>(std::move(list), options, std::move(wire))};
  });
}

ndcp_status ndcp_aggregator_predict(ndcp_aggregator* a, const double* x, size_t len, double epsilon, double* lower,
                                    double* upper, size_t* responders) {
  NDCP_REQUIRE(a != nullptr && x != nullptr && lower != nullptr && upper != nullptr, "null argument");
  return guarded([&] {
    const auto combined = a->aggregator->predict(std::span<const double>(x, len), epsilon);
    *lower = combined.interval.lower;
    *upper = combined.interval.upper;
    if (responders != nullptr) *responders = combined.per_source.size();
  });
}

void ndcp_aggregator_free(ndcp_aggregator* a) { delete a; }

ndcp_status ndcp_experiment_config_resolve(const char* config_json, char** out_json) {
  NDCP_REQUIRE(out_json != nullptr, "null argument");
  *out_json = nullptr;
  return guarded([&] {
    const auto cfg = ndcp::experiment_config_from_json(parse_json(config_json));
    *out_json = duplicate(ndcp::to_json(cfg).dump(2));
  });
}

ndcp_status ndcp_experiment_run(const char* config_json, ndcp_progress_fn progress, void* user,
                                ndcp_report** out) {
  NDCP_REQUIRE(out != nullptr, "null argument");
  *out = nullptr;
  ndcp::ExperimentConfig cfg;
  const ndcp_status parsed = guarded([&] { cfg = ndcp::experiment_config_from_json(parse_json(config_json)); });
  if (parsed != NDCP_OK) return parsed;
  if (!readable(cfg.dataset)) return fail(NDCP_ERR_IO, "cannot open dataset '" + cfg.dataset + "'");
  return guarded([&] {
    ndcp::ProgressFn fn;
    if (progress != nullptr) fn = [progress, user](std::size_t done, std::size_t total) { progress(user, done, total); };
    *out = new ndcp_report{ndcp::run_experiment(cfg, fn)};
  });
}

ndcp_status ndcp_report_write_json(const ndcp_report* r, const char* path) {
  NDCP_REQUIRE(r != nullptr && path != nullptr, "null argument");
  try {
    ndcp::write_report_json(r->report, path);
  } catch (const std::exception& e) {
    return fail(NDCP_ERR_IO, e.what());
  }
  last_error.clear();
  return NDCP_OK;
}

ndcp_status ndcp_report_write_csv(const ndcp_report* r, const char* path) {
  NDCP_REQUIRE(r != nullptr && path != nullptr, "null argument");
  try {
    ndcp::write_report_csv(r->report, path);
  } catch (const std::exception& e) {
    return fail(NDCP_ERR_IO, e.what());
  }
  last_error.clear();
  return NDCP_OK;
}

ndcp_status ndcp_report_summary(const ndcp_report* r, char** out) {
  NDCP_REQUIRE(r != nullptr && out != nullptr, "null argument");
  return guarded([&] { *out = duplicate(ndcp::report_summary(r->report)); });
}

ndcp_status ndcp_report_to_json(const ndcp_report* r, char** out) {
  NDCP_REQUIRE(r != nullptr && out != nullptr, "null argument");
  return guarded([&] { *out = duplicate(ndcp::report_to_json(r->report).dump(2)); });
}

void ndcp_report_free(ndcp_report* r) { delete r; }

}  // extern "C"
