// ndcp command-line tool. Talks to the library only through the C API.

#include <ndcp/ndcp.h>

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Library failure carrying the C status and message.
struct LibraryError : std::runtime_error {
  ndcp_status status;
  LibraryError(ndcp_status s, const std::string& what) : std::runtime_error(what), status(s) {}
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(ndcp_status status, const std::string& context) {
  if (status != NDCP_OK) throw LibraryError(status, context + ": " + ndcp_last_error());
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const noexcept { Free(p); }
};

using DatasetPtr = std::unique_ptr<ndcp_dataset, Deleter<ndcp_dataset, ndcp_dataset_free>>;
using PredictorPtr = std::unique_ptr<ndcp_predictor, Deleter<ndcp_predictor, ndcp_predictor_free>>;
using NodePtr = std::unique_ptr<ndcp_node, Deleter<ndcp_node, ndcp_node_free>>;
using AggregatorPtr = std::unique_ptr<ndcp_aggregator, Deleter<ndcp_aggregator, ndcp_aggregator_free>>;
using ReportPtr = std::unique_ptr<ndcp_report, Deleter<ndcp_report, ndcp_report_free>>;

std::string take_string(char* s) {
  std::string out = s ? s : "";
  ndcp_free_string(s);
  return out;
}

std::string shortest(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

std::optional<std::uint64_t> env_seed() {
  const char* text = std::getenv("NDCP_SEED");
  if (text == nullptr || *text == '\0') return std::nullopt;
  std::uint64_t v = 0;
  const char* end = text + std::strlen(text);
  auto [ptr, ec] = std::from_chars(text, end, v);
  if (ec != std::errc{} || ptr != end) throw UsageError(std::string("NDCP_SEED is not an integer: ") + text);
  return v;
}

// Flag beats config beats NDCP_SEED beats `fallback`.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const json& config, std::uint64_t fallback) {
  if (flag) return *flag;
  if (config.contains("seed")) return config["seed"].get<std::uint64_t>();
  return env_seed().value_or(fallback);
}

DatasetPtr load_dataset(const std::string& path, const std::string& label) {
  ndcp_dataset* d = nullptr;
  check(ndcp_dataset_load_csv(path.c_str(), label.c_str(), &d), "loading '" + path + "'");
  return DatasetPtr(d);
}

PredictorPtr fit_predictor(const ndcp_dataset* shard, const json& config, std::uint64_t seed) {
  ndcp_predictor* p = nullptr;
  check(ndcp_predictor_fit(shard, config.dump().c_str(), seed, &p), "fitting predictor");
  return PredictorPtr(p);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct IntervalRow {
  double lower;
  double upper;
  double truth;
};

void emit_intervals(const std::vector<IntervalRow>& rows, const std::string& output) {
  std::ostringstream out;
  out << "row,lower,upper,label\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << i << ',' << shortest(rows[i].lower) << ',' << shortest(rows[i].upper) << ',' << shortest(rows[i].truth)
        << '\n';
  }
  if (output.empty() || output == "-") {
    std::cout << out.str();
  } else {
    std::ofstream f(output, std::ios::binary);
    if (!f || !(f << out.str())) throw LibraryError(NDCP_ERR_IO, "cannot write '" + output + "'");
  }
  std::size_t covered = 0;
  std::vector<double> widths;
  for (const auto& r : rows) {
    covered += r.lower <= r.truth && r.truth <= r.upper;
    widths.push_back(r.upper - r.lower);
  }
  if (rows.empty()) return;
  std::sort(widths.begin(), widths.end());
  const std::size_t n = widths.size();
  const double median = n % 2 ? widths[n / 2] : (widths[n / 2 - 1] + widths[n / 2]) / 2.0;
  std::fprintf(stderr, "%zu predictions, validity %.3f, median width %.3f\n", n,
               static_cast<double>(covered) / static_cast<double>(n), median);
}

// experiment

struct ExperimentArgs {
  std::string config;
  std::string dataset;
  std::optional<std::size_t> repetitions;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string out_dir = ".";
  bool progress = false;
};

void progress_printer(void*, size_t done, size_t total) {
  std::fprintf(stderr, "\r%zu/%zu repetitions", done, total);
  if (done == total) std::fputc('\n', stderr);
  std::fflush(stderr);
}

int run_experiment(const ExperimentArgs& a) {
  json config = read_config(a.config);
  if (!config.is_object()) throw UsageError("config must be a JSON object");
  if (!a.dataset.empty()) config["dataset"] = a.dataset;
  if (a.repetitions) config["repetitions"] = *a.repetitions;
  if (a.jobs) config["jobs"] = *a.jobs;
  config["seed"] = resolve_seed(a.seed, config, 0);
  if (!config.contains("dataset")) throw UsageError("no dataset given (config key 'dataset' or --dataset)");

  char* resolved = nullptr;
  if (ndcp_experiment_config_resolve(config.dump().c_str(), &resolved) != NDCP_OK) {
    throw UsageError(std::string("invalid config: ") + ndcp_last_error());
  }
  ndcp_free_string(resolved);

  ndcp_report* raw = nullptr;
  check(ndcp_experiment_run(config.dump().c_str(), a.progress ? progress_printer : nullptr, nullptr, &raw),
        "experiment");
  ReportPtr report(raw);

  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  const auto json_path = (fs::path(a.out_dir) / "report.json").string();
  const auto csv_path = (fs::path(a.out_dir) / "report.csv").string();
  check(ndcp_report_write_json(report.get(), json_path.c_str()), "writing report");
  check(ndcp_report_write_csv(report.get(), csv_path.c_str()), "writing report");

  char* summary = nullptr;
  check(ndcp_report_summary(report.get(), &summary), "summary");
  std::cout << take_string(summary);
  std::cout << "\nwrote " << json_path << " and " << csv_path << "\n";
  return kExitOk;
}

// node

struct NodeArgs {
  std::string shard;
  std::string predictor;
  std::string bind = "127.0.0.1:0";
  std::string config;
  std::string label;
  std::optional<std::uint64_t> seed;
  std::string port_file;
};

int run_node(const NodeArgs& a) {
  json config = read_config(a.config);
  if (!a.predictor.empty()) config["predictor"] = a.predictor;
  const std::uint64_t seed = resolve_seed(a.seed, config, 0);
  config.erase("seed");

  // Handle termination signals synchronously; worker threads inherit the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto shard = load_dataset(a.shard, a.label);
  auto predictor = fit_predictor(shard.get(), config, seed);
  ndcp_node* raw = nullptr;
  check(ndcp_node_start(predictor.get(), a.bind.c_str(), &raw), "starting node");
  NodePtr node(raw);

  const auto port = ndcp_node_port(node.get());
  if (!a.port_file.empty()) {
    const auto tmp = a.port_file + ".tmp";
    std::ofstream(tmp) << port << "\n";
    fs::rename(tmp, a.port_file);
  }
  std::cout << "listening on port " << port << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  ndcp_node_stop(node.get());
  return kExitOk;
}

// aggregate / predict

struct QueryArgs {
  std::string input;
  std::string label;
  double eps = 0.05;
  std::string output;
};

struct AggregateArgs : QueryArgs {
  std::string nodes;
  std::size_t quorum = 0;
  double timeout = 10.0;
};

int run_aggregate(const AggregateArgs& a) {
  const auto addresses = split_list(a.nodes);
  if (addresses.empty()) throw UsageError("--nodes needs at least one HOST:PORT");
  if (!(a.timeout > 0)) throw UsageError("--timeout must be positive");
  std::vector<const char*> raw_addresses;
  for (const auto& s : addresses) raw_addresses.push_back(s.c_str());

  auto input = load_dataset(a.input, a.label);
  ndcp_aggregator* raw = nullptr;
  const auto timeout_ms = static_cast<std::uint32_t>(std::llround(a.timeout * 1000.0));
  const ndcp_status status =
      ndcp_aggregator_create(raw_addresses.data(), raw_addresses.size(), timeout_ms, a.quorum, nullptr, nullptr, &raw);
  if (status == NDCP_ERR_INVALID) throw UsageError(ndcp_last_error());
  check(status, "aggregator");
  AggregatorPtr aggregator(raw);

  const std::size_t n = ndcp_dataset_size(input.get());
  std::vector<double> x(ndcp_dataset_feature_count(input.get()));
  std::vector<IntervalRow> rows;
  for (std::size_t i = 0; i < n; ++i) {
    IntervalRow row{};
    check(ndcp_dataset_row(input.get(), i, x.data(), &row.truth), "reading input");
    check(ndcp_aggregator_predict(aggregator.get(), x.data(), x.size(), a.eps, &row.lower, &row.upper, nullptr),
          "row " + std::to_string(i));
    rows.push_back(row);
  }
  emit_intervals(rows, a.output);
  return kExitOk;
}

struct PredictArgs : QueryArgs {
  std::string shards;
  std::string predictor;
  std::string config;
  std::optional<std::uint64_t> seed;
};

int run_predict(const PredictArgs& a) {
  const auto paths = split_list(a.shards);
  if (paths.empty()) throw UsageError("--shards needs at least one CSV file");
  json config = read_config(a.config);
  if (!a.predictor.empty()) config["predictor"] = a.predictor;
  const std::uint64_t seed = resolve_seed(a.seed, config, 0);
  config.erase("seed");

  std::vector<PredictorPtr> predictors;
  for (const auto& path : paths) {
    auto shard = load_dataset(path, a.label);
    predictors.push_back(fit_predictor(shard.get(), config, seed));
  }
  auto input = load_dataset(a.input, a.label);
  const std::size_t n = ndcp_dataset_size(input.get());
  std::vector<double> x(ndcp_dataset_feature_count(input.get()));
  std::vector<double> lowers(predictors.size());
  std::vector<double> uppers(predictors.size());
  std::vector<IntervalRow> rows;
  for (std::size_t i = 0; i < n; ++i) {
    IntervalRow row{};
    check(ndcp_dataset_row(input.get(), i, x.data(), &row.truth), "reading input");
    for (std::size_t k = 0; k < predictors.size(); ++k) {
      check(ndcp_predictor_interval(predictors[k].get(), x.data(), x.size(), a.eps, &lowers[k], &uppers[k]),
            "row " + std::to_string(i));
    }
    check(ndcp_combine(lowers.data(), uppers.data(), predictors.size(), &row.lower, &row.upper), "combine");
    rows.push_back(row);
  }
  emit_intervals(rows, a.output);
  return kExitOk;
}

// partition

struct PartitionArgs {
  std::string dataset;
  std::string label;
  std::string scheme = "equal";
  std::size_t sources = 3;
  double test_fraction = 0.1;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

int run_partition(const PartitionArgs& a) {
  const std::uint64_t seed = resolve_seed(a.seed, json::object(), 0);
  auto data = load_dataset(a.dataset, a.label);
  ndcp_dataset* train_raw = nullptr;
  ndcp_dataset* test_raw = nullptr;
  check(ndcp_dataset_split(data.get(), a.test_fraction, seed, &train_raw, &test_raw), "split");
  DatasetPtr train(train_raw);
  DatasetPtr test(test_raw);
  std::vector<ndcp_dataset*> raw(a.sources, nullptr);
  check(ndcp_dataset_partition(train.get(), a.scheme.c_str(), a.sources, seed, raw.data()), "partition");
  std::vector<DatasetPtr> shards;
  for (auto* s : raw) shards.emplace_back(s);

  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  for (std::size_t k = 0; k < shards.size(); ++k) {
    const auto path = (fs::path(a.out_dir) / ("shard_" + std::to_string(k + 1) + ".csv")).string();
    check(ndcp_dataset_write_csv(shards[k].get(), path.c_str()), "writing shard");
    std::cout << path << "\n";
  }
  const auto test_path = (fs::path(a.out_dir) / "test.csv").string();
  check(ndcp_dataset_write_csv(test.get(), test_path.c_str()), "writing test set");
  std::cout << test_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-disclosed conformal prediction across isolated data sources"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ndcp_version()));

  ExperimentArgs ex;
  auto* experiment = app.add_subcommand("experiment", "Run the repeated multi-source evaluation");
  experiment->add_option("--config", ex.config, "Experiment config JSON")->check(CLI::ExistingFile);
  experiment->add_option("--dataset", ex.dataset, "CSV dataset (overrides the config)");
  experiment->add_option("--repetitions", ex.repetitions, "Number of repetitions");
  experiment->add_option("--seed", ex.seed, "Master seed (fallback: NDCP_SEED)");
  experiment->add_option("--jobs", ex.jobs, "Concurrent repetitions");
  experiment->add_option("--out-dir", ex.out_dir, "Directory for report.json and report.csv");
  experiment->add_flag("--progress", ex.progress, "Print progress to stderr");

  NodeArgs nd;
  auto* node = app.add_subcommand("node", "Serve prediction intervals from one private shard");
  node->add_option("--shard", nd.shard, "Shard CSV")->required();
  node->add_option("--predictor", nd.predictor, "icp or ccp")->check(CLI::IsMember({"icp", "ccp"}));
  node->add_option("--bind", nd.bind, "HOST:PORT; port 0 picks a free port");
  node->add_option("--config", nd.config, "Config JSON with predictor/conformal/regressor sections")
      ->check(CLI::ExistingFile);
  node->add_option("--label", nd.label, "Label column name or index (default: last)");
  node->add_option("--seed", nd.seed, "Fitting seed (fallback: NDCP_SEED)");
  node->add_option("--port-file", nd.port_file, "Write the bound port to this file");

  AggregateArgs ag;
  auto* aggregate = app.add_subcommand("aggregate", "Query running nodes and combine their intervals");
  aggregate->add_option("--nodes", ag.nodes, "Comma-separated HOST:PORT list")->required();
  aggregate->add_option("--eps", ag.eps, "Significance level")->check(CLI::Range(0.0, 1.0));
  aggregate->add_option("--input", ag.input, "CSV of objects to predict")->required();
  aggregate->add_option("--label", ag.label, "Label column of the input (not sent)");
  aggregate->add_option("--quorum", ag.quorum, "Minimum responders (default: all nodes)");
  aggregate->add_option("--timeout", ag.timeout, "Per-node timeout in seconds");
  aggregate->add_option("--output", ag.output, "Output CSV (default: stdout)");

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Offline NDCP over local shard files");
  predict->add_option("--shards", pr.shards, "Comma-separated shard CSV files")->required();
  predict->add_option("--input", pr.input, "CSV of objects to predict")->required();
  predict->add_option("--eps", pr.eps, "Significance level")->check(CLI::Range(0.0, 1.0));
  predict->add_option("--predictor", pr.predictor, "icp or ccp")->check(CLI::IsMember({"icp", "ccp"}));
  predict->add_option("--config", pr.config, "Config JSON")->check(CLI::ExistingFile);
  predict->add_option("--label", pr.label, "Label column name or index (default: last)");
  predict->add_option("--seed", pr.seed, "Fitting seed (fallback: NDCP_SEED)");
  predict->add_option("--output", pr.output, "Output CSV (default: stdout)");

  PartitionArgs pa;
  auto* part = app.add_subcommand("partition", "Split a dataset into a test set and source shards");
  part->add_option("--dataset", pa.dataset, "CSV dataset")->required();
  part->add_option("--label", pa.label, "Label column name or index (default: last)");
  part->add_option("--scheme", pa.scheme, "equal, unequal or noniid")
      ->check(CLI::IsMember({"equal", "unequal", "noniid"}));
  part->add_option("--sources", pa.sources, "Number of sources K");
  part->add_option("--test-fraction", pa.test_fraction, "Held-out fraction");
  part->add_option("--seed", pa.seed, "Seed (fallback: NDCP_SEED)");
  part->add_option("--out-dir", pa.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*experiment) return run_experiment(ex);
    if (*node) return run_node(nd);
    if (*aggregate) return run_aggregate(ag);
    if (*predict) return run_predict(pr);
    if (*part) return run_partition(pa);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
