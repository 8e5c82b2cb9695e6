#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <unistd.h>

#include "ndcp/ndcp.h"

namespace {

const std::string kConcrete = std::string(NDCP_DATA_DIR) + "/concrete.csv";
const char* kPlainConfig = R"({"regressor": {"family": "kernel_ridge", "params": {"gamma": 0.1, "lambda": 0.1}, "grid": null}})";

struct DatasetDeleter {
  void operator()(ndcp_dataset* d) const { ndcp_dataset_free(d); }
};
struct PredictorDeleter {
  void operator()(ndcp_predictor* p) const { ndcp_predictor_free(p); }
};
using DatasetPtr = std::unique_ptr<ndcp_dataset, DatasetDeleter>;
using PredictorPtr = std::unique_ptr<ndcp_predictor, PredictorDeleter>;

DatasetPtr load_concrete() {
  ndcp_dataset* d = nullptr;
  EXPECT_EQ(ndcp_dataset_load_csv(kConcrete.c_str(), nullptr, &d), NDCP_OK) << ndcp_last_error();
  return DatasetPtr(d);
}

TEST(CApi, Version) { EXPECT_STRNE(ndcp_version(), ""); }

TEST(CApi, LoadsConcrete) {
  const auto d = load_concrete();
  ASSERT_TRUE(d);
  EXPECT_EQ(ndcp_dataset_size(d.get()), 1030u);
  EXPECT_EQ(ndcp_dataset_feature_count(d.get()), 8u);
  std::vector<double> row(8);
  double label = 0.0;
  ASSERT_EQ(ndcp_dataset_row(d.get(), 0, row.data(), &label), NDCP_OK);
  EXPECT_GT(label, 0.0);
  EXPECT_EQ(ndcp_dataset_row(d.get(), 5000, row.data(), &label), NDCP_ERR_INVALID);
}

TEST(CApi, ErrorCodes) {
  ndcp_dataset* d = nullptr;
  EXPECT_EQ(ndcp_dataset_load_csv("/nonexistent/file.csv", nullptr, &d), NDCP_ERR_IO);
  EXPECT_NE(std::string(ndcp_last_error()), "");
  EXPECT_EQ(d, nullptr);
  EXPECT_EQ(ndcp_dataset_load_csv(nullptr, nullptr, &d), NDCP_ERR_INVALID);

  char path[] = "/tmp/ndcp_capi_XXXXXX";
  const int fd = mkstemp(path);
  ASSERT_GE(fd, 0);
  const std::string bad = "a,b\n1,2\n3,oops\n";
  ASSERT_EQ(write(fd, bad.data(), bad.size()), static_cast<ssize_t>(bad.size()));
  close(fd);
  EXPECT_EQ(ndcp_dataset_load_csv(path, nullptr, &d), NDCP_ERR_PARSE);
  std::remove(path);

  const auto good = load_concrete();
  ndcp_predictor* p = nullptr;
  EXPECT_EQ(ndcp_predictor_fit(good.get(), "{not json", 0, &p), NDCP_ERR_PARSE);
  EXPECT_EQ(ndcp_predictor_fit(good.get(), R"({"regressor": {"famly": "svr"}})", 0, &p), NDCP_ERR_INVALID);
  EXPECT_EQ(p, nullptr);

  const double x[2] = {0, 1};
  const double y[2] = {0, 1};
  ndcp_dataset* tiny = nullptr;
  ASSERT_EQ(ndcp_dataset_from_arrays(x, y, 1, 1, &tiny), NDCP_OK);
  EXPECT_EQ(ndcp_predictor_fit(tiny, kPlainConfig, 0, &p), NDCP_ERR_FIT);
  ndcp_dataset_free(tiny);
}

TEST(CApi, FitPredictAndCombine) {
  const auto d = load_concrete();
  ndcp_dataset* train = nullptr;
  ndcp_dataset* test = nullptr;
  ASSERT_EQ(ndcp_dataset_split(d.get(), 0.1, 3, &train, &test), NDCP_OK);
  DatasetPtr train_ptr(train);
  DatasetPtr test_ptr(test);
  EXPECT_EQ(ndcp_dataset_size(train), 927u);
  EXPECT_EQ(ndcp_dataset_size(test), 103u);

  std::vector<ndcp_dataset*> shards(3, nullptr);
  ASSERT_EQ(ndcp_dataset_partition(train, "equal", 3, 4, shards.data()), NDCP_OK);
  std::vector<PredictorPtr> models;
  for (auto* s : shards) {
    ndcp_predictor* p = nullptr;
    ASSERT_EQ(ndcp_predictor_fit(s, kPlainConfig, 1, &p), NDCP_OK) << ndcp_last_error();
    models.emplace_back(p);
    ndcp_dataset_free(s);
  }
  EXPECT_EQ(ndcp_predictor_feature_count(models[0].get()), 8u);

  std::vector<double> x(8);
  ASSERT_EQ(ndcp_dataset_row(test, 0, x.data(), nullptr), NDCP_OK);
  std::vector<double> lo(3), hi(3);
  for (std::size_t k = 0; k < 3; ++k) {
    ASSERT_EQ(ndcp_predictor_interval(models[k].get(), x.data(), x.size(), 0.1, &lo[k], &hi[k]), NDCP_OK);
    double point = 0.0;
    ASSERT_EQ(ndcp_predictor_point(models[k].get(), x.data(), x.size(), &point), NDCP_OK);
    EXPECT_NEAR((lo[k] + hi[k]) / 2.0, point, 1e-9 * std::max(1.0, std::abs(point)));
  }
  double c_lo = 0.0, c_hi = 0.0;
  ASSERT_EQ(ndcp_combine(lo.data(), hi.data(), 3, &c_lo, &c_hi), NDCP_OK);
  auto sorted_lo = lo;
  auto sorted_hi = hi;
  std::sort(sorted_lo.begin(), sorted_lo.end());
  std::sort(sorted_hi.begin(), sorted_hi.end());
  EXPECT_EQ(c_lo, sorted_lo[1]);
  EXPECT_EQ(c_hi, sorted_hi[1]);

  double a = 0, b = 0;
  EXPECT_EQ(ndcp_predictor_interval(models[0].get(), x.data(), 3, 0.1, &a, &b), NDCP_ERR_INVALID);
  EXPECT_EQ(ndcp_predictor_interval(models[0].get(), x.data(), 8, 0.0, &a, &b), NDCP_ERR_INVALID);
  EXPECT_EQ(ndcp_combine(lo.data(), hi.data(), 0, &a, &b), NDCP_ERR_INVALID);
}

struct Capture {
  std::size_t out_chunks = 0;
  std::size_t in_chunks = 0;
};

void tap(void* user, size_t, int outgoing, const char*, size_t) {
  auto* c = static_cast<Capture*>(user);
  (outgoing ? c->out_chunks : c->in_chunks)++;
}

TEST(CApi, NodesAndAggregator) {
  const auto d = load_concrete();
  std::vector<ndcp_dataset*> shards(2, nullptr);
  ASSERT_EQ(ndcp_dataset_partition(d.get(), "unequal", 2, 9, shards.data()), NDCP_OK);
  std::vector<PredictorPtr> models;
  std::vector<ndcp_node*> nodes;
  std::vector<std::string> addresses;
  for (auto* s : shards) {
    ndcp_predictor* p = nullptr;
    ASSERT_EQ(ndcp_predictor_fit(s, kPlainConfig, 2, &p), NDCP_OK) << ndcp_last_error();
    models.emplace_back(p);
    ndcp_dataset_free(s);
    ndcp_node* n = nullptr;
    ASSERT_EQ(ndcp_node_start(p, "127.0.0.1:0", &n), NDCP_OK) << ndcp_last_error();
    nodes.push_back(n);
    addresses.push_back("127.0.0.1:" + std::to_string(ndcp_node_port(n)));
  }
  std::vector<const char*> addr_ptrs;
  for (const auto& a : addresses) addr_ptrs.push_back(a.c_str());

  Capture capture;
  ndcp_aggregator* agg = nullptr;
  ASSERT_EQ(ndcp_aggregator_create(addr_ptrs.data(), addr_ptrs.size(), 5000, 0, tap, &capture, &agg), NDCP_OK);
  std::vector<double> x(8);
  ASSERT_EQ(ndcp_dataset_row(d.get(), 17, x.data(), nullptr), NDCP_OK);
  double lo = 0, hi = 0;
  size_t responders = 0;
  ASSERT_EQ(ndcp_aggregator_predict(agg, x.data(), x.size(), 0.2, &lo, &hi, &responders), NDCP_OK)
      << ndcp_last_error();
  EXPECT_EQ(responders, 2u);
  EXPECT_EQ(capture.out_chunks, 2u);
  EXPECT_GE(capture.in_chunks, 2u);

  double l[2], h[2], c_lo, c_hi;
  for (int k = 0; k < 2; ++k) ndcp_predictor_interval(models[k].get(), x.data(), 8, 0.2, &l[k], &h[k]);
  ndcp_combine(l, h, 2, &c_lo, &c_hi);
  EXPECT_EQ(lo, c_lo);
  EXPECT_EQ(hi, c_hi);

  ndcp_node_stop(nodes[1]);
  EXPECT_EQ(ndcp_aggregator_predict(agg, x.data(), x.size(), 0.2, &lo, &hi, &responders), NDCP_ERR_QUORUM);
  EXPECT_NE(std::string(ndcp_last_error()).find("quorum"), std::string::npos);
  ndcp_aggregator_free(agg);

  ASSERT_EQ(ndcp_aggregator_create(addr_ptrs.data(), addr_ptrs.size(), 2000, 1, nullptr, nullptr, &agg), NDCP_OK);
  ASSERT_EQ(ndcp_aggregator_predict(agg, x.data(), x.size(), 0.2, &lo, &hi, &responders), NDCP_OK);
  EXPECT_EQ(responders, 1u);
  EXPECT_EQ(lo, l[0]);
  EXPECT_EQ(hi, h[0]);
  ndcp_aggregator_free(agg);

  for (auto* n : nodes) ndcp_node_free(n);
}

void count_progress(void* user, size_t, size_t) { ++*static_cast<int*>(user); }

TEST(CApi, ExperimentRun) {
  const std::string cfg = R"({"dataset": ")" + kConcrete + R"(", "schemes": ["equal"], "source_counts": [2],
      "repetitions": 2, "significances": [0.1], "predictors": ["icp"], "seed": 5,
      "regressor": {"family": "linear", "grid": null}})";
  int calls = 0;
  ndcp_report* r = nullptr;
  ASSERT_EQ(ndcp_experiment_run(cfg.c_str(), count_progress, &calls, &r), NDCP_OK) << ndcp_last_error();
  EXPECT_EQ(calls, 2);
  char* summary = nullptr;
  ASSERT_EQ(ndcp_report_summary(r, &summary), NDCP_OK);
  EXPECT_NE(std::string(summary).find("IdealNDCP"), std::string::npos);
  ndcp_free_string(summary);
  char* json = nullptr;
  ASSERT_EQ(ndcp_report_to_json(r, &json), NDCP_OK);
  EXPECT_NE(std::string(json).find("\"repetitions\""), std::string::npos);
  ndcp_free_string(json);
  const auto dir = std::filesystem::temp_directory_path() / ("ndcp_capi_" + std::to_string(getpid()));
  std::filesystem::create_directories(dir);
  EXPECT_EQ(ndcp_report_write_json(r, (dir / "r.json").c_str()), NDCP_OK);
  EXPECT_EQ(ndcp_report_write_csv(r, (dir / "r.csv").c_str()), NDCP_OK);
  EXPECT_TRUE(std::filesystem::exists(dir / "r.csv"));
  EXPECT_EQ(ndcp_report_write_csv(r, "/nonexistent/dir/r.csv"), NDCP_ERR_IO);
  std::filesystem::remove_all(dir);
  ndcp_report_free(r);

  char* resolved = nullptr;
  ASSERT_EQ(ndcp_experiment_config_resolve("{}", &resolved), NDCP_OK);
  EXPECT_NE(std::string(resolved).find("\"repetitions\": 100"), std::string::npos);
  ndcp_free_string(resolved);
  EXPECT_EQ(ndcp_experiment_config_resolve(R"({"bogus": 1})", &resolved), NDCP_ERR_INVALID);
  EXPECT_EQ(ndcp_experiment_run(R"({"dataset": "/nonexistent.csv"})", nullptr, nullptr, &r), NDCP_ERR_IO);
}

}  // namespace
