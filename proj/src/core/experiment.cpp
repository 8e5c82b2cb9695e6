#include "experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "random.hpp"

namespace ndcp {

namespace {

struct SourceSet {
  std::vector<ConformalPredictor> predictors;
  std::vector<std::size_t> sizes;
};

std::string context(std::size_t rep, const std::string& where) {
  return "repetition " + std::to_string(rep) + ", " + where;
}

std::vector<PredictionInterval> intervals_for(const ConformalPredictor& p, const Dataset& test, double eps) {
  std::vector<PredictionInterval> out;
  out.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) out.push_back(p.interval(test.row(i), eps));
  return out;
}

std::vector<RepetitionRow> run_repetition(const ExperimentConfig& cfg, const Dataset& data, std::size_t rep) {
  const std::uint64_t rep_seed = cfg.seed + rep;
  const auto split = train_test_split(data, cfg.test_fraction, rep_seed);
  const Dataset& train = split.first;
  const Dataset& test = split.second;
  const auto truths = test.labels();
  std::vector<RepetitionRow> rows;

  // The pooled model depends only on the training set, so it is shared by
  // every scheme and K within the repetition.
  std::vector<std::pair<PredictorKind, ConformalPredictor>> pooled;
  for (auto kind : cfg.predictors) {
    PredictorConfig pc = cfg.predictor;
    pc.kind = kind;
    try {
      pooled.emplace_back(kind, fit_conformal(train, pc, derive_seed(rep_seed, {0x706f6f6c, static_cast<std::uint64_t>(kind)})));
    } catch (const std::exception& e) {
      throw ExperimentError(context(rep, "pooled " + to_string(kind)) + ": " + e.what());
    }
  }

  for (auto scheme : cfg.schemes) {
    for (auto k : cfg.source_counts) {
      PartitionPlan plan;
      plan.scheme = scheme;
      plan.source_count = k;
      plan.seed = derive_seed(rep_seed, {static_cast<std::uint64_t>(scheme), k});
      plan.non_iid_quantile = cfg.non_iid_quantile;
      plan.non_iid_boost = cfg.non_iid_boost;
      plan.unequal_ratio = cfg.unequal_ratio;
      const auto shards = partition(train, plan);

      for (const auto& [kind, pooled_model] : pooled) {
        PredictorConfig pc = cfg.predictor;
        pc.kind = kind;
        SourceSet sources;
        for (std::size_t j = 0; j < shards.size(); ++j) {
          const auto where = "scheme " + to_string(scheme) + ", K " + std::to_string(k) + ", source " +
                             std::to_string(j + 1) + " (" + to_string(kind) + ")";
          try {
            sources.predictors.push_back(fit_conformal(
                shards[j], pc, derive_seed(rep_seed, {static_cast<std::uint64_t>(scheme), k, j, static_cast<std::uint64_t>(kind)})));
          } catch (const std::exception& e) {
            throw ExperimentError(context(rep, where) + ": " + e.what());
          }
          sources.sizes.push_back(shards[j].size());
        }

        for (double eps : cfg.significances) {
          const CellKey key{scheme, k, kind, eps};
          std::vector<std::vector<PredictionInterval>> per_source;
          for (const auto& p : sources.predictors) per_source.push_back(intervals_for(p, test, eps));

          std::vector<PredictionInterval> combined;
          combined.reserve(test.size());
          std::vector<PredictionInterval> column(k);
          for (std::size_t i = 0; i < test.size(); ++i) {
            for (std::size_t j = 0; j < k; ++j) column[j] = per_source[j][i];
            combined.push_back(combine(column));
          }
          const bool all_finite = std::all_of(combined.begin(), combined.end(), [](const auto& iv) { return iv.finite(); });
          const auto ideal = all_finite ? ideal_shrink(combined, truths, eps).intervals : combined;
          const auto pooled_iv = intervals_for(pooled_model, test, eps);

          auto push = [&](std::string model, std::size_t n, const std::vector<PredictionInterval>& ivs) {
            rows.push_back({rep, key, {std::move(model), n, validity(ivs, truths), efficiency(ivs)}});
          };
          push(kModelNdcp, train.size(), combined);
          push(kModelIdeal, train.size(), ideal);
          for (std::size_t j = 0; j < k; ++j) push(source_model_name(j), sources.sizes[j], per_source[j]);
          push(kModelPooled, train.size(), pooled_iv);
        }
      }
    }
  }
  return rows;
}

}  // namespace

double validity(std::span<const PredictionInterval> intervals, std::span<const double> truths) {
  if (intervals.size() != truths.size()) throw std::invalid_argument("validity: length mismatch");
  if (intervals.empty()) throw std::invalid_argument("validity: no intervals");
  std::size_t covered = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i) covered += intervals[i].contains(truths[i]) ? 1 : 0;
  return static_cast<double>(covered) / static_cast<double>(intervals.size());
}

double efficiency(std::span<const PredictionInterval> intervals) {
  if (intervals.empty()) throw std::invalid_argument("efficiency: no intervals");
  std::vector<double> widths;
  widths.reserve(intervals.size());
  for (const auto& iv : intervals) widths.push_back(iv.width());
  return median(std::move(widths));
}

std::string source_model_name(std::size_t index) { return "Source" + std::to_string(index + 1); }

GridSearchSpec default_grid(RegressorFamily family) {
  GridSearchSpec g;
  g.folds = 10;
  switch (family) {
    case RegressorFamily::KernelRidge:
      g.axes = {{"gamma", {0.03, 0.1, 0.3}}, {"lambda", {0.01, 0.1, 1.0}}};
      break;
    case RegressorFamily::Svr:
      g.axes = {{"c", {0.1, 1.0, 10.0, 100.0}}, {"epsilon", {0.01, 0.1, 1.0}}, {"gamma", {0.01, 0.1, 1.0}}};
      break;
    case RegressorFamily::RandomForest:
      g.axes = {{"min_leaf", {1.0, 5.0}}};
      break;
    case RegressorFamily::Linear:
      g.axes = {};
      break;
  }
  return g;
}

PredictorConfig default_predictor_config(RegressorFamily family) {
  PredictorConfig pc;
  pc.regressor.family = family;
  pc.regressor.params = default_hyperparameters(family);
  if (family != RegressorFamily::Linear) pc.grid = default_grid(family);
  return pc;
}

void ExperimentConfig::validate() const {
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (significances.empty()) throw std::invalid_argument("at least one significance level is required");
  for (double e : significances) validate_significance(e);
  if (schemes.empty()) throw std::invalid_argument("at least one partition scheme is required");
  if (source_counts.empty()) throw std::invalid_argument("at least one source count is required");
  for (auto k : source_counts) {
    if (k < 2) throw std::invalid_argument("source counts must be >= 2");
  }
  if (predictors.empty()) throw std::invalid_argument("at least one predictor kind is required");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test_fraction must lie in (0, 1)");
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
  PartitionPlan plan;
  plan.non_iid_quantile = non_iid_quantile;
  plan.non_iid_boost = non_iid_boost;
  plan.unequal_ratio = unequal_ratio;
  plan.validate();
}

const ReportCell* ExperimentReport::find(const CellKey& key) const {
  for (const auto& c : cells) {
    if (c.key == key) return &c;
  }
  return nullptr;
}

std::vector<MetricsRow> ExperimentReport::series(const CellKey& key, const std::string& model) const {
  std::vector<MetricsRow> out;
  for (const auto& r : repetitions) {
    if (r.key == key && r.metrics.model == model) out.push_back(r.metrics);
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  return run_experiment(cfg, load_csv(cfg.dataset, cfg.label_column), progress);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const Dataset& data, const ProgressFn& progress) {
  cfg.validate();
  std::vector<std::vector<RepetitionRow>> per_rep(cfg.repetitions);
  std::vector<std::exception_ptr> errors(cfg.repetitions);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;

  auto worker = [&] {
    for (std::size_t r = next++; r < cfg.repetitions; r = next++) {
      try {
        per_rep[r] = run_repetition(cfg, data, r);
      } catch (...) {
        errors[r] = std::current_exception();
      }
      const auto finished = ++done;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(finished, cfg.repetitions);
      }
    }
  };
  const std::size_t threads = std::min(cfg.jobs, cfg.repetitions);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentReport report;
  report.config = cfg;
  for (auto& rows : per_rep) {
    for (auto& row : rows) report.repetitions.push_back(std::move(row));
  }

  // Cells and their model rows keep first-appearance order.
  for (const auto& row : report.repetitions) {
    if (report.find(row.key) == nullptr) report.cells.push_back({row.key, {}});
  }
  for (auto& cell : report.cells) {
    std::vector<std::string> models;
    for (const auto& row : report.repetitions) {
      if (row.repetition == 0 && row.key == cell.key) models.push_back(row.metrics.model);
    }
    for (const auto& model : models) {
      const auto s = report.series(cell.key, model);
      double val = 0.0;
      std::vector<double> widths;
      for (const auto& m : s) {
        val += m.validity;
        widths.push_back(m.efficiency);
      }
      cell.rows.push_back({model, s.front().n, val / static_cast<double>(s.size()), median(std::move(widths))});
    }
  }
  return report;
}

}  // namespace ndcp
