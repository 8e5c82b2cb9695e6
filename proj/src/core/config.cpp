#include "config.hpp"

#include <set>

namespace ndcp {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument(std::string("config key '") + key + "' has the wrong type");
    }
  }
}

void apply_predictor_sections(const json& j, PredictorConfig& pc) {
  if (auto it = j.find("predictor"); it != j.end() && it->is_string()) {
    pc.kind = predictor_kind_from_string(it->get<std::string>());
  }
  if (auto it = j.find("conformal"); it != j.end()) {
    const json& c = *it;
    reject_unknown(c, {"calibration_fraction", "ccp_folds", "measure", "beta"}, "conformal");
    read(c, "calibration_fraction", pc.calibration_fraction);
    read(c, "ccp_folds", pc.ccp_folds);
    read(c, "beta", pc.measure.beta);
    if (c.contains("measure")) pc.measure.kind = measure_kind_from_string(c["measure"].get<std::string>());
  }
  if (auto it = j.find("regressor"); it != j.end()) {
    const json& r = *it;
    reject_unknown(r, {"family", "standardize", "params", "grid", "folds"}, "regressor");
    if (r.contains("family")) {
      const auto family = regressor_family_from_string(r["family"].get<std::string>());
      if (family != pc.regressor.family) {
        PredictorConfig fresh = default_predictor_config(family);
        fresh.kind = pc.kind;
        fresh.measure = pc.measure;
        fresh.calibration_fraction = pc.calibration_fraction;
        fresh.ccp_folds = pc.ccp_folds;
        fresh.regressor.standardize = pc.regressor.standardize;
        pc = std::move(fresh);
      }
    }
    read(r, "standardize", pc.regressor.standardize);
    if (auto p = r.find("params"); p != r.end()) {
      for (const auto& [name, value] : p->items()) pc.regressor.params[name] = value.get<double>();
    }
    if (auto g = r.find("grid"); g != r.end()) {
      if (g->is_null() || (g->is_object() && g->empty())) {
        pc.grid.reset();
      } else {
        GridSearchSpec spec = pc.grid.value_or(GridSearchSpec{});
        spec.axes.clear();
        for (const auto& [name, values] : g->items()) spec.axes.push_back({name, values.get<std::vector<double>>()});
        pc.grid = spec;
      }
    }
    if (r.contains("folds") && pc.grid) read(r, "folds", pc.grid->folds);
  }
}

}  // namespace

PredictorConfig predictor_config_from_json(const json& j) {
  PredictorConfig pc = default_predictor_config();
  apply_predictor_sections(j, pc);
  return pc;
}

json to_json(const PredictorConfig& pc) {
  json grid = nullptr;
  if (pc.grid) {
    grid = json::object();
    for (const auto& axis : pc.grid->axes) grid[axis.name] = axis.values;
  }
  return {
      {"predictor", to_string(pc.kind)},
      {"conformal",
       {{"calibration_fraction", pc.calibration_fraction},
        {"ccp_folds", pc.ccp_folds},
        {"measure", to_string(pc.measure.kind)},
        {"beta", pc.measure.beta}}},
      {"regressor",
       {{"family", to_string(pc.regressor.family)},
        {"standardize", pc.regressor.standardize},
        {"params", pc.regressor.params},
        {"grid", grid},
        {"folds", pc.grid ? pc.grid->folds : std::size_t{10}}}},
  };
}

ExperimentConfig experiment_config_from_json(const json& j) {
  reject_unknown(j,
                 {"dataset", "label_column", "schemes", "source_counts", "repetitions", "significances", "predictors",
                  "test_fraction", "seed", "jobs", "partition", "conformal", "regressor", "predictor"},
                 "experiment config");
  ExperimentConfig cfg;
  read(j, "dataset", cfg.dataset);
  read(j, "label_column", cfg.label_column);
  read(j, "source_counts", cfg.source_counts);
  read(j, "repetitions", cfg.repetitions);
  read(j, "significances", cfg.significances);
  read(j, "test_fraction", cfg.test_fraction);
  read(j, "seed", cfg.seed);
  read(j, "jobs", cfg.jobs);
  if (j.contains("schemes")) {
    cfg.schemes.clear();
    for (const auto& s : j["schemes"]) cfg.schemes.push_back(partition_scheme_from_string(s.get<std::string>()));
  }
  if (j.contains("predictors")) {
    cfg.predictors.clear();
    for (const auto& s : j["predictors"]) cfg.predictors.push_back(predictor_kind_from_string(s.get<std::string>()));
  }
  if (auto it = j.find("partition"); it != j.end()) {
    reject_unknown(*it, {"non_iid_quantile", "non_iid_boost", "unequal_ratio"}, "partition");
    read(*it, "non_iid_quantile", cfg.non_iid_quantile);
    read(*it, "non_iid_boost", cfg.non_iid_boost);
    read(*it, "unequal_ratio", cfg.unequal_ratio);
  }
  cfg.predictor = default_predictor_config();
  apply_predictor_sections(j, cfg.predictor);
  cfg.validate();
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json schemes = json::array();
  for (auto s : cfg.schemes) schemes.push_back(to_string(s));
  json predictors = json::array();
  for (auto p : cfg.predictors) predictors.push_back(to_string(p));
  json pc = to_json(cfg.predictor);
  return {
      {"dataset", cfg.dataset},
      {"label_column", cfg.label_column},
      {"schemes", schemes},
      {"source_counts", cfg.source_counts},
      {"repetitions", cfg.repetitions},
      {"significances", cfg.significances},
      {"predictors", predictors},
      {"test_fraction", cfg.test_fraction},
      {"seed", cfg.seed},
      {"jobs", cfg.jobs},
      {"partition",
       {{"non_iid_quantile", cfg.non_iid_quantile},
        {"non_iid_boost", cfg.non_iid_boost},
        {"unequal_ratio", cfg.unequal_ratio}}},
      {"conformal", pc["conformal"]},
      {"regressor", pc["regressor"]},
  };
}

}  // namespace ndcp
