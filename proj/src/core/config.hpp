#pragma once

#include <json.hpp>

#include "experiment.hpp"

namespace ndcp {

// JSON shape of an experiment config:
// {
//   "dataset": "data/concrete.csv", "label_column": "",
//   "schemes": ["equal", "unequal", "noniid"], "source_counts": [2, 4, 6],
//   "repetitions": 100, "significances": [0.05, 0.1, 0.15, 0.2],
//   "predictors": ["icp", "ccp"], "test_fraction": 0.1, "seed": 0, "jobs": 1,
//   "partition": {"non_iid_quantile": 0.75, "non_iid_boost": 2.0, "unequal_ratio": 2.0},
//   "conformal": {"calibration_fraction": 0.3333333333333333, "ccp_folds": 5,
//                 "measure": "absolute", "beta": 0.01},
//   "regressor": {"family": "kernel_ridge", "standardize": true, "params": {...},
//                 "grid": {"gamma": [...], "lambda": [...]} | null, "folds": 10}
// }
// Every key is optional; absent keys keep their defaults. Unknown keys are errors.

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Reads the "conformal" and "regressor" sections only (node and predict
/// subcommands). `kind` is taken from j["predictor"] when present.
PredictorConfig predictor_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PredictorConfig& pc);

}  // namespace ndcp
