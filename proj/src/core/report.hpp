#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "experiment.hpp"

namespace ndcp {

/// Doubles as JSON numbers; +-inf as the strings "inf" / "-inf".
nlohmann::json json_number(double v);
double number_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);

/// One row per (repetition, scheme, K, predictor, eps, model).
std::string report_to_csv(const ExperimentReport& report);

void write_report_json(const ExperimentReport& report, const std::filesystem::path& path);
void write_report_csv(const ExperimentReport& report, const std::filesystem::path& path);

/// Fixed-width table per (scheme, K): one row per model, Val/Eff column pairs
/// per (predictor, eps), three decimals.
std::string report_summary(const ExperimentReport& report);

}  // namespace ndcp
