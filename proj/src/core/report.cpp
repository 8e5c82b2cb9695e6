#include "report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "config.hpp"

namespace ndcp {

using nlohmann::json;

namespace {

std::string shortest(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

json key_to_json(const CellKey& k) {
  return {{"scheme", to_string(k.scheme)},
          {"sources", k.sources},
          {"predictor", to_string(k.predictor)},
          {"significance", k.significance}};
}

CellKey key_from_json(const json& j) {
  return {partition_scheme_from_string(j.at("scheme").get<std::string>()), j.at("sources").get<std::size_t>(),
          predictor_kind_from_string(j.at("predictor").get<std::string>()), j.at("significance").get<double>()};
}

json metrics_to_json(const MetricsRow& m) {
  return {{"model", m.model}, {"n", m.n}, {"validity", m.validity}, {"efficiency", json_number(m.efficiency)}};
}

MetricsRow metrics_from_json(const json& j) {
  return {j.at("model").get<std::string>(), j.at("n").get<std::size_t>(), j.at("validity").get<double>(),
          number_from_json(j.at("efficiency"))};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string fixed3(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw std::invalid_argument("expected a number or \"inf\"/\"-inf\", got \"" + s + "\"");
  }
  if (!j.is_number()) throw std::invalid_argument("expected a number");
  return j.get<double>();
}

json report_to_json(const ExperimentReport& report) {
  json cells = json::array();
  for (const auto& c : report.cells) {
    json rows = json::array();
    for (const auto& r : c.rows) rows.push_back(metrics_to_json(r));
    json cell = key_to_json(c.key);
    cell["rows"] = std::move(rows);
    cells.push_back(std::move(cell));
  }
  json reps = json::array();
  for (const auto& r : report.repetitions) {
    json row = key_to_json(r.key);
    row["repetition"] = r.repetition;
    row.update(metrics_to_json(r.metrics));
    reps.push_back(std::move(row));
  }
  return {{"config", to_json(report.config)}, {"cells", std::move(cells)}, {"repetitions", std::move(reps)}};
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport report;
  report.config = experiment_config_from_json(j.at("config"));
  for (const auto& c : j.at("cells")) {
    ReportCell cell{key_from_json(c), {}};
    for (const auto& r : c.at("rows")) cell.rows.push_back(metrics_from_json(r));
    report.cells.push_back(std::move(cell));
  }
  for (const auto& r : j.at("repetitions")) {
    report.repetitions.push_back({r.at("repetition").get<std::size_t>(), key_from_json(r), metrics_from_json(r)});
  }
  return report;
}

std::string report_to_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "repetition,scheme,sources,predictor,significance,model,n,validity,efficiency\n";
  for (const auto& r : report.repetitions) {
    out << r.repetition << ',' << to_string(r.key.scheme) << ',' << r.key.sources << ','
        << to_string(r.key.predictor) << ',' << shortest(r.key.significance) << ',' << r.metrics.model << ','
        << r.metrics.n << ',' << shortest(r.metrics.validity) << ',' << shortest(r.metrics.efficiency) << '\n';
  }
  return out.str();
}

void write_report_json(const ExperimentReport& report, const std::filesystem::path& path) {
  write_text(path, report_to_json(report).dump(2) + "\n");
}

void write_report_csv(const ExperimentReport& report, const std::filesystem::path& path) {
  write_text(path, report_to_csv(report));
}

std::string report_summary(const ExperimentReport& report) {
  std::ostringstream out;
  const auto& cfg = report.config;
  out << "repetitions: " << cfg.repetitions << ", regressor: " << to_string(cfg.predictor.regressor.family)
      << ", seed: " << cfg.seed << "\n";
  for (auto scheme : cfg.schemes) {
    for (auto k : cfg.source_counts) {
      out << "\n" << to_string(scheme) << ", " << k << " sources\n";
      char line[256];
      std::string group_line;
      std::snprintf(line, sizeof line, "%-12s %6s", "", "");
      group_line = line;
      std::snprintf(line, sizeof line, "%-12s %6s", "model", "n");
      std::string column_line = line;
      for (auto pred : cfg.predictors) {
        for (double eps : cfg.significances) {
          char group[32];
          std::snprintf(group, sizeof group, "%s %g%%", pred == PredictorKind::Icp ? "ICP" : "CCP", eps * 100.0);
          std::snprintf(line, sizeof line, " | %19s", group);
          group_line += line;
          std::snprintf(line, sizeof line, " | %9s %9s", "Val", "Eff");
          column_line += line;
        }
      }
      out << group_line << "\n" << column_line << "\n";
      const ReportCell* first = report.find({scheme, k, cfg.predictors.front(), cfg.significances.front()});
      if (first == nullptr) continue;
      for (const auto& row : first->rows) {
        std::snprintf(line, sizeof line, "%-12s %6zu", row.model.c_str(), row.n);
        out << line;
        for (auto pred : cfg.predictors) {
          for (double eps : cfg.significances) {
            const ReportCell* cell = report.find({scheme, k, pred, eps});
            const MetricsRow* m = nullptr;
            if (cell != nullptr) {
              for (const auto& r : cell->rows) {
                if (r.model == row.model) m = &r;
              }
            }
            if (m == nullptr) {
              std::snprintf(line, sizeof line, " | %9s %9s", "-", "-");
            } else {
              std::snprintf(line, sizeof line, " | %9s %9s", fixed3(m->validity).c_str(), fixed3(m->efficiency).c_str());
            }
            out << line;
          }
        }
        out << "\n";
      }
    }
  }
  return out.str();
}

}  // namespace ndcp
