#pragma once

// JSON documents: calibrated models and run results.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppaval/inverse/calibration.hpp"
#include "ppaval/io/csv.hpp"
#include "ppaval/valuation/valuation.hpp"

namespace ppaval::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kModelFormat = "ppaval-model";
inline constexpr int kModelVersion = 1;

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

inline Vector vector_from_json(const Json& a, const std::string& what) {
  if (!a.is_array()) throw DataError(what + ": expected an array");
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!a[k].is_number()) throw DataError(what + ": non-numeric entry");
    v[static_cast<Eigen::Index>(k)] = a[k].get<double>();
  }
  return v;
}

inline Json model_to_json(const inverse::CalibratedModel& m) {
  static const char* kGroups[] = {"c1", "c2", "k"};
  Json doc;
  doc["format"] = kModelFormat;
  doc["version"] = kModelVersion;
  doc["technologies"] = m.technologies;
  Json coeffs = Json::object();
  for (std::size_t i = 0; i < m.coefficients.size(); ++i) {
    Json tech = Json::object();
    for (std::size_t j = 0; j < 3; ++j) {
      const auto& tc = m.coefficients[i];
      tech[kGroups[j]] = {{"features", tc.names[j]}, {"schema_hash", tc.schema_hash[j]}, {"b", to_json(tc.b[j])}};
      if (m.lambda.size())
        tech[kGroups[j]]["lambda"] = m.lambda(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    coeffs[m.technologies[i]] = std::move(tech);
  }
  doc["coefficients"] = std::move(coeffs);
  doc["binding_tol"] = m.binding_tol;
  doc["price_pinned"] = m.price_pinned;
  Json window = Json::object();
  if (m.first_period) window["first"] = time::format_iso8601(*m.first_period);
  if (m.last_period) window["last"] = time::format_iso8601(*m.last_period);
  window["periods"] = m.c1.cols();
  doc["training_window"] = std::move(window);
  doc["objective"] = {{"total", m.objective},
                      {"weighted_residual", m.weighted_residual},
                      {"penalty", m.penalty},
                      {"storage_slack", m.storage_slack}};
  doc["solver"] = {{"status", std::string(qp::to_string(m.status))},
                   {"iterations", m.iterations},
                   {"stationarity", m.kkt.stationarity_inf_norm},
                   {"primal", m.kkt.primal_inf_norm},
                   {"complementarity", m.kkt.complementarity_inf_norm}};
  return doc;
}

/// Restores the coefficient part of a model (enough for predict_costs).
inline inverse::CalibratedModel model_from_json(const Json& doc) {
  static const char* kGroups[] = {"c1", "c2", "k"};
  try {
    if (doc.at("format").get<std::string>() != kModelFormat) throw DataError("not a model document");
    const int version = doc.at("version").get<int>();
    if (version != kModelVersion) throw DataError("unsupported model version " + std::to_string(version));
    inverse::CalibratedModel m;
    m.technologies = doc.at("technologies").get<std::vector<std::string>>();
    const auto I = static_cast<Eigen::Index>(m.technologies.size());
    m.lambda = Matrix::Zero(I, 3);
    for (Eigen::Index i = 0; i < I; ++i) {
      const Json& tech = doc.at("coefficients").at(m.technologies[static_cast<std::size_t>(i)]);
      inverse::TechnologyCoefficients tc;
      for (std::size_t j = 0; j < 3; ++j) {
        const Json& g = tech.at(kGroups[j]);
        tc.names[j] = g.at("features").get<std::vector<std::string>>();
        tc.schema_hash[j] = g.at("schema_hash").get<std::string>();
        tc.b[j] = vector_from_json(g.at("b"), m.technologies[static_cast<std::size_t>(i)] + "." + kGroups[j]);
        if (tc.b[j].size() != static_cast<Eigen::Index>(tc.names[j].size()))
          throw DataError("coefficient count differs from feature count");
        if (g.contains("lambda")) m.lambda(i, static_cast<Eigen::Index>(j)) = g.at("lambda").get<double>();
      }
      m.coefficients.push_back(std::move(tc));
    }
    m.binding_tol = doc.value("binding_tol", 0.0);
    m.price_pinned = doc.value("price_pinned", false);
    const Json& w = doc.value("training_window", Json::object());
    if (w.contains("first")) m.first_period = time::parse_iso8601(w.at("first").get<std::string>());
    if (w.contains("last")) m.last_period = time::parse_iso8601(w.at("last").get<std::string>());
    if (doc.contains("objective")) {
      m.objective = doc["objective"].value("total", 0.0);
      m.weighted_residual = doc["objective"].value("weighted_residual", 0.0);
      m.penalty = doc["objective"].value("penalty", 0.0);
      m.storage_slack = doc["objective"].value("storage_slack", 0.0);
    }
    m.status = qp::QpStatus::Optimal;
    return m;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  }
}

inline void save_model(const fs::path& path, const inverse::CalibratedModel& m) {
  write_text(path, model_to_json(m).dump(2) + "\n");
}

inline inverse::CalibratedModel load_model(const fs::path& path) {
  Json doc;
  try {
    doc = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

inline Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

/// Everything a forecast/valuation run emits; missing parts produce header-only files.
struct RunArtifacts {
  std::vector<Timestamp> timestamps;
  Vector price;                                    ///< empty when not forecast
  std::vector<std::string> technologies;
  std::optional<market::DispatchSolution> dispatch;
  Json valuation = Json::object();
  std::optional<valuation::SensitivityGrid> sensitivity;
};

inline std::string sensitivity_csv(const std::optional<valuation::SensitivityGrid>& g) {
  std::string out = "factor,multiplier,capture_price,relative_change\n";
  if (!g) return out;
  for (std::size_t k = 0; k < g->multipliers.size(); ++k) {
    out += valuation::to_string(g->factor) + "," + detail::format_number(g->multipliers[k]) + ",";
    if (g->capture_prices[k]) {
      const double c = *g->capture_prices[k];
      out += detail::format_number(c) + "," + detail::format_number(c / g->base_capture_price - 1.0);
    } else {
      out += "NaN,NaN";
    }
    out += "\n";
  }
  return out;
}

/// Writes prices.csv, dispatch.csv, valuation.json and sensitivity.csv into out_dir.
inline void export_results(const RunArtifacts& run, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::pair<std::string, Vector>> price_cols;
  std::vector<Timestamp> price_ts;
  if (run.price.size()) {
    price_cols.emplace_back("price", run.price);
    price_ts = run.timestamps;
  }
  if (price_cols.empty()) write_text(out_dir / "prices.csv", "timestamp,price\n");
  else write_hourly_csv(out_dir / "prices.csv", price_ts, price_cols);

  if (run.dispatch) {
    const auto& d = *run.dispatch;
    std::vector<std::pair<std::string, Vector>> cols;
    for (std::size_t i = 0; i < run.technologies.size(); ++i)
      cols.emplace_back(run.technologies[i], d.x.row(static_cast<Eigen::Index>(i)).transpose());
    cols.emplace_back("storage_charge", d.y_plus);
    cols.emplace_back("storage_discharge", d.y_minus);
    cols.emplace_back("storage_level", d.s);
    write_hourly_csv(out_dir / "dispatch.csv", run.timestamps, cols);
  } else {
    std::string header = "timestamp";
    for (const auto& t : run.technologies) header += "," + t;
    write_text(out_dir / "dispatch.csv", header + ",storage_charge,storage_discharge,storage_level\n");
  }
  write_text(out_dir / "valuation.json", run.valuation.dump(2) + "\n");
  write_text(out_dir / "sensitivity.csv", sensitivity_csv(run.sensitivity));
}

}  // namespace ppaval::io
