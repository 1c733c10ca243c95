#ifndef COLLOC_SERIALIZE_HPP
#define COLLOC_SERIALIZE_HPP

#include <fstream>
#include <string>

#include <json.hpp>

#include "colloc/compliance.hpp"
#include "colloc/core.hpp"
#include "colloc/errors.hpp"
#include "colloc/granular.hpp"
#include "colloc/metrics.hpp"
#include "colloc/regression.hpp"

// JSON bindings for the file-facing types: deployment config, threshold
// overrides, fitted models, metric rows, and compliance reports.

namespace colloc {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline DeploymentConfig config_from_json(const ordered_json& j) {
  DeploymentConfig cfg;
  try {
    cfg.reference_id = j.at("reference_id").get<std::string>();
    for (const auto& [name, units] : j.at("groups").items())
      cfg.groups.emplace_back(name, units.get<std::vector<std::string>>());
    if (j.contains("averaging_base_minutes"))
      cfg.averaging_base_minutes = j.at("averaging_base_minutes").get<int>();
    if (j.contains("timezone_offset_minutes"))
      cfg.timezone_offset_minutes = j.at("timezone_offset_minutes").get<int>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline DeploymentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  ordered_json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

inline ThresholdSet thresholds_from_json(const json& j) {
  ThresholdSet t;
  auto get = [&](const char* key, double& field) {
    if (j.contains(key)) field = j.at(key).get<double>();
  };
  get("r2_min", t.r2_min);
  get("intercept_abs_max", t.intercept_abs_max);
  get("slope_lo", t.slope_lo);
  get("slope_hi", t.slope_hi);
  get("rmse_max", t.rmse_max);
  get("nrmse_max", t.nrmse_max);
  get("sd_max", t.sd_max);
  get("cv_max", t.cv_max);
  t.validate();
  return t;
}

inline ThresholdSet load_thresholds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open thresholds file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("thresholds '" + path + "' is not valid JSON: " +
                          e.what());
  }
  return thresholds_from_json(j);
}

inline json fit_to_json(const RegressionFit& fit) {
  return json{{"transform", std::string(to_string(fit.transform))},
              {"orientation", std::string(to_string(fit.orientation))},
              {"slope", fit.slope},
              {"intercept", fit.intercept},
              {"n", fit.n},
              {"x_bar", fit.x_bar},
              {"s_xx", fit.s_xx},
              {"mse", fit.mse},
              {"removed_outlier_indices", fit.removed_outlier_indices}};
}

// Residual diagnostics are not serialized; a loaded fit carries exactly the
// sufficient statistics the interval math needs.
inline RegressionFit fit_from_json(const json& j) {
  RegressionFit fit;
  try {
    fit.transform = transform_from_string(j.at("transform").get<std::string>());
    if (j.contains("orientation"))
      fit.orientation =
          orientation_from_string(j.at("orientation").get<std::string>());
    fit.slope = j.at("slope").get<double>();
    fit.intercept = j.at("intercept").get<double>();
    fit.n = j.at("n").get<std::size_t>();
    fit.x_bar = j.at("x_bar").get<double>();
    fit.s_xx = j.at("s_xx").get<double>();
    fit.mse = j.at("mse").get<double>();
    if (j.contains("removed_outlier_indices"))
      fit.removed_outlier_indices =
          j.at("removed_outlier_indices").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model file: ") + e.what());
  }
  if (fit.n <= 2) throw ValidationError("model file: n must be > 2");
  if (!(fit.s_xx > 0.0)) throw ValidationError("model file: s_xx must be > 0");
  if (fit.mse < 0.0) throw ValidationError("model file: mse must be >= 0");
  return fit;
}

inline RegressionFit load_fit(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("model '" + path + "' is not valid JSON: " + e.what());
  }
  return fit_from_json(j);
}

inline json metric_set_to_json(const MetricSet& m) {
  json j{{"n", m.n}, {"mae", m.mae}, {"mbe", m.mbe}, {"rmse", m.rmse}};
  auto put = [&](const char* key, const std::optional<double>& v) {
    j[key] = v ? json(*v) : json(nullptr);
  };
  put("slope", m.slope);
  put("intercept", m.intercept);
  put("r_squared", m.r_squared);
  put("nrmse_mean", m.nrmse_mean);
  put("nrmse_range", m.nrmse_range);
  return j;
}

inline json group_metric_set_to_json(const GroupMetricSet& g) {
  json j{{"n_pairs", g.n_pairs},
         {"n_periods", g.n_periods},
         {"rmse_group", g.rmse_group}};
  auto put = [&](const char* key, const std::optional<double>& v) {
    j[key] = v ? json(*v) : json(nullptr);
  };
  put("sd", g.sd);
  put("cv", g.cv);
  put("nrmse_group_mean", g.nrmse_group_mean);
  put("nrmse_group_range", g.nrmse_group_range);
  return j;
}

inline json bin_key_to_json(const BinKey& key) {
  return json{{"pm_lo", key.pm_lo},
              {"pm_hi", key.pm_hi},
              {"rh_lo", key.rh_lo},
              {"rh_hi", key.rh_hi}};
}

inline json binned_report_to_json(const BinnedReport& report) {
  json bins = json::array();
  for (const auto& cell : report.bins) {
    json units = json::array();
    for (const auto& u : cell.units) {
      json uj = metric_set_to_json(u.metrics);
      uj["device_id"] = u.device_id;
      uj["n_hours"] = u.n_hours;
      units.push_back(std::move(uj));
    }
    json groups = json::array();
    for (const auto& g : cell.groups) {
      json gj = group_metric_set_to_json(g.metrics);
      gj["group"] = g.group;
      gj["n_periods"] = g.n_periods;
      groups.push_back(std::move(gj));
    }
    bins.push_back(json{{"bin", bin_key_to_json(cell.key)},
                        {"units", units},
                        {"groups", groups}});
  }
  json excluded = json::array();
  for (const auto& e : report.excluded)
    excluded.push_back(json{{"bin", bin_key_to_json(e.key)},
                            {"subject", e.subject},
                            {"n_hours", e.n_hours},
                            {"reason", e.reason}});
  return json{{"pm_width", report.pm_width},
              {"rh_width", report.rh_width},
              {"min_hours", report.min_hours},
              {"total_pairs", report.total_pairs},
              {"bins", bins},
              {"excluded", excluded}};
}

inline json verdict_to_json(const Verdict& v) {
  json j{{"pass", v.pass},
         {"applicable", v.applicable},
         {"guideline", v.guideline}};
  j["value"] = v.value ? json(*v.value) : json(nullptr);
  return j;
}

inline json report_to_json(const ComplianceReport& report) {
  json units = json::array();
  for (const auto& u : report.units)
    units.push_back(json{{"device_id", u.device_id},
                         {"r_squared", verdict_to_json(u.r2)},
                         {"slope", verdict_to_json(u.slope)},
                         {"intercept", verdict_to_json(u.intercept)},
                         {"mae", u.mae ? json(*u.mae) : json(nullptr)},
                         {"overall", u.overall}});
  json groups = json::array();
  for (const auto& g : report.groups)
    groups.push_back(json{{"group", g.group},
                          {"rmse_group", verdict_to_json(g.rmse)},
                          {"nrmse_mean", verdict_to_json(g.nrmse_mean)},
                          {"nrmse_range", verdict_to_json(g.nrmse_range)},
                          {"rmse_or_nrmse", verdict_to_json(g.rmse_or_nrmse)},
                          {"sd", verdict_to_json(g.sd)},
                          {"cv", verdict_to_json(g.cv)},
                          {"overall", g.overall}});
  return json{{"normative", report.normative},
              {"units", units},
              {"groups", groups}};
}

} // namespace colloc

#endif
