// colloc-eval: command-line front end for the collocation evaluation library.
// One binary, verb-style subcommands, deterministic file outputs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "colloc/catalog.hpp"
#include "colloc/compliance.hpp"
#include "colloc/core.hpp"
#include "colloc/csv.hpp"
#include "colloc/granular.hpp"
#include "colloc/manifest.hpp"
#include "colloc/metrics.hpp"
#include "colloc/regression.hpp"
#include "colloc/serialize.hpp"

namespace fs = std::filesystem;
using colloc::csv::format_number;
using colloc::csv::format_optional;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitEmpty = 3;
constexpr int kExitInternal = 4;

unsigned env_thread_cap() {
  const char* v = std::getenv("COLLOC_EVAL_THREADS");
  if (!v) return 0;
  const long n = std::strtol(v, nullptr, 10);
  return n > 0 ? static_cast<unsigned>(n) : 1;
}

// Collects output files and finishes with the manifest.
class OutputDir {
public:
  OutputDir(std::string dir, std::string subcommand, nlohmann::json parameters,
            std::vector<std::string> input_paths)
      : dir_(std::move(dir)), manifest_() {
    manifest_.subcommand = std::move(subcommand);
    manifest_.parameters = std::move(parameters);
    manifest_.input_paths = std::move(input_paths);
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec)
      throw colloc::ValidationError("cannot create output directory '" + dir_ +
                                    "': " + ec.message());
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(fs::path(dir_) / name, std::ios::binary);
    if (!out)
      throw colloc::ValidationError("cannot write '" + name + "' in '" + dir_ +
                                    "'");
    out << content;
    manifest_.outputs.push_back(name);
  }

  void finish() {
    manifest_.outputs.push_back("manifest.json");
    std::ofstream out(fs::path(dir_) / "manifest.json", std::ios::binary);
    out << manifest_.to_json().dump(2) << '\n';
  }

private:
  std::string dir_;
  colloc::RunManifest manifest_;
};

struct CommonInputs {
  std::string input_path;
  std::string config_path;
  std::string out_dir;
  int precision = 4;
};

void add_common(CLI::App* cmd, CommonInputs& c, bool need_input = true) {
  if (need_input) {
    cmd->add_option("--input", c.input_path, "Collocation CSV")->required();
    cmd->add_option("--config", c.config_path, "Deployment config JSON")
        ->required();
  }
  cmd->add_option("--out", c.out_dir, "Output directory")->required();
  cmd->add_option("--precision", c.precision,
                  "Decimal places in numeric CSV output");
}

struct LoadedPanel {
  colloc::DeploymentConfig config;
  colloc::AlignedPanel panel;
  std::size_t rejected_rows = 0;
};

LoadedPanel load_panel(const CommonInputs& c, colloc::Interval interval,
                       double completeness) {
  LoadedPanel lp{colloc::load_config(c.config_path), {}, 0};
  const auto ingest = colloc::ingest_csv(c.input_path, lp.config);
  lp.rejected_rows = ingest.diagnostics.size();
  for (const auto& d : ingest.diagnostics)
    std::cerr << "reject line " << d.line_number << ": " << d.reason << '\n';
  lp.panel = colloc::align_and_average(ingest.records, lp.config, interval,
                                       completeness);
  return lp;
}

std::string metrics_units_csv(const colloc::AlignedPanel& panel,
                              const colloc::DeploymentConfig& config,
                              std::vector<std::pair<std::string, colloc::MetricSet>>& out,
                              int precision) {
  std::ostringstream os;
  os << "device_id,n,slope,intercept,r_squared,mae,mbe,rmse,nrmse_mean,"
        "nrmse_range,uptime\n";
  for (const auto& id : config.unit_ids()) {
    colloc::MetricSet m;
    try {
      m = colloc::unit_metrics(panel, id, config.reference_id);
    } catch (const colloc::EmptyResultError& e) {
      std::cerr << "skip unit " << id << ": " << e.what() << '\n';
      continue;
    }
    out.emplace_back(id, m);
    os << id << ',' << m.n << ',' << format_optional(m.slope, precision) << ','
       << format_optional(m.intercept, precision) << ','
       << format_optional(m.r_squared, precision) << ','
       << format_number(m.mae, precision) << ','
       << format_number(m.mbe, precision) << ','
       << format_number(m.rmse, precision) << ','
       << format_optional(m.nrmse_mean, precision) << ','
       << format_optional(m.nrmse_range, precision) << ','
       << format_number(colloc::uptime(panel, id), precision) << '\n';
  }
  return os.str();
}

std::string metrics_groups_csv(
    const colloc::AlignedPanel& panel, const colloc::DeploymentConfig& config,
    std::vector<std::pair<std::string, colloc::GroupMetricSet>>& out,
    int precision) {
  std::ostringstream os;
  os << "group,n_pairs,n_periods,rmse_group,sd,cv,nrmse_group_mean,"
        "nrmse_group_range\n";
  for (const auto& [name, units] : config.groups) {
    colloc::GroupMetricSet g;
    try {
      g = colloc::group_metrics(panel, units, config.reference_id);
    } catch (const colloc::EmptyResultError& e) {
      std::cerr << "skip group " << name << ": " << e.what() << '\n';
      continue;
    }
    out.emplace_back(name, g);
    os << name << ',' << g.n_pairs << ',' << g.n_periods << ','
       << format_number(g.rmse_group, precision) << ','
       << format_optional(g.sd, precision) << ','
       << format_optional(g.cv, precision) << ','
       << format_optional(g.nrmse_group_mean, precision) << ','
       << format_optional(g.nrmse_group_range, precision) << '\n';
  }
  return os.str();
}

int run_evaluate(const CommonInputs& c, const std::string& avg,
                 const std::string& thresholds_path, bool export_panel,
                 double completeness) {
  const auto interval = colloc::interval_from_string(avg);
  const auto lp = load_panel(c, interval, completeness);
  const auto thresholds = thresholds_path.empty()
                              ? colloc::ThresholdSet{}
                              : colloc::load_thresholds(thresholds_path);

  OutputDir out(c.out_dir, "evaluate",
                {{"avg", avg},
                 {"precision", c.precision},
                 {"completeness", completeness},
                 {"thresholds", thresholds_path.empty() ? "default" : thresholds_path}},
                {c.input_path, c.config_path});

  std::vector<std::pair<std::string, colloc::MetricSet>> unit_rows;
  std::vector<std::pair<std::string, colloc::GroupMetricSet>> group_rows;
  out.write("metrics_units.csv",
            metrics_units_csv(lp.panel, lp.config, unit_rows, c.precision));
  out.write("metrics_groups.csv",
            metrics_groups_csv(lp.panel, lp.config, group_rows, c.precision));

  const auto report = colloc::grade(unit_rows, group_rows, thresholds,
                                    interval == colloc::Interval::daily);
  out.write("report.md", colloc::render_markdown(report, c.precision));
  nlohmann::json rj = colloc::report_to_json(report);
  nlohmann::json metrics_json;
  for (const auto& [id, m] : unit_rows)
    metrics_json["units"][id] = colloc::metric_set_to_json(m);
  for (const auto& [name, g] : group_rows)
    metrics_json["groups"][name] = colloc::group_metric_set_to_json(g);
  rj["metrics"] = metrics_json;
  out.write("report.json", rj.dump(2) + "\n");

  if (export_panel) {
    std::ostringstream os;
    colloc::export_panel_csv(lp.panel, os, c.precision);
    out.write("panel.csv", os.str());
  }
  out.finish();
  return kExitOk;
}

int run_bins(const CommonInputs& c, double pm_width, double rh_width,
             std::size_t min_hours, const std::string& bin_by,
             const std::string& distribution_device) {
  const auto lp = load_panel(c, colloc::Interval::hourly,
                             colloc::kDefaultCompleteness);
  colloc::BinBy by;
  if (bin_by == "reference")
    by = colloc::BinBy::reference;
  else if (bin_by == "sensor")
    by = colloc::BinBy::sensor;
  else
    throw colloc::ValidationError("--bin-by must be 'reference' or 'sensor'");

  const auto report =
      colloc::binned_metrics(lp.panel, lp.config, pm_width, rh_width,
                             min_hours, by, env_thread_cap());

  OutputDir out(c.out_dir, "bins",
                {{"pm_width", pm_width},
                 {"rh_width", rh_width},
                 {"min_hours", min_hours},
                 {"bin_by", bin_by},
                 {"precision", c.precision}},
                {c.input_path, c.config_path});

  const int p = c.precision;
  std::ostringstream os;
  os << "pm_lo,pm_hi,rh_lo,rh_hi,device_id,metric,value,n_hours\n";
  auto emit = [&](const colloc::BinKey& key, const std::string& subject,
                  const char* metric, const std::optional<double>& value,
                  std::size_t n) {
    if (!value) return;
    os << format_number(key.pm_lo, p) << ',' << format_number(key.pm_hi, p)
       << ',' << format_number(key.rh_lo, p) << ','
       << format_number(key.rh_hi, p) << ',' << subject << ',' << metric << ','
       << format_number(*value, p) << ',' << n << '\n';
  };
  for (const auto& cell : report.bins) {
    for (const auto& u : cell.units) {
      emit(cell.key, u.device_id, "slope", u.metrics.slope, u.n_hours);
      emit(cell.key, u.device_id, "intercept", u.metrics.intercept, u.n_hours);
      emit(cell.key, u.device_id, "r_squared", u.metrics.r_squared, u.n_hours);
      emit(cell.key, u.device_id, "mae", u.metrics.mae, u.n_hours);
      emit(cell.key, u.device_id, "mbe", u.metrics.mbe, u.n_hours);
      emit(cell.key, u.device_id, "rmse", u.metrics.rmse, u.n_hours);
      emit(cell.key, u.device_id, "nrmse_mean", u.metrics.nrmse_mean, u.n_hours);
      emit(cell.key, u.device_id, "nrmse_range", u.metrics.nrmse_range,
           u.n_hours);
    }
    for (const auto& g : cell.groups) {
      emit(cell.key, g.group, "rmse_group", g.metrics.rmse_group, g.n_periods);
      emit(cell.key, g.group, "sd", g.metrics.sd, g.n_periods);
      emit(cell.key, g.group, "cv", g.metrics.cv, g.n_periods);
      emit(cell.key, g.group, "nrmse_group_mean", g.metrics.nrmse_group_mean,
           g.n_periods);
      emit(cell.key, g.group, "nrmse_group_range", g.metrics.nrmse_group_range,
           g.n_periods);
    }
  }
  out.write("bins_long.csv", os.str());

  std::ostringstream ex;
  ex << "pm_lo,pm_hi,rh_lo,rh_hi,subject,n_hours,reason\n";
  for (const auto& e : report.excluded)
    ex << format_number(e.key.pm_lo, p) << ',' << format_number(e.key.pm_hi, p)
       << ',' << format_number(e.key.rh_lo, p) << ','
       << format_number(e.key.rh_hi, p) << ',' << e.subject << ',' << e.n_hours
       << ',' << e.reason << '\n';
  out.write("bins_excluded.csv", ex.str());
  out.write("bins.json", colloc::binned_report_to_json(report).dump(2) + "\n");

  const std::string dist_device = distribution_device.empty()
                                      ? lp.config.reference_id
                                      : distribution_device;
  const auto dist = colloc::data_distribution(lp.panel, dist_device);
  std::ostringstream ds;
  ds << "pm_lo,pm_hi,rh_lo,rh_hi,count,percent_within_pm_bin\n";
  for (const auto& cell : dist)
    ds << format_number(cell.key.pm_lo, p) << ','
       << format_number(cell.key.pm_hi, p) << ','
       << format_number(cell.key.rh_lo, p) << ','
       << format_number(cell.key.rh_hi, p) << ',' << cell.count << ','
       << format_number(cell.percent_within_pm_bin, p) << '\n';
  out.write("distribution.csv", ds.str());
  out.finish();
  return kExitOk;
}

std::vector<double> parse_values_list(const std::string& list) {
  std::vector<double> values;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = colloc::csv::parse_double(item);
    if (!v)
      throw colloc::ValidationError("--values: bad number '" + item + "'");
    values.push_back(*v);
  }
  if (values.empty()) throw colloc::ValidationError("--values: empty list");
  return values;
}

int run_intervals(const CommonInputs& c, const std::string& fit_path,
                  const std::string& unit, const std::string& values_list,
                  double confidence, const std::string& transform_name,
                  bool iterate_outliers, bool save_model) {
  const auto values = parse_values_list(values_list);

  colloc::RegressionFit fit;
  std::vector<std::string> inputs;
  if (!fit_path.empty()) {
    fit = colloc::load_fit(fit_path);
    inputs.push_back(fit_path);
  } else {
    if (c.input_path.empty() || c.config_path.empty())
      throw colloc::ValidationError(
          "intervals: provide --fit, or --input/--config/--unit to fit fresh");
    if (unit.empty())
      throw colloc::ValidationError("intervals: --unit is required when fitting");
    CommonInputs ci = c;
    const auto lp = load_panel(ci, colloc::Interval::hourly,
                               colloc::kDefaultCompleteness);
    const auto p = colloc::paired_series(lp.panel, unit, lp.config.reference_id);
    if (p.n() == 0)
      throw colloc::EmptyResultError("no co-populated cells for '" + unit + "'");
    // Interval analysis direction: reference regressed on the sensor.
    const auto transform = colloc::transform_from_string(transform_name);
    if (transform == colloc::Transform::log_log) {
      colloc::OutlierOptions opts;
      opts.iterate = iterate_outliers;
      fit = colloc::fit_loglog_with_outlier_removal(
          p.y, p.x, colloc::Orientation::reference_on_sensor, opts);
    } else {
      fit = colloc::fit_linear(p.y, p.x,
                               colloc::Orientation::reference_on_sensor);
    }
    inputs = {c.input_path, c.config_path};
  }

  OutputDir out(c.out_dir, "intervals",
                {{"confidence", confidence},
                 {"values", values_list},
                 {"fit", fit_path.empty() ? "fresh" : fit_path},
                 {"unit", unit},
                 {"transform", std::string(colloc::to_string(fit.transform))},
                 {"orientation",
                  std::string(colloc::to_string(fit.orientation))},
                 {"precision", c.precision}},
                inputs);

  std::ostringstream os;
  os << "x_raw,point,ci_lo,ci_hi,pi_lo,pi_hi\n";
  for (double x_raw : values) {
    double x_o = x_raw;
    if (fit.transform == colloc::Transform::log_log) {
      if (!(x_raw > 0.0))
        throw colloc::ValidationError(
            "intervals: values must be strictly positive under the log "
            "transform");
      x_o = std::log(x_raw);
    }
    const auto est = colloc::intervals(fit, x_o, confidence);
    os << format_number(x_raw, c.precision) << ','
       << format_number(est.point, c.precision) << ','
       << format_number(est.ci_lo, c.precision) << ','
       << format_number(est.ci_hi, c.precision) << ','
       << format_number(est.pi_lo, c.precision) << ','
       << format_number(est.pi_hi, c.precision) << '\n';
  }
  out.write("intervals.csv", os.str());
  if (save_model)
    out.write("model.json", colloc::fit_to_json(fit).dump(2) + "\n");
  out.finish();
  return kExitOk;
}

int run_significance(const CommonInputs& c) {
  const auto lp = load_panel(c, colloc::Interval::hourly,
                             colloc::kDefaultCompleteness);
  OutputDir out(c.out_dir, "significance", {{"precision", c.precision}},
                {c.input_path, c.config_path});
  const auto& ref = lp.panel.column(lp.config.reference_id);
  std::ostringstream os;
  os << "device_id,n,coef_intercept,coef_sensor,coef_rh,r2_lcs_only,"
        "r2_lcs_plus_rh,p_value_rh,significant\n";
  bool any = false;
  for (const auto& id : lp.config.unit_ids()) {
    const auto& col = lp.panel.column(id);
    std::vector<double> sensor, reference, rh;
    for (std::size_t i = 0; i < lp.panel.size(); ++i)
      if (ref.values[i] && col.values[i] && lp.panel.humidity.values[i]) {
        sensor.push_back(*col.values[i]);
        reference.push_back(*ref.values[i]);
        rh.push_back(*lp.panel.humidity.values[i]);
      }
    if (sensor.size() <= 4) continue;
    const auto res = colloc::humidity_significance(sensor, reference, rh);
    any = true;
    os << id << ',' << res.n << ','
       << format_number(res.coef_intercept, c.precision) << ','
       << format_number(res.coef_sensor, c.precision) << ','
       << format_number(res.coef_rh, c.precision) << ','
       << format_number(res.r_squared_lcs_only, c.precision) << ','
       << format_number(res.r_squared_lcs_plus_rh, c.precision) << ','
       << format_number(res.p_value_rh, c.precision) << ','
       << (res.significant ? "true" : "false") << '\n';
  }
  if (!any)
    throw colloc::EmptyResultError(
        "significance: no unit with co-populated sensor/reference/RH data");
  out.write("significance.csv", os.str());
  out.finish();
  return kExitOk;
}

int run_diurnal(const CommonInputs& c) {
  const auto lp = load_panel(c, colloc::Interval::hourly,
                             colloc::kDefaultCompleteness);
  const auto rows = colloc::diurnal_profile(lp.panel, lp.config);
  OutputDir out(c.out_dir, "diurnal", {{"precision", c.precision}},
                {c.input_path, c.config_path});
  std::ostringstream os;
  os << "hour";
  for (const auto& id : lp.config.unit_ids()) os << ",mae_" << id;
  for (const auto& id : lp.panel.device_ids) os << ",pm25_" << id;
  os << ",temperature,humidity\n";
  for (const auto& row : rows) {
    os << row.hour;
    for (const auto& v : row.mae_by_unit)
      os << ',' << format_optional(v, c.precision);
    for (const auto& v : row.pm25_by_device)
      os << ',' << format_optional(v, c.precision);
    os << ',' << format_optional(row.temperature, c.precision) << ','
       << format_optional(row.humidity, c.precision) << '\n';
  }
  out.write("diurnal.csv", os.str());
  out.finish();
  return kExitOk;
}

int run_monthly(const CommonInputs& c) {
  const auto lp = load_panel(c, colloc::Interval::hourly,
                             colloc::kDefaultCompleteness);
  const auto rows = colloc::monthly_summary(lp.panel, lp.config);
  if (rows.empty())
    throw colloc::EmptyResultError("monthly: no month with co-populated data");
  OutputDir out(c.out_dir, "monthly", {{"precision", c.precision}},
                {c.input_path, c.config_path});
  std::ostringstream os;
  os << "month";
  for (const auto& id : lp.config.unit_ids()) os << ",r2_" << id;
  os << ",mean_reference_pm25,mean_humidity,mean_temperature\n";
  for (const auto& row : rows) {
    os << row.month;
    for (const auto& v : row.r2_by_unit)
      os << ',' << format_optional(v, c.precision);
    os << ',' << format_optional(row.mean_reference_pm25, c.precision) << ','
       << format_optional(row.mean_humidity, c.precision) << ','
       << format_optional(row.mean_temperature, c.precision) << '\n';
  }
  out.write("monthly.csv", os.str());
  out.finish();
  return kExitOk;
}

int run_select(const CommonInputs& c, const std::string& catalog_path,
               const colloc::SelectionCriteria& criteria, bool all_off) {
  std::vector<colloc::SensorSpec> catalog;
  std::vector<std::string> inputs;
  if (catalog_path.empty()) {
    catalog = colloc::bundled_catalog();
  } else {
    std::ifstream in(catalog_path);
    if (!in)
      throw colloc::ValidationError("cannot open catalog '" + catalog_path + "'");
    catalog = colloc::parse_catalog_csv(in);
    inputs.push_back(catalog_path);
  }
  const auto effective =
      all_off ? colloc::SelectionCriteria::none() : criteria;
  if (catalog.empty())
    throw colloc::ValidationError("select: catalog is empty");

  nlohmann::json params{
      {"catalog", catalog_path.empty() ? "bundled" : catalog_path},
      {"require_fan", effective.require_fan},
      {"require_laser", effective.require_laser}};
  params["min_pm_range"] = effective.min_pm_range
                               ? nlohmann::json(*effective.min_pm_range)
                               : nlohmann::json(nullptr);
  params["min_rh_upper"] = effective.min_rh_upper
                               ? nlohmann::json(*effective.min_rh_upper)
                               : nlohmann::json(nullptr);
  params["max_price_usd"] = effective.max_price_usd
                                ? nlohmann::json(*effective.max_price_usd)
                                : nlohmann::json(nullptr);
  OutputDir out(c.out_dir, "select", params, inputs);

  std::ostringstream os;
  os << "manufacturer,model,pm_range_max,rh_range_max,light_source,has_fan,"
        "price_usd,selected,failed_criteria\n";
  for (const auto& s : catalog) {
    const auto failed = colloc::failed_criteria(s, effective);
    os << s.manufacturer << ',' << s.model << ','
       << format_optional(s.pm_range_max, 0) << ','
       << format_optional(s.rh_range_max, 0) << ','
       << colloc::to_string(s.light_source) << ','
       << (s.has_fan ? "yes" : "no") << ',' << format_number(s.price_usd, 2)
       << ',' << (failed.empty() ? "yes" : "no") << ',';
    for (std::size_t i = 0; i < failed.size(); ++i)
      os << (i ? "; " : "") << failed[i];
    os << '\n';
  }
  out.write("selection.csv", os.str());
  out.finish();
  return kExitOk;
}

int run_quality(const CommonInputs& c, const std::string& avg,
                std::size_t min_run, std::optional<double> ceiling,
                std::size_t window, double ratio_threshold,
                std::size_t min_gap) {
  const auto interval = colloc::interval_from_string(avg);
  const auto lp = load_panel(c, interval, colloc::kDefaultCompleteness);
  OutputDir out(c.out_dir, "quality",
                {{"avg", avg},
                 {"min_run", min_run},
                 {"window", window},
                 {"ratio_threshold", ratio_threshold},
                 {"min_gap", min_gap}},
                {c.input_path, c.config_path});

  std::vector<colloc::QualityFlag> flags;
  for (const auto& id : lp.panel.device_ids) {
    auto sat = colloc::detect_saturation(lp.panel, id, min_run, ceiling);
    flags.insert(flags.end(), sat.begin(), sat.end());
    auto gaps = colloc::detect_gaps(lp.panel, id, min_gap);
    flags.insert(flags.end(), gaps.begin(), gaps.end());
  }
  for (const auto& [name, units] : lp.config.groups) {
    if (units.size() < 2) continue;
    auto drift =
        colloc::group_drift_screen(lp.panel, units, window, ratio_threshold);
    flags.insert(flags.end(), drift.begin(), drift.end());
  }

  std::ostringstream os;
  os << "device_id,kind,window_start,window_end,detail\n";
  for (const auto& f : flags)
    os << f.device_id << ',' << colloc::to_string(f.kind) << ','
       << colloc::timeutil::format_iso8601(f.window_start) << ','
       << colloc::timeutil::format_iso8601(f.window_end) << ',' << f.detail
       << '\n';
  out.write("quality_flags.csv", os.str());
  out.finish();
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"colloc-eval: evaluate low-cost PM2.5 sensors against a "
               "collocated reference monitor"};
  app.require_subcommand(1);

  CommonInputs c_eval, c_bins, c_intervals, c_sig, c_diurnal, c_monthly,
      c_select, c_quality;

  // evaluate
  auto* evaluate = app.add_subcommand(
      "evaluate", "Metric suite and USEPA compliance report");
  add_common(evaluate, c_eval);
  std::string eval_avg = "daily";
  std::string thresholds_path;
  bool export_panel = false;
  double completeness = colloc::kDefaultCompleteness;
  evaluate->add_option("--avg", eval_avg, "Averaging interval: hourly|daily");
  evaluate->add_option("--thresholds", thresholds_path,
                       "JSON file overriding USEPA thresholds");
  evaluate->add_flag("--export-panel", export_panel,
                     "Also write the aligned panel as panel.csv");
  evaluate->add_option("--completeness", completeness,
                       "Fraction of expected samples required per period");

  // bins
  auto* bins = app.add_subcommand(
      "bins", "Granular PM x RH binned metrics and data distribution");
  add_common(bins, c_bins);
  double pm_width = 100.0, rh_width = 10.0;
  std::size_t min_hours = 10;
  std::string bin_by = "reference", distribution_device;
  bins->add_option("--pm-width", pm_width, "PM2.5 bin width (ug/m^3)");
  bins->add_option("--rh-width", rh_width, "RH bin width (%)");
  bins->add_option("--min-hours", min_hours,
                   "Minimum hours of data for a bin to be reported");
  bins->add_option("--bin-by", bin_by, "Bin on 'reference' or 'sensor' value");
  bins->add_option("--distribution-device", distribution_device,
                   "Device for distribution.csv (default: reference)");

  // intervals
  auto* intervals = app.add_subcommand(
      "intervals", "Confidence/prediction intervals for raw sensor values");
  add_common(intervals, c_intervals, /*need_input=*/false);
  intervals->add_option("--input", c_intervals.input_path,
                        "Collocation CSV (to fit fresh)");
  intervals->add_option("--config", c_intervals.config_path,
                        "Deployment config JSON (to fit fresh)");
  std::string fit_path, unit, values_list, transform_name = "log_log";
  double confidence = 0.95;
  bool iterate_outliers = false, save_model = false;
  intervals->add_option("--fit", fit_path, "Fitted model JSON");
  intervals->add_option("--unit", unit, "Sensor unit to fit against");
  intervals->add_option("--values", values_list,
                        "Comma-separated raw sensor values")->required();
  intervals->add_option("--confidence", confidence, "Confidence level");
  intervals->add_option("--transform", transform_name,
                        "Fit transform: log_log|none");
  intervals->add_flag("--iterate-outliers", iterate_outliers,
                      "Repeat the 3-sigma screen to a fixed point");
  intervals->add_flag("--save-model", save_model, "Also write model.json");

  // significance
  auto* significance = app.add_subcommand(
      "significance", "Humidity-term t-test per unit (hourly data)");
  add_common(significance, c_sig);

  // diurnal
  auto* diurnal =
      app.add_subcommand("diurnal", "Hour-of-day profile in local time");
  add_common(diurnal, c_diurnal);

  // monthly
  auto* monthly =
      app.add_subcommand("monthly", "Month-wise R^2 and mean conditions");
  add_common(monthly, c_monthly);

  // select
  auto* select = app.add_subcommand(
      "select", "Screen a sensor catalog against selection criteria");
  add_common(select, c_select, /*need_input=*/false);
  std::string catalog_path;
  colloc::SelectionCriteria criteria;
  bool all_off = false;
  double max_price = -1.0, min_pm_range = 1000.0, min_rh_upper = 90.0;
  bool no_pm_range = false, no_rh_upper = false;
  select->add_option("--catalog", catalog_path,
                     "Catalog CSV (default: bundled list)");
  select->add_flag("!--no-require-fan", criteria.require_fan,
                   "Drop the fan criterion");
  select->add_flag("!--no-require-laser", criteria.require_laser,
                   "Drop the laser criterion");
  select->add_option("--min-pm-range", min_pm_range,
                     "Required PM range ceiling (ug/m^3)");
  select->add_flag("--no-min-pm-range", no_pm_range, "Drop the PM range criterion");
  select->add_option("--min-rh-upper", min_rh_upper,
                     "Required RH upper operating limit (%)");
  select->add_flag("--no-min-rh-upper", no_rh_upper, "Drop the RH criterion");
  select->add_option("--max-price", max_price,
                     "Price cap in USD (off unless given)");
  select->add_flag("--all-off", all_off, "Disable every criterion");

  // quality
  auto* quality = app.add_subcommand(
      "quality", "Saturation plateaus, gaps, and group drift flags");
  add_common(quality, c_quality);
  std::string quality_avg = "hourly";
  std::size_t min_run = 3, window = 24, min_gap = 3;
  double ratio_threshold = 0.5, ceiling_value = -1.0;
  quality->add_option("--avg", quality_avg, "Averaging interval: hourly|daily");
  quality->add_option("--min-run", min_run, "Minimum plateau length");
  quality->add_option("--ceiling", ceiling_value,
                      "Explicit saturation ceiling (default: observed max)");
  quality->add_option("--window", window, "Drift screen window (periods)");
  quality->add_option("--ratio-threshold", ratio_threshold,
                      "Drift ratio threshold");
  quality->add_option("--min-gap", min_gap, "Minimum gap length to flag");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*evaluate)
      return run_evaluate(c_eval, eval_avg, thresholds_path, export_panel,
                          completeness);
    if (*bins)
      return run_bins(c_bins, pm_width, rh_width, min_hours, bin_by,
                      distribution_device);
    if (*intervals)
      return run_intervals(c_intervals, fit_path, unit, values_list, confidence,
                           transform_name, iterate_outliers, save_model);
    if (*significance) return run_significance(c_sig);
    if (*diurnal) return run_diurnal(c_diurnal);
    if (*monthly) return run_monthly(c_monthly);
    if (*select) {
      criteria.min_pm_range =
          no_pm_range ? std::nullopt : std::optional<double>(min_pm_range);
      criteria.min_rh_upper =
          no_rh_upper ? std::nullopt : std::optional<double>(min_rh_upper);
      if (max_price >= 0.0) criteria.max_price_usd = max_price;
      return run_select(c_select, catalog_path, criteria, all_off);
    }
    if (*quality)
      return run_quality(c_quality, quality_avg, min_run,
                         ceiling_value >= 0.0
                             ? std::optional<double>(ceiling_value)
                             : std::nullopt,
                         window, ratio_threshold, min_gap);
  } catch (const colloc::EmptyResultError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitEmpty;
  } catch (const colloc::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const colloc::DegenerateInputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}
