#ifndef COLLOC_COMPLIANCE_HPP
#define COLLOC_COMPLIANCE_HPP

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "colloc/csv.hpp"
#include "colloc/errors.hpp"
#include "colloc/metrics.hpp"

// Grading against the USEPA recommended performance targets for PM2.5
// air sensors (daily averaged data; hourly grading is informational only).

namespace colloc {

struct ThresholdSet {
  double r2_min = 0.7;
  double intercept_abs_max = 5.0; // µg/m³
  double slope_lo = 0.65;
  double slope_hi = 1.35;
  double rmse_max = 7.0;  // µg/m³
  double nrmse_max = 30.0; // %
  double sd_max = 5.0;    // µg/m³
  double cv_max = 30.0;   // %

  void validate() const {
    if (!(slope_lo < slope_hi))
      throw ValidationError("thresholds: slope_lo must be < slope_hi");
    if (!(intercept_abs_max > 0.0) || !(rmse_max > 0.0) || !(nrmse_max > 0.0) ||
        !(sd_max > 0.0) || !(cv_max > 0.0))
      throw ValidationError("thresholds: maxima must be positive");
  }
};

// A single graded value. Boundary values pass: every guideline is written
// with ≤ / ≥ in the USEPA table.
struct Verdict {
  std::optional<double> value;
  bool pass = false;
  bool applicable = false; // false when the metric was absent
  std::string guideline;
};

namespace detail {

inline Verdict at_most(std::optional<double> value, double max,
                       const std::string& guideline) {
  return {value, value && *value <= max, value.has_value(), guideline};
}
inline Verdict at_least(std::optional<double> value, double min,
                        const std::string& guideline) {
  return {value, value && *value >= min, value.has_value(), guideline};
}
inline Verdict within(std::optional<double> value, double lo, double hi,
                      const std::string& guideline) {
  return {value, value && *value >= lo && *value <= hi, value.has_value(),
          guideline};
}

inline bool conj(std::initializer_list<const Verdict*> vs) {
  for (const auto* v : vs)
    if (v->applicable && !v->pass) return false;
  return true;
}

} // namespace detail

struct UnitCompliance {
  std::string device_id;
  Verdict r2, slope, intercept;
  std::optional<double> mae; // shown for context, not graded
  bool overall = false;
};

struct GroupCompliance {
  std::string group;
  Verdict rmse, nrmse_mean, nrmse_range, sd, cv;
  // The USEPA error target reads "RMSE ≤ 7 µg/m³ or NRMSE ≤ 30%": the
  // disjunction of the three error verdicts above.
  Verdict rmse_or_nrmse;
  bool overall = false;
};

struct ComplianceReport {
  bool normative = true; // false when graded on hourly averages
  ThresholdSet thresholds;
  std::vector<UnitCompliance> units;
  std::vector<GroupCompliance> groups;
};

inline UnitCompliance grade_unit(const std::string& device_id,
                                 const MetricSet& m, const ThresholdSet& t) {
  UnitCompliance u;
  u.device_id = device_id;
  u.r2 = detail::at_least(m.r_squared, t.r2_min,
                          ">= " + csv::format_number(t.r2_min, 2));
  u.slope = detail::within(m.slope, t.slope_lo, t.slope_hi,
                           "within [" + csv::format_number(t.slope_lo, 2) +
                               ", " + csv::format_number(t.slope_hi, 2) + "]");
  u.intercept = detail::within(
      m.intercept, -t.intercept_abs_max, t.intercept_abs_max,
      "within +/-" + csv::format_number(t.intercept_abs_max, 0));
  u.mae = m.mae;
  u.overall = detail::conj({&u.r2, &u.slope, &u.intercept});
  return u;
}

inline GroupCompliance grade_group(const std::string& name,
                                   const GroupMetricSet& g,
                                   const ThresholdSet& t) {
  GroupCompliance gc;
  gc.group = name;
  gc.rmse = detail::at_most(g.rmse_group, t.rmse_max,
                            "<= " + csv::format_number(t.rmse_max, 0));
  gc.nrmse_mean = detail::at_most(g.nrmse_group_mean, t.nrmse_max,
                                  "<= " + csv::format_number(t.nrmse_max, 0) + "%");
  gc.nrmse_range = detail::at_most(g.nrmse_group_range, t.nrmse_max,
                                   "<= " + csv::format_number(t.nrmse_max, 0) + "%");
  gc.sd = detail::at_most(g.sd, t.sd_max, "<= " + csv::format_number(t.sd_max, 0));
  gc.cv = detail::at_most(g.cv, t.cv_max,
                          "<= " + csv::format_number(t.cv_max, 0) + "%");
  const bool any_error_metric =
      gc.rmse.applicable || gc.nrmse_mean.applicable || gc.nrmse_range.applicable;
  gc.rmse_or_nrmse.applicable = any_error_metric;
  gc.rmse_or_nrmse.pass = (gc.rmse.applicable && gc.rmse.pass) ||
                          (gc.nrmse_mean.applicable && gc.nrmse_mean.pass) ||
                          (gc.nrmse_range.applicable && gc.nrmse_range.pass);
  gc.rmse_or_nrmse.guideline = "RMSE " + gc.rmse.guideline + " or NRMSE <= " +
                               csv::format_number(t.nrmse_max, 0) + "%";
  gc.overall =
      (!gc.rmse_or_nrmse.applicable || gc.rmse_or_nrmse.pass) &&
      detail::conj({&gc.sd, &gc.cv});
  return gc;
}

inline ComplianceReport grade(
    const std::vector<std::pair<std::string, MetricSet>>& units,
    const std::vector<std::pair<std::string, GroupMetricSet>>& groups,
    const ThresholdSet& thresholds, bool daily_averages = true) {
  thresholds.validate();
  ComplianceReport report;
  report.normative = daily_averages;
  report.thresholds = thresholds;
  for (const auto& [id, m] : units)
    report.units.push_back(grade_unit(id, m, thresholds));
  for (const auto& [name, g] : groups)
    report.groups.push_back(grade_group(name, g, thresholds));
  return report;
}

enum class ReportFormat { json, markdown };

namespace detail {

inline std::string mark(const Verdict& v, int precision) {
  if (!v.applicable) return "-";
  return csv::format_number(*v.value, precision) +
         (v.pass ? " (pass)" : " (fail)");
}

inline void md_row(std::ostream& out, const std::string& label,
                   const std::vector<std::string>& cells,
                   const std::string& guideline) {
  out << "| " << label << " |";
  for (const auto& c : cells) out << ' ' << c << " |";
  out << ' ' << guideline << " |\n";
}

} // namespace detail

// Markdown rendering: units as columns, metrics as rows, guideline column
// last.
inline std::string render_markdown(const ComplianceReport& report,
                                   int precision = 4) {
  std::ostringstream out;
  out << "# USEPA performance check\n\n";
  if (!report.normative)
    out << "> Graded on hourly averages: the USEPA targets apply to daily "
           "(24-hour) averaged data, so these verdicts are non-normative.\n\n";

  if (!report.units.empty()) {
    out << "## Units\n\n| Metric |";
    for (const auto& u : report.units) out << ' ' << u.device_id << " |";
    out << " Guideline |\n|---|";
    for (std::size_t i = 0; i < report.units.size(); ++i) out << "---|";
    out << "---|\n";
    std::vector<std::string> cells;
    auto row = [&](const std::string& label, auto getter,
                   const std::string& guideline) {
      cells.clear();
      for (const auto& u : report.units) cells.push_back(getter(u));
      detail::md_row(out, label, cells, guideline);
    };
    row("R^2", [&](const UnitCompliance& u) { return detail::mark(u.r2, precision); },
        report.units.front().r2.guideline);
    row("Intercept (ug/m^3)",
        [&](const UnitCompliance& u) { return detail::mark(u.intercept, precision); },
        report.units.front().intercept.guideline);
    row("Slope",
        [&](const UnitCompliance& u) { return detail::mark(u.slope, precision); },
        report.units.front().slope.guideline);
    row("MAE (ug/m^3)",
        [&](const UnitCompliance& u) {
          return u.mae ? csv::format_number(*u.mae, precision) : std::string("-");
        },
        "");
    row("Overall",
        [&](const UnitCompliance& u) { return std::string(u.overall ? "pass" : "fail"); },
        "");
    out << '\n';
  }

  if (!report.groups.empty()) {
    out << "## Groups\n\n| Metric |";
    for (const auto& g : report.groups) out << ' ' << g.group << " |";
    out << " Guideline |\n|---|";
    for (std::size_t i = 0; i < report.groups.size(); ++i) out << "---|";
    out << "---|\n";
    std::vector<std::string> cells;
    auto row = [&](const std::string& label, auto getter,
                   const std::string& guideline) {
      cells.clear();
      for (const auto& g : report.groups) cells.push_back(getter(g));
      detail::md_row(out, label, cells, guideline);
    };
    row("RMSE_group (ug/m^3)",
        [&](const GroupCompliance& g) { return detail::mark(g.rmse, precision); },
        report.groups.front().rmse.guideline);
    row("NRMSE_mean (%)",
        [&](const GroupCompliance& g) { return detail::mark(g.nrmse_mean, precision); },
        report.groups.front().nrmse_mean.guideline);
    row("NRMSE_range (%)",
        [&](const GroupCompliance& g) { return detail::mark(g.nrmse_range, precision); },
        report.groups.front().nrmse_range.guideline);
    row("RMSE or NRMSE",
        [&](const GroupCompliance& g) {
          return std::string(!g.rmse_or_nrmse.applicable ? "-"
                             : g.rmse_or_nrmse.pass      ? "pass"
                                                         : "fail");
        },
        report.groups.front().rmse_or_nrmse.guideline);
    row("SD (ug/m^3)",
        [&](const GroupCompliance& g) { return detail::mark(g.sd, precision); },
        report.groups.front().sd.guideline);
    row("CV (%)",
        [&](const GroupCompliance& g) { return detail::mark(g.cv, precision); },
        report.groups.front().cv.guideline);
    row("Overall",
        [&](const GroupCompliance& g) { return std::string(g.overall ? "pass" : "fail"); },
        "");
    out << '\n';
  }
  return out.str();
}

} // namespace colloc

#endif
