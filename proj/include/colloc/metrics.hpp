#ifndef COLLOC_METRICS_HPP
#define COLLOC_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "colloc/core.hpp"
#include "colloc/errors.hpp"
#include "colloc/numeric.hpp"

// Accuracy and precision metrics for paired reference/sensor series and for
// sensor groups. Convention throughout: x is the reference series, y the
// sensor series; signed errors are sensor minus reference.

namespace colloc {

struct PairedSeries {
  std::vector<double> x; // reference, µg/m³
  std::vector<double> y; // sensor, µg/m³

  std::size_t n() const { return x.size(); }
};

inline PairedSeries make_paired(std::vector<double> x, std::vector<double> y) {
  if (x.size() != y.size())
    throw ValidationError("paired series length mismatch");
  return {std::move(x), std::move(y)};
}

// Pairs of co-populated cells between a sensor unit and the reference.
inline PairedSeries paired_series(const AlignedPanel& panel,
                                  std::string_view sensor_id,
                                  std::string_view reference_id) {
  const auto& ref = panel.column(reference_id);
  const auto& sen = panel.column(sensor_id);
  PairedSeries p;
  for (std::size_t i = 0; i < panel.size(); ++i)
    if (ref.values[i] && sen.values[i]) {
      p.x.push_back(*ref.values[i]);
      p.y.push_back(*sen.values[i]);
    }
  return p;
}

namespace detail {

struct CenteredMoments {
  double x_bar, y_bar, s_xx, s_yy, s_xy;
};

inline CenteredMoments centered_moments(const PairedSeries& p) {
  const double x_bar = mean(p.x);
  const double y_bar = mean(p.y);
  CompensatedSum sxx, syy, sxy;
  for (std::size_t i = 0; i < p.n(); ++i) {
    const double dx = p.x[i] - x_bar;
    const double dy = p.y[i] - y_bar;
    sxx.add(dx * dx);
    syy.add(dy * dy);
    sxy.add(dx * dy);
  }
  return {x_bar, y_bar, sxx.value(), syy.value(), sxy.value()};
}

} // namespace detail

// Least-squares line y = m·x + b: m = Σ(yᵢ−ȳ)(xᵢ−x̄) / Σ(xᵢ−x̄)², b = ȳ − m·x̄.
inline std::pair<double, double> ols_slope_intercept(const PairedSeries& p) {
  if (p.n() < 2) throw ValidationError("ols needs n >= 2");
  const auto m = detail::centered_moments(p);
  if (m.s_xx == 0.0)
    throw DegenerateInputError("ols: constant regressor (zero S_xx)");
  const double slope = m.s_xy / m.s_xx;
  return {slope, m.y_bar - slope * m.x_bar};
}

// Squared Pearson correlation of x and y.
inline double r_squared(const PairedSeries& p) {
  if (p.n() < 2) throw ValidationError("r_squared needs n >= 2");
  const auto m = detail::centered_moments(p);
  if (m.s_xx == 0.0 || m.s_yy == 0.0)
    throw DegenerateInputError("r_squared: constant series");
  return std::min(1.0, (m.s_xy * m.s_xy) / (m.s_xx * m.s_yy));
}

inline double mae(const PairedSeries& p) {
  if (p.n() < 1) throw ValidationError("mae needs n >= 1");
  CompensatedSum s;
  for (std::size_t i = 0; i < p.n(); ++i) s.add(std::abs(p.x[i] - p.y[i]));
  return s.value() / static_cast<double>(p.n());
}

// Mean bias error, sensor minus reference: positive means overestimation.
inline double mbe(const PairedSeries& p) {
  if (p.n() < 1) throw ValidationError("mbe needs n >= 1");
  CompensatedSum s;
  for (std::size_t i = 0; i < p.n(); ++i) s.add(p.y[i] - p.x[i]);
  return s.value() / static_cast<double>(p.n());
}

inline double rmse_single(const PairedSeries& p) {
  if (p.n() < 1) throw ValidationError("rmse needs n >= 1");
  CompensatedSum s;
  for (std::size_t i = 0; i < p.n(); ++i) {
    const double d = p.y[i] - p.x[i];
    s.add(d * d);
  }
  return std::sqrt(s.value() / static_cast<double>(p.n()));
}

// Pooled RMSE over every (unit, period) cell co-populated with the reference:
// sqrt( Σ_j Σ_d (x_dj − R_d)² / (N·M) ) with N·M counted as the pairs seen.
inline double rmse_group(const AlignedPanel& panel,
                         const std::vector<std::string>& group,
                         std::string_view reference_id) {
  if (group.empty()) throw ValidationError("rmse_group: empty group");
  const auto& ref = panel.column(reference_id);
  CompensatedSum s;
  std::size_t count = 0;
  for (const auto& id : group) {
    const auto& col = panel.column(id);
    for (std::size_t i = 0; i < panel.size(); ++i)
      if (ref.values[i] && col.values[i]) {
        const double d = *col.values[i] - *ref.values[i];
        s.add(d * d);
        ++count;
      }
  }
  if (count == 0)
    throw EmptyResultError("rmse_group: no co-populated cells");
  return std::sqrt(s.value() / static_cast<double>(count));
}

// NRMSE as (mean-normalized %, range-normalized %) of the reference series.
inline std::pair<double, double> nrmse(double rmse,
                                       std::span<const double> reference_series) {
  if (reference_series.empty())
    throw ValidationError("nrmse: empty reference series");
  const double ref_mean = mean(reference_series);
  const auto [lo, hi] =
      std::minmax_element(reference_series.begin(), reference_series.end());
  if (ref_mean <= 0.0)
    throw DegenerateInputError("nrmse: non-positive reference mean");
  if (*hi == *lo) throw DegenerateInputError("nrmse: zero reference range");
  return {rmse / ref_mean * 100.0, rmse / (*hi - *lo) * 100.0};
}

// Between-unit precision: SD pooled over periods where every unit of the
// group reported, CV as a percentage of the group's grand mean over those
// periods. Periods with partial group coverage are excluded.
inline std::pair<double, double> group_sd_cv(
    const AlignedPanel& panel, const std::vector<std::string>& group) {
  const std::size_t m = group.size();
  if (m < 2) throw ValidationError("group_sd_cv needs >= 2 units");
  std::vector<const PanelColumn*> cols;
  for (const auto& id : group) cols.push_back(&panel.column(id));

  CompensatedSum sq_dev, grand;
  std::size_t n_periods = 0;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    bool all = true;
    for (const auto* c : cols)
      if (!c->values[i]) {
        all = false;
        break;
      }
    if (!all) continue;
    ++n_periods;
    CompensatedSum period;
    for (const auto* c : cols) period.add(*c->values[i]);
    const double x_bar_d = period.value() / static_cast<double>(m);
    for (const auto* c : cols) {
      const double d = *c->values[i] - x_bar_d;
      sq_dev.add(d * d);
      grand.add(*c->values[i]);
    }
  }
  if (n_periods == 0)
    throw EmptyResultError("group_sd_cv: no period with all units populated");
  const double denom = static_cast<double>(n_periods * m) - 1.0;
  const double sd = std::sqrt(std::max(0.0, sq_dev.value()) / denom);
  const double grand_mean = grand.value() / static_cast<double>(n_periods * m);
  if (grand_mean <= 0.0) {
    if (sd == 0.0) return {0.0, 0.0};
    throw DegenerateInputError("group_sd_cv: non-positive group mean");
  }
  return {sd, sd / grand_mean * 100.0};
}

// Full per-unit metric bundle. Regression-based fields and NRMSE come back
// absent instead of throwing when the slice is too small or degenerate, so
// the same builder serves both whole-panel and per-bin evaluation.
struct MetricSet {
  std::size_t n = 0;
  std::optional<double> slope;
  std::optional<double> intercept;   // µg/m³
  std::optional<double> r_squared;   // [0, 1]
  double mae = 0.0;                  // µg/m³
  double mbe = 0.0;                  // µg/m³, sensor minus reference
  double rmse = 0.0;                 // µg/m³
  std::optional<double> nrmse_mean;  // %
  std::optional<double> nrmse_range; // %
};

struct GroupMetricSet {
  std::size_t n_pairs = 0;   // (unit, period) cells behind rmse_group
  std::size_t n_periods = 0; // periods with the full group populated
  double rmse_group = 0.0;   // µg/m³
  std::optional<double> sd;  // µg/m³, needs M >= 2
  std::optional<double> cv;  // %
  std::optional<double> nrmse_group_mean;  // %
  std::optional<double> nrmse_group_range; // %
};

inline MetricSet compute_metrics(const PairedSeries& p,
                                 std::span<const double> reference_for_norm,
                                 std::size_t min_regression_n = 2) {
  if (p.n() < 1) throw EmptyResultError("compute_metrics: empty pairing");
  MetricSet ms;
  ms.n = p.n();
  ms.mae = mae(p);
  ms.mbe = mbe(p);
  ms.rmse = rmse_single(p);
  if (p.n() >= std::max<std::size_t>(min_regression_n, 2)) {
    try {
      const auto [slope, intercept] = ols_slope_intercept(p);
      ms.slope = slope;
      ms.intercept = intercept;
      ms.r_squared = r_squared(p);
    } catch (const DegenerateInputError&) {
      // constant slice: leave the regression fields absent
    }
  }
  try {
    const auto [nm, nr] = nrmse(ms.rmse, reference_for_norm);
    ms.nrmse_mean = nm;
    ms.nrmse_range = nr;
  } catch (const DegenerateInputError&) {
  }
  return ms;
}

inline MetricSet unit_metrics(const AlignedPanel& panel,
                              std::string_view sensor_id,
                              std::string_view reference_id) {
  const PairedSeries p = paired_series(panel, sensor_id, reference_id);
  if (p.n() == 0)
    throw EmptyResultError("no co-populated cells for '" +
                           std::string(sensor_id) + "'");
  // Normalize NRMSE by the reference series over its whole populated span.
  std::vector<double> ref;
  for (const auto& v : panel.column(reference_id).values)
    if (v) ref.push_back(*v);
  return compute_metrics(p, ref);
}

inline GroupMetricSet group_metrics(const AlignedPanel& panel,
                                    const std::vector<std::string>& group,
                                    std::string_view reference_id) {
  GroupMetricSet gm;
  gm.rmse_group = rmse_group(panel, group, reference_id);
  const auto& ref = panel.column(reference_id);
  for (const auto& id : group) {
    const auto& col = panel.column(id);
    for (std::size_t i = 0; i < panel.size(); ++i)
      gm.n_pairs += ref.values[i] && col.values[i];
  }
  if (group.size() >= 2) {
    try {
      const auto [sd, cv] = group_sd_cv(panel, group);
      gm.sd = sd;
      gm.cv = cv;
    } catch (const EmptyResultError&) {
    }
  }
  std::vector<const PanelColumn*> cols;
  for (const auto& id : group) cols.push_back(&panel.column(id));
  for (std::size_t i = 0; i < panel.size(); ++i) {
    bool all = true;
    for (const auto* c : cols) all = all && c->values[i].has_value();
    gm.n_periods += all;
  }
  std::vector<double> ref_values;
  for (const auto& v : ref.values)
    if (v) ref_values.push_back(*v);
  try {
    const auto [nm, nr] = nrmse(gm.rmse_group, ref_values);
    gm.nrmse_group_mean = nm;
    gm.nrmse_group_range = nr;
  } catch (const DegenerateInputError&) {
  }
  return gm;
}

} // namespace colloc

#endif
