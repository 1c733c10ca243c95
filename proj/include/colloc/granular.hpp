#ifndef COLLOC_GRANULAR_HPP
#define COLLOC_GRANULAR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "colloc/core.hpp"
#include "colloc/errors.hpp"
#include "colloc/metrics.hpp"

// Granular analysis: PM × humidity binning of paired hourly data, plus
// diurnal and monthly aggregations.

namespace colloc {

// Left-closed right-open PM × RH cell; the RH axis closes at 100 so a
// saturated reading joins the top bin instead of an unreachable one.
struct BinKey {
  double pm_lo = 0.0, pm_hi = 0.0; // µg/m³
  double rh_lo = 0.0, rh_hi = 0.0; // %

  friend bool operator<(const BinKey& a, const BinKey& b) {
    return std::tie(a.pm_lo, a.rh_lo) < std::tie(b.pm_lo, b.rh_lo);
  }
  friend bool operator==(const BinKey& a, const BinKey& b) {
    return a.pm_lo == b.pm_lo && a.rh_lo == b.rh_lo;
  }
};

namespace detail {

// floor(v / width) with clamping so that idx·width <= v < (idx+1)·width
// holds in floating arithmetic; plain floor can land one bin off when v is
// itself a computed bin edge.
inline std::int64_t bin_index(double v, double width) {
  auto idx = static_cast<std::int64_t>(std::floor(v / width));
  while (static_cast<double>(idx) * width > v) --idx;
  while (static_cast<double>(idx + 1) * width <= v) ++idx;
  return idx;
}

} // namespace detail

inline BinKey assign_bin(double pm, double rh, double pm_width,
                         double rh_width) {
  if (pm < 0.0) throw ValidationError("assign_bin: pm must be >= 0");
  if (rh < 0.0 || rh > 100.0)
    throw ValidationError("assign_bin: rh must be within [0, 100]");
  if (!(pm_width > 0.0) || !(rh_width > 0.0))
    throw ValidationError("assign_bin: widths must be positive");
  BinKey key;
  const auto pm_idx = detail::bin_index(pm, pm_width);
  key.pm_lo = static_cast<double>(pm_idx) * pm_width;
  key.pm_hi = static_cast<double>(pm_idx + 1) * pm_width;
  const auto rh_idx = detail::bin_index(rh, rh_width);
  key.rh_lo = static_cast<double>(rh_idx) * rh_width;
  key.rh_hi = static_cast<double>(rh_idx + 1) * rh_width;
  if (key.rh_lo >= 100.0) { // RH = 100 joins the closed top bin
    key.rh_lo = 100.0 - rh_width;
    key.rh_hi = 100.0;
  }
  return key;
}

enum class BinBy { reference, sensor };

struct BinUnitMetrics {
  std::string device_id;
  std::size_t n_hours = 0;
  MetricSet metrics;
};

struct BinGroupMetrics {
  std::string group;
  std::size_t n_periods = 0;
  GroupMetricSet metrics;
};

struct BinnedCell {
  BinKey key;
  std::vector<BinUnitMetrics> units;   // config order
  std::vector<BinGroupMetrics> groups; // config order
};

struct ExcludedBin {
  BinKey key;
  std::string subject; // unit or group name
  std::size_t n_hours = 0;
  std::string reason;
};

struct BinnedReport {
  double pm_width = 100.0, rh_width = 10.0;
  std::size_t min_hours = 10;
  std::vector<BinnedCell> bins; // sorted by (pm_lo, rh_lo)
  std::vector<ExcludedBin> excluded;
  std::size_t total_pairs = 0; // co-populated (unit, period) pairs with RH
};

// Per-bin regression fields additionally need at least this many pairs.
inline constexpr std::size_t kBinRegressionMinPairs = 3;

namespace detail {

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

template <typename Fn>
inline void parallel_for(std::size_t count, unsigned max_threads, Fn&& fn) {
  const unsigned threads =
      static_cast<unsigned>(std::min<std::size_t>(resolve_threads(max_threads), count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t]() {
      for (std::size_t i = t; i < count; i += threads) fn(i);
    });
  for (auto& th : pool) th.join();
}

} // namespace detail

// Metrics per (PM × RH) bin, per unit and per group. Units bin on the
// reference concentration by default (BinBy::sensor reproduces the
// sensor-axis view); group cells always bin on the reference so one period
// lands in one bin for the whole group. Entries with fewer than min_hours
// hours are excluded and listed.
inline BinnedReport binned_metrics(const AlignedPanel& panel,
                                   const DeploymentConfig& config,
                                   double pm_width, double rh_width,
                                   std::size_t min_hours,
                                   BinBy bin_by = BinBy::reference,
                                   unsigned max_threads = 0) {
  if (panel.interval != Interval::hourly)
    throw ValidationError("binned_metrics expects an hourly panel");
  if (panel.humidity.populated_count() == 0)
    throw ValidationError("binned_metrics: humidity column has no data");

  BinnedReport report;
  report.pm_width = pm_width;
  report.rh_width = rh_width;
  report.min_hours = min_hours;

  const auto& ref = panel.column(config.reference_id);
  const auto units = config.unit_ids();

  struct UnitAcc {
    std::map<BinKey, PairedSeries> by_bin;
  };
  std::vector<UnitAcc> unit_acc(units.size());
  for (std::size_t u = 0; u < units.size(); ++u) {
    const auto& col = panel.column(units[u]);
    for (std::size_t i = 0; i < panel.size(); ++i) {
      if (!ref.values[i] || !col.values[i] || !panel.humidity.values[i])
        continue;
      const double pm_for_bin =
          bin_by == BinBy::reference ? *ref.values[i] : *col.values[i];
      const BinKey key =
          assign_bin(pm_for_bin, *panel.humidity.values[i], pm_width, rh_width);
      auto& p = unit_acc[u].by_bin[key];
      p.x.push_back(*ref.values[i]);
      p.y.push_back(*col.values[i]);
      ++report.total_pairs;
    }
  }

  // Group cells: periods where the reference, RH, and every group unit
  // report, binned on the reference concentration.
  struct GroupAcc {
    std::map<BinKey, std::vector<std::size_t>> periods_by_bin;
  };
  std::vector<GroupAcc> group_acc(config.groups.size());
  for (std::size_t g = 0; g < config.groups.size(); ++g) {
    std::vector<const PanelColumn*> cols;
    for (const auto& id : config.groups[g].second)
      cols.push_back(&panel.column(id));
    for (std::size_t i = 0; i < panel.size(); ++i) {
      if (!ref.values[i] || !panel.humidity.values[i]) continue;
      bool all = true;
      for (const auto* c : cols) all = all && c->values[i].has_value();
      if (!all) continue;
      const BinKey key =
          assign_bin(*ref.values[i], *panel.humidity.values[i], pm_width, rh_width);
      group_acc[g].periods_by_bin[key].push_back(i);
    }
  }

  std::map<BinKey, BinnedCell> cells;
  auto cell_of = [&](const BinKey& key) -> BinnedCell& {
    auto [it, inserted] = cells.try_emplace(key);
    if (inserted) it->second.key = key;
    return it->second;
  };

  // Assemble the deterministic work list, then evaluate bins in parallel.
  struct UnitJob {
    std::size_t unit;
    const BinKey* key;
    const PairedSeries* pairs;
    std::optional<MetricSet> result;
  };
  std::vector<UnitJob> jobs;
  for (std::size_t u = 0; u < units.size(); ++u)
    for (const auto& [key, pairs] : unit_acc[u].by_bin) {
      if (pairs.n() < min_hours) {
        report.excluded.push_back({key, units[u], pairs.n(),
                                   "below min-hours (" +
                                       std::to_string(pairs.n()) + " < " +
                                       std::to_string(min_hours) + ")"});
        continue;
      }
      jobs.push_back({u, &key, &pairs, std::nullopt});
    }
  detail::parallel_for(jobs.size(), max_threads, [&](std::size_t j) {
    jobs[j].result =
        compute_metrics(*jobs[j].pairs, jobs[j].pairs->x, kBinRegressionMinPairs);
  });
  for (auto& job : jobs)
    cell_of(*job.key).units.push_back(
        {units[job.unit], job.pairs->n(), std::move(*job.result)});

  for (std::size_t g = 0; g < config.groups.size(); ++g) {
    const auto& [gname, gunits] = config.groups[g];
    for (const auto& [key, periods] : group_acc[g].periods_by_bin) {
      if (periods.size() < min_hours) {
        report.excluded.push_back({key, gname, periods.size(),
                                   "below min-hours (" +
                                       std::to_string(periods.size()) + " < " +
                                       std::to_string(min_hours) + ")"});
        continue;
      }
      // Restrict the panel view to this bin's periods.
      AlignedPanel slice;
      slice.interval = panel.interval;
      slice.step_seconds = panel.step_seconds;
      slice.device_ids = panel.device_ids;
      slice.columns.resize(panel.columns.size());
      for (std::size_t c = 0; c < panel.columns.size(); ++c) {
        auto& col = slice.columns[c];
        col.values.reserve(periods.size());
        for (std::size_t i : periods) {
          col.values.push_back(panel.columns[c].values[i]);
          col.coverage.push_back(panel.columns[c].coverage[i]);
        }
      }
      for (std::size_t i : periods) slice.grid.push_back(panel.grid[i]);
      GroupMetricSet gm = group_metrics(slice, gunits, config.reference_id);
      cell_of(key).groups.push_back({gname, periods.size(), std::move(gm)});
    }
  }

  // Sort unit entries into config order inside each cell.
  auto unit_rank = [&](const std::string& id) {
    return std::find(units.begin(), units.end(), id) - units.begin();
  };
  report.bins.reserve(cells.size());
  for (auto& [key, cell] : cells) {
    std::sort(cell.units.begin(), cell.units.end(),
              [&](const auto& a, const auto& b) {
                return unit_rank(a.device_id) < unit_rank(b.device_id);
              });
    report.bins.push_back(std::move(cell));
  }
  std::sort(report.excluded.begin(), report.excluded.end(),
            [](const ExcludedBin& a, const ExcludedBin& b) {
              return std::tie(a.key.pm_lo, a.key.rh_lo, a.subject) <
                     std::tie(b.key.pm_lo, b.key.rh_lo, b.subject);
            });
  return report;
}

struct DistributionCell {
  BinKey key;
  std::size_t count = 0;
  double percent_within_pm_bin = 0.0;
};

// Measurement counts stacked by RH level, 10 µg/m³ PM bins by default
// (the distribution-plot convention rather than the metric-bin one).
inline std::vector<DistributionCell> data_distribution(
    const AlignedPanel& panel, std::string_view device_id,
    double pm_width = 10.0, double rh_width = 10.0) {
  const auto& col = panel.column(device_id);
  if (panel.humidity.populated_count() == 0)
    throw ValidationError("data_distribution: humidity column has no data");
  std::map<BinKey, std::size_t> counts;
  std::map<double, std::size_t> pm_totals;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    if (!col.values[i] || !panel.humidity.values[i]) continue;
    const BinKey key =
        assign_bin(*col.values[i], *panel.humidity.values[i], pm_width, rh_width);
    ++counts[key];
    ++pm_totals[key.pm_lo];
  }
  std::vector<DistributionCell> out;
  out.reserve(counts.size());
  for (const auto& [key, count] : counts)
    out.push_back({key, count,
                   100.0 * static_cast<double>(count) /
                       static_cast<double>(pm_totals[key.pm_lo])});
  return out;
}

struct DiurnalRow {
  int hour = 0; // local hour of day
  std::vector<std::optional<double>> mae_by_unit;   // config unit order
  std::vector<std::optional<double>> pm25_by_device; // panel device order
  std::optional<double> temperature;
  std::optional<double> humidity;
};

// Hour-of-day profile in local time: MAE against the reference per unit,
// plus mean PM2.5 / temperature / RH. Always 24 rows.
inline std::vector<DiurnalRow> diurnal_profile(const AlignedPanel& panel,
                                               const DeploymentConfig& config) {
  if (panel.interval != Interval::hourly)
    throw ValidationError("diurnal_profile expects an hourly panel");
  const auto units = config.unit_ids();
  const auto& ref = panel.column(config.reference_id);

  struct Acc {
    CompensatedSum sum;
    std::size_t n = 0;
    void add(double v) {
      sum.add(v);
      ++n;
    }
    std::optional<double> mean() const {
      if (n == 0) return std::nullopt;
      return sum.value() / static_cast<double>(n);
    }
  };
  std::vector<std::vector<Acc>> mae_acc(24, std::vector<Acc>(units.size()));
  std::vector<std::vector<Acc>> pm_acc(24, std::vector<Acc>(panel.device_ids.size()));
  std::vector<Acc> temp_acc(24), rh_acc(24);

  for (std::size_t i = 0; i < panel.size(); ++i) {
    const int h = timeutil::local_hour_of_day(panel.grid[i],
                                              config.timezone_offset_minutes);
    for (std::size_t d = 0; d < panel.device_ids.size(); ++d)
      if (panel.columns[d].values[i]) pm_acc[h][d].add(*panel.columns[d].values[i]);
    for (std::size_t u = 0; u < units.size(); ++u) {
      const auto& col = panel.column(units[u]);
      if (ref.values[i] && col.values[i])
        mae_acc[h][u].add(std::abs(*col.values[i] - *ref.values[i]));
    }
    if (panel.temperature.values[i]) temp_acc[h].add(*panel.temperature.values[i]);
    if (panel.humidity.values[i]) rh_acc[h].add(*panel.humidity.values[i]);
  }

  std::vector<DiurnalRow> rows(24);
  for (int h = 0; h < 24; ++h) {
    rows[h].hour = h;
    for (std::size_t u = 0; u < units.size(); ++u)
      rows[h].mae_by_unit.push_back(mae_acc[h][u].mean());
    for (std::size_t d = 0; d < panel.device_ids.size(); ++d)
      rows[h].pm25_by_device.push_back(pm_acc[h][d].mean());
    rows[h].temperature = temp_acc[h].mean();
    rows[h].humidity = rh_acc[h].mean();
  }
  return rows;
}

struct MonthlyRow {
  std::string month; // "YYYY-MM" in local time
  std::vector<std::optional<double>> r2_by_unit; // config unit order
  std::optional<double> mean_reference_pm25;
  std::optional<double> mean_humidity;
  std::optional<double> mean_temperature;
};

// Month-wise R² per unit plus monthly mean reference PM2.5 / RH / temperature.
// Months with no co-populated data are omitted.
inline std::vector<MonthlyRow> monthly_summary(const AlignedPanel& panel,
                                               const DeploymentConfig& config) {
  if (panel.interval != Interval::hourly)
    throw ValidationError("monthly_summary expects an hourly panel");
  const auto units = config.unit_ids();
  const auto& ref = panel.column(config.reference_id);

  struct MonthAcc {
    std::vector<PairedSeries> pairs; // per unit
    CompensatedSum ref_sum, rh_sum, temp_sum;
    std::size_t ref_n = 0, rh_n = 0, temp_n = 0;
  };
  std::map<std::string, MonthAcc> months;

  for (std::size_t i = 0; i < panel.size(); ++i) {
    const std::string key = timeutil::local_month_key(
        panel.grid[i], config.timezone_offset_minutes);
    auto [it, inserted] = months.try_emplace(key);
    MonthAcc& acc = it->second;
    if (inserted) acc.pairs.resize(units.size());
    if (ref.values[i]) {
      acc.ref_sum.add(*ref.values[i]);
      ++acc.ref_n;
    }
    if (panel.humidity.values[i]) {
      acc.rh_sum.add(*panel.humidity.values[i]);
      ++acc.rh_n;
    }
    if (panel.temperature.values[i]) {
      acc.temp_sum.add(*panel.temperature.values[i]);
      ++acc.temp_n;
    }
    for (std::size_t u = 0; u < units.size(); ++u) {
      const auto& col = panel.column(units[u]);
      if (ref.values[i] && col.values[i]) {
        acc.pairs[u].x.push_back(*ref.values[i]);
        acc.pairs[u].y.push_back(*col.values[i]);
      }
    }
  }

  std::vector<MonthlyRow> rows;
  for (auto& [key, acc] : months) {
    std::size_t co_populated = 0;
    for (const auto& p : acc.pairs) co_populated += p.n();
    if (co_populated == 0) continue;
    MonthlyRow row;
    row.month = key;
    for (auto& p : acc.pairs) {
      std::optional<double> r2;
      if (p.n() >= kBinRegressionMinPairs) {
        try {
          r2 = r_squared(p);
        } catch (const DegenerateInputError&) {
        }
      }
      row.r2_by_unit.push_back(r2);
    }
    if (acc.ref_n > 0)
      row.mean_reference_pm25 =
          acc.ref_sum.value() / static_cast<double>(acc.ref_n);
    if (acc.rh_n > 0)
      row.mean_humidity = acc.rh_sum.value() / static_cast<double>(acc.rh_n);
    if (acc.temp_n > 0)
      row.mean_temperature =
          acc.temp_sum.value() / static_cast<double>(acc.temp_n);
    rows.push_back(std::move(row));
  }
  return rows;
}

} // namespace colloc

#endif
