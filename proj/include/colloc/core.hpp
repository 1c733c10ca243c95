#ifndef COLLOC_CORE_HPP
#define COLLOC_CORE_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "colloc/csv.hpp"
#include "colloc/errors.hpp"
#include "colloc/numeric.hpp"
#include "colloc/time.hpp"

// Ingestion, validation, time alignment, averaging, and quality screens for
// collocated PM2.5 time series. Everything built here is immutable afterward
// and safe to share read-only across threads.

namespace colloc {

struct SampleRecord {
  std::int64_t timestamp = 0; // seconds since epoch, UTC
  std::string device_id;
  double pm25 = 0.0;                  // µg/m³
  std::optional<double> temperature;  // °C
  std::optional<double> humidity;     // % RH
};

struct DeploymentConfig {
  std::string reference_id;
  // Sensor model name -> ordered unit ids. Order is preserved everywhere.
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;
  int averaging_base_minutes = 15;
  int timezone_offset_minutes = 0;

  std::vector<std::string> unit_ids() const {
    std::vector<std::string> out;
    for (const auto& [name, units] : groups)
      out.insert(out.end(), units.begin(), units.end());
    return out;
  }

  bool knows_device(std::string_view id) const {
    if (id == reference_id) return true;
    for (const auto& [name, units] : groups)
      for (const auto& u : units)
        if (u == id) return true;
    return false;
  }

  void validate() const {
    if (reference_id.empty())
      throw ValidationError("config: reference_id is empty");
    if (averaging_base_minutes <= 0)
      throw ValidationError("config: averaging_base_minutes must be positive");
    std::set<std::string> seen;
    for (const auto& [name, units] : groups) {
      if (units.empty())
        throw ValidationError("config: group '" + name + "' is empty");
      for (const auto& u : units) {
        if (u == reference_id)
          throw ValidationError("config: reference '" + reference_id +
                                "' listed in group '" + name + "'");
        if (!seen.insert(u).second)
          throw ValidationError("config: duplicate unit id '" + u + "'");
      }
    }
  }
};

enum class Interval { hourly, daily };

inline std::string_view to_string(Interval i) {
  return i == Interval::hourly ? "hourly" : "daily";
}

inline Interval interval_from_string(std::string_view s) {
  if (s == "hourly") return Interval::hourly;
  if (s == "daily") return Interval::daily;
  throw ValidationError("unknown interval '" + std::string(s) + "'");
}

struct PanelColumn {
  std::vector<std::optional<double>> values;
  std::vector<std::uint32_t> coverage; // contributing base samples per cell

  std::size_t populated_count() const {
    std::size_t n = 0;
    for (const auto& v : values) n += v.has_value();
    return n;
  }
};

// Time-gridded matrix of averaged series. The grid is strictly increasing
// with a constant step; an unpopulated cell is an explicit gap.
struct AlignedPanel {
  Interval interval = Interval::hourly;
  std::int64_t step_seconds = timeutil::kSecondsPerHour;
  std::vector<std::int64_t> grid; // period start instants
  std::vector<std::string> device_ids; // reference first, then units in config order
  std::vector<PanelColumn> columns;    // parallel to device_ids
  PanelColumn temperature; // reference met columns ride along the grid
  PanelColumn humidity;

  std::size_t size() const { return grid.size(); }

  std::size_t device_index(std::string_view id) const {
    for (std::size_t i = 0; i < device_ids.size(); ++i)
      if (device_ids[i] == id) return i;
    throw ValidationError("unknown device '" + std::string(id) + "'");
  }

  bool has_device(std::string_view id) const {
    return std::find(device_ids.begin(), device_ids.end(), id) !=
           device_ids.end();
  }

  const PanelColumn& column(std::string_view id) const {
    return columns[device_index(id)];
  }
};

struct IngestDiagnostic {
  std::size_t line_number = 0; // 1-based, header is line 1
  std::string reason;
};

struct IngestResult {
  std::vector<SampleRecord> records;
  std::vector<IngestDiagnostic> diagnostics;
  std::size_t total_data_rows = 0; // records.size() + diagnostics.size()
};

inline constexpr std::string_view kIngestHeader =
    "timestamp,device_id,pm25,temperature,humidity";

inline constexpr double kTemperatureMin = -40.0;
inline constexpr double kTemperatureMax = 60.0;

namespace detail {

inline std::optional<SampleRecord> parse_sample_row(
    std::string_view line, const DeploymentConfig& config, std::string& reason) {
  const auto fields = csv::split(line);
  if (fields.size() != 5) {
    reason = "expected 5 fields, got " + std::to_string(fields.size());
    return std::nullopt;
  }
  SampleRecord rec;
  try {
    rec.timestamp = timeutil::parse_iso8601(fields[0]);
  } catch (const ValidationError&) {
    reason = "bad timestamp '" + std::string(fields[0]) + "'";
    return std::nullopt;
  }
  rec.device_id = std::string(fields[1]);
  if (rec.device_id.empty()) {
    reason = "empty device_id";
    return std::nullopt;
  }
  if (!config.knows_device(rec.device_id)) {
    reason = "unknown device_id '" + rec.device_id + "'";
    return std::nullopt;
  }
  const auto pm = csv::parse_double(fields[2]);
  if (!pm) {
    reason = "bad pm25 '" + std::string(fields[2]) + "'";
    return std::nullopt;
  }
  if (*pm < 0.0) {
    reason = "pm25 out of range (negative): " + std::string(fields[2]);
    return std::nullopt;
  }
  rec.pm25 = *pm;
  if (!fields[3].empty()) {
    const auto t = csv::parse_double(fields[3]);
    if (!t) {
      reason = "bad temperature '" + std::string(fields[3]) + "'";
      return std::nullopt;
    }
    if (*t < kTemperatureMin || *t > kTemperatureMax) {
      reason = "temperature out of range [-40, 60]: " + std::string(fields[3]);
      return std::nullopt;
    }
    rec.temperature = *t;
  }
  if (!fields[4].empty()) {
    const auto h = csv::parse_double(fields[4]);
    if (!h) {
      reason = "bad humidity '" + std::string(fields[4]) + "'";
      return std::nullopt;
    }
    if (*h < 0.0 || *h > 100.0) {
      reason = "humidity out of range [0, 100]: " + std::string(fields[4]);
      return std::nullopt;
    }
    rec.humidity = *h;
  }
  return rec;
}

} // namespace detail

// Reads the collocation CSV. Bad rows are rejected with a line diagnostic,
// never silently clamped, and never abort the run.
inline IngestResult ingest_csv(std::istream& in, const DeploymentConfig& config) {
  config.validate();
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("input is empty (missing header)");
  if (csv::trim_cr(line) != kIngestHeader)
    throw ValidationError("malformed header: expected '" +
                          std::string(kIngestHeader) + "'");
  IngestResult result;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string_view row = csv::trim_cr(line);
    if (row.empty()) continue;
    ++result.total_data_rows;
    std::string reason;
    if (auto rec = detail::parse_sample_row(row, config, reason))
      result.records.push_back(std::move(*rec));
    else
      result.diagnostics.push_back({line_number, std::move(reason)});
  }
  if (result.records.empty())
    throw EmptyResultError("no valid records in input");
  return result;
}

inline IngestResult ingest_csv(const std::string& path,
                               const DeploymentConfig& config) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file '" + path + "'");
  return ingest_csv(in, config);
}

namespace detail {

struct CellAccumulator {
  CompensatedSum sum;
  std::uint32_t count = 0;
  void add(double v) {
    sum.add(v);
    ++count;
  }
};

// Averages per-bucket accumulators onto a grid, applying the completeness
// rule: a cell is populated only if at least `completeness` of the expected
// sample count arrived.
inline PanelColumn to_column(const std::map<std::int64_t, CellAccumulator>& acc,
                             std::int64_t first_bucket, std::size_t n_cells,
                             double expected_per_cell, double completeness) {
  PanelColumn col;
  col.values.assign(n_cells, std::nullopt);
  col.coverage.assign(n_cells, 0);
  const double required = completeness * expected_per_cell;
  for (const auto& [bucket, cell] : acc) {
    const std::size_t idx = static_cast<std::size_t>(bucket - first_bucket);
    col.coverage[idx] = cell.count;
    if (static_cast<double>(cell.count) + 1e-9 >= required)
      col.values[idx] = cell.sum.value() / cell.count;
  }
  return col;
}

} // namespace detail

// Default completeness requirement: >= 75% of expected base samples
// (3 of 4 for hourly cells from 15-minute data, 18 of 24 hourly cells for
// daily cells).
inline constexpr double kDefaultCompleteness = 0.75;

// Aggregates an hourly panel into local-day averages. Daily periods run
// midnight-to-midnight in the configured fixed local offset and are labeled
// by their UTC start instant.
inline AlignedPanel aggregate_daily(const AlignedPanel& hourly,
                                    const DeploymentConfig& config,
                                    double completeness = kDefaultCompleteness) {
  if (hourly.interval != Interval::hourly)
    throw ValidationError("aggregate_daily expects an hourly panel");
  if (hourly.grid.empty()) throw EmptyResultError("empty panel");

  const int off = config.timezone_offset_minutes;
  // The daily grid spans the local days that received populated hourly
  // cells; a stray straddling sample must not dilute uptime with empty days.
  bool any_cell = false;
  std::int64_t first_day = 0, last_day = 0;
  auto widen = [&](const PanelColumn& col) {
    for (std::size_t i = 0; i < hourly.grid.size(); ++i) {
      if (!col.values[i]) continue;
      const std::int64_t day = timeutil::local_day_index(hourly.grid[i], off);
      if (!any_cell) {
        first_day = last_day = day;
        any_cell = true;
      } else {
        first_day = std::min(first_day, day);
        last_day = std::max(last_day, day);
      }
    }
  };
  for (const auto& col : hourly.columns) widen(col);
  widen(hourly.temperature);
  widen(hourly.humidity);
  if (!any_cell)
    throw EmptyResultError("no populated hourly cells to aggregate");
  const std::size_t n_days = static_cast<std::size_t>(last_day - first_day + 1);

  AlignedPanel daily;
  daily.interval = Interval::daily;
  daily.step_seconds = timeutil::kSecondsPerDay;
  daily.grid.resize(n_days);
  for (std::size_t d = 0; d < n_days; ++d)
    daily.grid[d] = timeutil::day_start_utc(first_day + static_cast<std::int64_t>(d), off);
  daily.device_ids = hourly.device_ids;

  auto reduce = [&](const PanelColumn& src) {
    std::map<std::int64_t, detail::CellAccumulator> acc;
    for (std::size_t i = 0; i < hourly.grid.size(); ++i)
      if (src.values[i])
        acc[timeutil::local_day_index(hourly.grid[i], off)].add(*src.values[i]);
    return detail::to_column(acc, first_day, n_days, 24.0, completeness);
  };

  daily.columns.reserve(hourly.columns.size());
  for (const auto& col : hourly.columns) daily.columns.push_back(reduce(col));
  daily.temperature = reduce(hourly.temperature);
  daily.humidity = reduce(hourly.humidity);
  return daily;
}

// Builds the aligned panel at the requested interval. Hourly cells average
// the base samples of their [HH:00, HH+1:00) period; daily panels are formed
// from the hourly one. Throws EmptyResultError when the reference and the
// sensors never overlap.
inline AlignedPanel align_and_average(const std::vector<SampleRecord>& records,
                                      const DeploymentConfig& config,
                                      Interval interval,
                                      double completeness = kDefaultCompleteness) {
  config.validate();
  if (records.empty()) throw EmptyResultError("no records to align");
  if (completeness < 0.0 || completeness > 1.0)
    throw ValidationError("completeness must be within [0, 1]");

  std::vector<std::string> ids{config.reference_id};
  for (const auto& u : config.unit_ids()) ids.push_back(u);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);

  std::vector<std::map<std::int64_t, detail::CellAccumulator>> pm(ids.size());
  std::map<std::int64_t, detail::CellAccumulator> temp, hum;

  std::int64_t first_hour = 0, last_hour = 0;
  bool any = false;
  for (const auto& rec : records) {
    const auto it = index.find(rec.device_id);
    if (it == index.end())
      throw ValidationError("record from device '" + rec.device_id +
                            "' not in config");
    const std::int64_t hour = timeutil::floor_div(rec.timestamp,
                                                  timeutil::kSecondsPerHour);
    if (!any) {
      first_hour = last_hour = hour;
      any = true;
    } else {
      first_hour = std::min(first_hour, hour);
      last_hour = std::max(last_hour, hour);
    }
    pm[it->second][hour].add(rec.pm25);
    if (rec.device_id == config.reference_id) {
      if (rec.temperature) temp[hour].add(*rec.temperature);
      if (rec.humidity) hum[hour].add(*rec.humidity);
    }
  }

  const std::size_t n_hours = static_cast<std::size_t>(last_hour - first_hour + 1);
  const double expected = 60.0 / static_cast<double>(config.averaging_base_minutes);

  AlignedPanel hourly;
  hourly.interval = Interval::hourly;
  hourly.step_seconds = timeutil::kSecondsPerHour;
  hourly.grid.resize(n_hours);
  for (std::size_t i = 0; i < n_hours; ++i)
    hourly.grid[i] = (first_hour + static_cast<std::int64_t>(i)) *
                     timeutil::kSecondsPerHour;
  hourly.device_ids = ids;
  hourly.columns.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    hourly.columns.push_back(
        detail::to_column(pm[i], first_hour, n_hours, expected, completeness));
  hourly.temperature =
      detail::to_column(temp, first_hour, n_hours, expected, completeness);
  hourly.humidity =
      detail::to_column(hum, first_hour, n_hours, expected, completeness);

  // Overlap is judged on the hourly grid: a sensor that shares hours with
  // the reference overlaps in time even if a coarser daily cell later fails
  // its completeness rule.
  if (!config.groups.empty()) {
    const auto& ref = hourly.columns[0];
    bool overlap = false;
    for (std::size_t i = 0; i < hourly.size() && !overlap; ++i) {
      if (!ref.values[i]) continue;
      for (std::size_t c = 1; c < hourly.columns.size(); ++c)
        if (hourly.columns[c].values[i]) {
          overlap = true;
          break;
        }
    }
    if (!overlap)
      throw EmptyResultError(
          "no overlapping periods between reference and any sensor");
  }
  return interval == Interval::hourly
             ? std::move(hourly)
             : aggregate_daily(hourly, config, completeness);
}

// Populated cells over the panel's full span, in [0, 1].
inline double uptime(const AlignedPanel& panel, std::string_view device_id) {
  const auto& col = panel.column(device_id);
  if (panel.size() == 0) throw EmptyResultError("empty panel");
  return static_cast<double>(col.populated_count()) /
         static_cast<double>(panel.size());
}

struct QualityFlag {
  std::string device_id;
  enum class Kind { saturation_plateau, group_drift, gap } kind;
  std::int64_t window_start = 0;
  std::int64_t window_end = 0; // inclusive of the last period's span
  std::string detail;
};

inline std::string_view to_string(QualityFlag::Kind k) {
  switch (k) {
    case QualityFlag::Kind::saturation_plateau: return "saturation_plateau";
    case QualityFlag::Kind::group_drift: return "group_drift";
    case QualityFlag::Kind::gap: return "gap";
  }
  return "?";
}

// Flags every maximal run of >= min_run consecutive populated cells stuck at
// the device's observed maximum (or at an explicit ceiling when the sensing
// limit is known, e.g. a 950 µg/m³ clip).
inline std::vector<QualityFlag> detect_saturation(
    const AlignedPanel& panel, std::string_view device_id, std::size_t min_run,
    std::optional<double> ceiling = std::nullopt) {
  if (min_run < 2) throw ValidationError("min_run must be >= 2");
  const auto& col = panel.column(device_id);

  double target = 0.0;
  if (ceiling) {
    target = *ceiling;
  } else {
    bool found = false;
    for (const auto& v : col.values)
      if (v && (!found || *v > target)) {
        target = *v;
        found = true;
      }
    if (!found) return {};
  }

  std::vector<QualityFlag> flags;
  std::size_t run_start = 0, run_len = 0;
  auto close_run = [&](std::size_t end_idx) {
    if (run_len >= min_run) {
      QualityFlag f;
      f.device_id = std::string(device_id);
      f.kind = QualityFlag::Kind::saturation_plateau;
      f.window_start = panel.grid[run_start];
      f.window_end = panel.grid[end_idx - 1] + panel.step_seconds;
      f.detail = "plateau at " + csv::format_number(target, 4) + " over " +
                 std::to_string(run_len) + " periods";
      flags.push_back(std::move(f));
    }
    run_len = 0;
  };
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const bool hit = col.values[i] && *col.values[i] == target;
    if (hit) {
      if (run_len == 0) run_start = i;
      ++run_len;
    } else if (run_len > 0) {
      close_run(i);
    }
  }
  if (run_len > 0) close_run(panel.size());
  return flags;
}

// Flags a unit whose windowed mean falls below ratio_threshold times the
// mean of its siblings' means, using only periods where the whole group is
// populated. Overlapping flagged windows are merged per unit.
inline std::vector<QualityFlag> group_drift_screen(
    const AlignedPanel& panel, const std::vector<std::string>& group,
    std::size_t window_periods, double ratio_threshold) {
  if (group.size() < 2)
    throw ValidationError("group_drift_screen needs a group of >= 2 units");
  if (window_periods < 1) throw ValidationError("window_periods must be >= 1");

  std::vector<const PanelColumn*> cols;
  cols.reserve(group.size());
  for (const auto& id : group) cols.push_back(&panel.column(id));

  struct Open {
    bool active = false;
    std::size_t start = 0, end = 0; // window index range [start, end]
    double worst_ratio = 0.0;
  };
  std::vector<QualityFlag> flags;
  if (panel.size() < window_periods) return flags;

  const std::size_t n_windows = panel.size() - window_periods + 1;
  for (std::size_t u = 0; u < group.size(); ++u) {
    Open open;
    auto close = [&]() {
      if (!open.active) return;
      QualityFlag f;
      f.device_id = group[u];
      f.kind = QualityFlag::Kind::group_drift;
      f.window_start = panel.grid[open.start];
      f.window_end = panel.grid[open.end + window_periods - 1] + panel.step_seconds;
      f.detail = "mean ratio to siblings " +
                 csv::format_number(open.worst_ratio, 4) + " below threshold " +
                 csv::format_number(ratio_threshold, 4);
      flags.push_back(std::move(f));
      open.active = false;
    };
    for (std::size_t w = 0; w < n_windows; ++w) {
      CompensatedSum unit_sum;
      std::vector<CompensatedSum> sib_sums(group.size());
      std::size_t n_co = 0;
      for (std::size_t i = w; i < w + window_periods; ++i) {
        bool all = true;
        for (const auto* c : cols)
          if (!c->values[i]) {
            all = false;
            break;
          }
        if (!all) continue;
        ++n_co;
        unit_sum.add(*cols[u]->values[i]);
        for (std::size_t s = 0; s < group.size(); ++s)
          if (s != u) sib_sums[s].add(*cols[s]->values[i]);
      }
      bool flagged = false;
      double ratio = 0.0;
      if (n_co > 0) {
        const double unit_mean = unit_sum.value() / static_cast<double>(n_co);
        CompensatedSum sib_of_means;
        for (std::size_t s = 0; s < group.size(); ++s)
          if (s != u) sib_of_means.add(sib_sums[s].value() / static_cast<double>(n_co));
        const double sib_mean =
            sib_of_means.value() / static_cast<double>(group.size() - 1);
        if (sib_mean > 0.0) {
          ratio = unit_mean / sib_mean;
          flagged = unit_mean < ratio_threshold * sib_mean;
        }
      }
      if (flagged) {
        if (open.active && w <= open.end + window_periods) {
          open.end = w;
          open.worst_ratio = std::min(open.worst_ratio, ratio);
        } else {
          close();
          open.active = true;
          open.start = open.end = w;
          open.worst_ratio = ratio;
        }
      }
    }
    close();
  }
  return flags;
}

// Maximal runs of unpopulated cells of length >= min_run.
inline std::vector<QualityFlag> detect_gaps(const AlignedPanel& panel,
                                            std::string_view device_id,
                                            std::size_t min_run = 1) {
  if (min_run < 1) throw ValidationError("min_run must be >= 1");
  const auto& col = panel.column(device_id);
  std::vector<QualityFlag> flags;
  std::size_t run_start = 0, run_len = 0;
  auto close = [&](std::size_t end_idx) {
    if (run_len >= min_run) {
      QualityFlag f;
      f.device_id = std::string(device_id);
      f.kind = QualityFlag::Kind::gap;
      f.window_start = panel.grid[run_start];
      f.window_end = panel.grid[end_idx - 1] + panel.step_seconds;
      f.detail = std::to_string(run_len) + " missing periods";
      flags.push_back(std::move(f));
    }
    run_len = 0;
  };
  for (std::size_t i = 0; i < panel.size(); ++i) {
    if (!col.values[i]) {
      if (run_len == 0) run_start = i;
      ++run_len;
    } else if (run_len > 0) {
      close(i);
    }
  }
  if (run_len > 0) close(panel.size());
  return flags;
}

// One row per grid period, one column per device, empty string for gaps.
inline void export_panel_csv(const AlignedPanel& panel, std::ostream& out,
                             int precision = 4) {
  out << "timestamp";
  for (const auto& id : panel.device_ids) out << ',' << id;
  out << ",temperature,humidity\n";
  for (std::size_t i = 0; i < panel.size(); ++i) {
    out << timeutil::format_iso8601(panel.grid[i]);
    for (const auto& col : panel.columns)
      out << ',' << csv::format_optional(col.values[i], precision);
    out << ',' << csv::format_optional(panel.temperature.values[i], precision);
    out << ',' << csv::format_optional(panel.humidity.values[i], precision);
    out << '\n';
  }
}

} // namespace colloc

#endif
