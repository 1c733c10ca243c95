#ifndef COLLOC_CATALOG_HPP
#define COLLOC_CATALOG_HPP

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "colloc/csv.hpp"
#include "colloc/errors.hpp"

// Sensor-selection screening over a catalog of candidate PM sensors.

namespace colloc {

enum class LightSource { laser, led, infrared_led, unknown };

inline std::string_view to_string(LightSource s) {
  switch (s) {
    case LightSource::laser: return "laser";
    case LightSource::led: return "led";
    case LightSource::infrared_led: return "infrared_led";
    case LightSource::unknown: return "unknown";
  }
  return "?";
}

inline LightSource light_source_from_string(std::string_view s) {
  if (s == "laser") return LightSource::laser;
  if (s == "led") return LightSource::led;
  if (s == "infrared_led") return LightSource::infrared_led;
  if (s == "unknown" || s.empty() || s == "NA") return LightSource::unknown;
  throw ValidationError("unknown light source '" + std::string(s) + "'");
}

struct SensorSpec {
  std::string manufacturer;
  std::string model;
  std::optional<double> pm_range_max; // µg/m³, absent when the sheet says NA
  std::optional<double> rh_range_max; // % upper operating limit
  LightSource light_source = LightSource::unknown;
  bool has_fan = false;
  double price_usd = 0.0;
};

// Individually toggleable criteria; an absent datasheet field fails the
// corresponding enabled criterion (conservative reading of "NA").
struct SelectionCriteria {
  bool require_fan = true;
  bool require_laser = true;
  std::optional<double> min_pm_range = 1000.0; // µg/m³
  std::optional<double> min_rh_upper = 90.0;   // %
  std::optional<double> max_price_usd;         // off by default

  static SelectionCriteria none() {
    SelectionCriteria c;
    c.require_fan = false;
    c.require_laser = false;
    c.min_pm_range.reset();
    c.min_rh_upper.reset();
    c.max_price_usd.reset();
    return c;
  }
};

struct RejectedSensor {
  SensorSpec spec;
  std::vector<std::string> failed_criteria; // every failed criterion listed
};

struct SelectionResult {
  std::vector<SensorSpec> selected;
  std::vector<RejectedSensor> rejected;
};

// Every enabled criterion the sensor fails, in a fixed order.
inline std::vector<std::string> failed_criteria(const SensorSpec& s,
                                                const SelectionCriteria& criteria) {
  std::vector<std::string> failed;
  if (criteria.require_fan && !s.has_fan) failed.push_back("no fan");
  if (criteria.require_laser && s.light_source != LightSource::laser)
    failed.push_back("light source is not a laser");
  if (criteria.min_pm_range) {
    if (!s.pm_range_max)
      failed.push_back("PM range not stated");
    else if (*s.pm_range_max < *criteria.min_pm_range)
      failed.push_back("PM range below " +
                       csv::format_number(*criteria.min_pm_range, 0));
  }
  if (criteria.min_rh_upper) {
    if (!s.rh_range_max)
      failed.push_back("RH range not stated");
    else if (*s.rh_range_max < *criteria.min_rh_upper)
      failed.push_back("RH upper limit below " +
                       csv::format_number(*criteria.min_rh_upper, 0) + "%");
  }
  if (criteria.max_price_usd && s.price_usd > *criteria.max_price_usd)
    failed.push_back("price above " +
                     csv::format_number(*criteria.max_price_usd, 0) + " USD");
  return failed;
}

// A sensor is selected iff it satisfies every enabled criterion.
inline SelectionResult select_sensors(const std::vector<SensorSpec>& catalog,
                                      const SelectionCriteria& criteria) {
  if (catalog.empty()) throw ValidationError("select_sensors: empty catalog");
  SelectionResult result;
  for (const auto& s : catalog) {
    auto failed = failed_criteria(s, criteria);
    if (failed.empty())
      result.selected.push_back(s);
    else
      result.rejected.push_back({s, std::move(failed)});
  }
  return result;
}

inline constexpr std::string_view kCatalogHeader =
    "manufacturer,model,pm_range_max,rh_range_max,light_source,has_fan,price_usd";

inline std::vector<SensorSpec> parse_catalog_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || csv::trim_cr(line) != kCatalogHeader)
    throw ValidationError("catalog: malformed header, expected '" +
                          std::string(kCatalogHeader) + "'");
  std::vector<SensorSpec> catalog;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string_view row = csv::trim_cr(line);
    if (row.empty()) continue;
    const auto f = csv::split(row);
    if (f.size() != 7)
      throw ValidationError("catalog line " + std::to_string(line_number) +
                            ": expected 7 fields");
    auto opt_field = [&](std::string_view v) -> std::optional<double> {
      if (v.empty() || v == "NA") return std::nullopt;
      const auto d = csv::parse_double(v);
      if (!d)
        throw ValidationError("catalog line " + std::to_string(line_number) +
                              ": bad number '" + std::string(v) + "'");
      return d;
    };
    SensorSpec s;
    s.manufacturer = std::string(f[0]);
    s.model = std::string(f[1]);
    s.pm_range_max = opt_field(f[2]);
    s.rh_range_max = opt_field(f[3]);
    s.light_source = light_source_from_string(f[4]);
    if (f[5] == "yes" || f[5] == "true" || f[5] == "1")
      s.has_fan = true;
    else if (f[5] == "no" || f[5] == "false" || f[5] == "0")
      s.has_fan = false;
    else
      throw ValidationError("catalog line " + std::to_string(line_number) +
                            ": bad has_fan '" + std::string(f[5]) + "'");
    const auto price = opt_field(f[6]);
    if (!price)
      throw ValidationError("catalog line " + std::to_string(line_number) +
                            ": missing price");
    s.price_usd = *price;
    if (s.pm_range_max && !(*s.pm_range_max > 0.0))
      throw ValidationError("catalog line " + std::to_string(line_number) +
                            ": pm_range_max must be positive");
    if (s.rh_range_max && (!(*s.rh_range_max > 0.0) || *s.rh_range_max > 100.0))
      throw ValidationError("catalog line " + std::to_string(line_number) +
                            ": rh_range_max must be in (0, 100]");
    catalog.push_back(std::move(s));
  }
  return catalog;
}

// The catalog of commonly used low-cost PM sensors that ships with the tool
// (same content as data/sensor_catalog.csv).
inline std::vector<SensorSpec> bundled_catalog() {
  auto make = [](std::string mfr, std::string model, std::optional<double> pm,
                 std::optional<double> rh, LightSource src, bool fan,
                 double price) {
    SensorSpec s;
    s.manufacturer = std::move(mfr);
    s.model = std::move(model);
    s.pm_range_max = pm;
    s.rh_range_max = rh;
    s.light_source = src;
    s.has_fan = fan;
    s.price_usd = price;
    return s;
  };
  return {
      make("Plantower", "PMS7003", 1000, 99, LightSource::laser, true, 24),
      make("Sensirion", "SPS30", 1000, 95, LightSource::laser, true, 58),
      make("Honeywell", "HPMA115S0", 1000, 95, LightSource::laser, true, 72),
      make("Honeywell", "HPMA115C0-004", 1000, 99, LightSource::laser, true, 81),
      make("Shinyei", "PPD71", 500, 95, LightSource::led, false, 13.5),
      make("Alphasense", "OPC-N2", 10000, 95, LightSource::laser, true, 400),
      make("Alphasense", "OPC-N3", 10000, 95, LightSource::laser, true, 457),
      make("Sharp", "GP2Y101AU0F", 500, std::nullopt, LightSource::infrared_led,
           false, 3.5),
      make("Nova", "SDS011", 999, 70, LightSource::laser, true, 25),
      make("Omron", "B5W-LD0101", std::nullopt, std::nullopt, LightSource::led,
           false, 19),
      make("PurpleAir", "PA-II-SD", 1000, 100, LightSource::laser, true, 330),
  };
}

} // namespace colloc

#endif
