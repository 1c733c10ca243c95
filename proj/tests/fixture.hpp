#ifndef COLLOC_TESTS_FIXTURE_HPP
#define COLLOC_TESTS_FIXTURE_HPP

// Deterministic collocation fixture shared by the CLI tests and the
// acceptance suite: one reference, two groups, three days of 15-minute data
// with engineered gaps and one bad row.

#include <cmath>
#include <cstdio>
#include <string>

#include "colloc/time.hpp"
#include "oracles.hpp"

namespace fixture {

inline std::string config_json() {
  return R"({
  "reference_id": "bam",
  "groups": {
    "alpha": ["a1", "a2"],
    "beta": ["b1"]
  },
  "averaging_base_minutes": 15,
  "timezone_offset_minutes": 330
}
)";
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// 72 hours from 2021-11-01T00:00:00Z, 4 samples per hour.
inline std::string collocation_csv() {
  std::string out = "timestamp,device_id,pm25,temperature,humidity\n";
  oracle::Rng rng(2021);
  const std::int64_t t0 = colloc::timeutil::parse_iso8601("2021-11-01T00:00:00Z");
  for (int h = 0; h < 72; ++h) {
    const double local_hour = std::fmod(h + 5.5, 24.0);
    const double ref_base =
        80.0 + 30.0 * std::sin(2.0 * M_PI * (h % 24) / 24.0);
    const double rh = 55.0 + 30.0 * std::cos(2.0 * M_PI * (local_hour - 7.0) / 24.0);
    const double temp = 16.0 + 6.0 * std::sin(2.0 * M_PI * (local_hour - 14.0) / 24.0);
    for (int s = 0; s < 4; ++s) {
      const std::int64_t t = t0 + h * 3600 + s * 900;
      const std::string ts = colloc::timeutil::format_iso8601(t);
      const double ref = ref_base + 0.5 * s;
      // Reference row; hour 3 loses its met fields.
      out += ts + ",bam," + num(ref);
      if (h == 3)
        out += ",,\n";
      else
        out += "," + num(temp) + "," + num(rh) + "\n";
      // a1 goes dark for UTC hours 30..33.
      if (!(h >= 30 && h <= 33))
        out += ts + ",a1," + num(1.4 * ref + 10.0 + rng.normal(0.0, 3.0)) + ",,\n";
      // a2 drops below the completeness rule at hour 40.
      if (!(h == 40 && s >= 2))
        out += ts + ",a2," + num(1.5 * ref + 5.0 + rng.normal(0.0, 3.0)) + ",,\n";
      out += ts + ",b1," + num(0.9 * ref + rng.normal(0.0, 3.0)) + ",,\n";
    }
  }
  // One out-of-range row: rejected with a diagnostic, never averaged.
  out += "2021-11-03T23:59:00Z,bam,50,18,101\n";
  return out;
}

} // namespace fixture

#endif
