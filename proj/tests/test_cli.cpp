#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "colloc/csv.hpp"
#include "fixture.hpp"

namespace fs = std::filesystem;

namespace {

fs::path make_work_dir(const std::string& label) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() /
                       ("colloc_cli_" + label + "_" + std::to_string(::getpid()) +
                        "_" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(COLLOC_EVAL_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

struct Workspace {
  fs::path dir, input, config, log;
};

Workspace standard_workspace(const std::string& label) {
  Workspace w;
  w.dir = make_work_dir(label);
  w.input = w.dir / "input.csv";
  w.config = w.dir / "config.json";
  w.log = w.dir / "cli.log";
  write_file(w.input, fixture::collocation_csv());
  write_file(w.config, fixture::config_json());
  return w;
}

std::string golden(const std::string& name) {
  return read_file(fs::path(COLLOC_GOLDEN_DIR) / name);
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

} // namespace

TEST_CASE("evaluate writes the documented outputs and matches goldens") {
  const auto w = standard_workspace("evaluate");
  const auto out = w.dir / "out";
  const int rc = run_cli("evaluate --input " + w.input.string() + " --config " +
                             w.config.string() + " --avg hourly --out " +
                             out.string() + " --export-panel",
                         w.log);
  REQUIRE(rc == 0);
  for (const char* name : {"metrics_units.csv", "metrics_groups.csv",
                           "report.md", "report.json", "manifest.json",
                           "panel.csv"})
    CHECK(fs::exists(out / name));

  CHECK(read_file(out / "metrics_units.csv") == golden("evaluate_units.csv"));
  CHECK(read_file(out / "metrics_groups.csv") == golden("evaluate_groups.csv"));
  CHECK(read_file(out / "report.md") == golden("evaluate_report.md"));

  // Hourly grading is informational only.
  const auto rj = nlohmann::json::parse(read_file(out / "report.json"));
  CHECK(rj["normative"] == false);

  SECTION("reruns are byte-identical") {
    const auto out2 = w.dir / "out2";
    REQUIRE(run_cli("evaluate --input " + w.input.string() + " --config " +
                        w.config.string() + " --avg hourly --out " +
                        out2.string() + " --export-panel",
                    w.log) == 0);
    for (const char* name : {"metrics_units.csv", "metrics_groups.csv",
                             "report.md", "report.json", "panel.csv"})
      CHECK(read_file(out / name) == read_file(out2 / name));
  }

  SECTION("manifest lists every output file") {
    const auto manifest = nlohmann::json::parse(read_file(out / "manifest.json"));
    std::set<std::string> listed;
    for (const auto& o : manifest["outputs"]) listed.insert(o.get<std::string>());
    std::set<std::string> present;
    for (const auto& entry : fs::directory_iterator(out))
      present.insert(entry.path().filename().string());
    CHECK(listed == present);
    CHECK(manifest["inputs"].size() == 2);
    CHECK(manifest["inputs"][0].contains("fnv1a64"));
  }
}

TEST_CASE("evaluate daily on the fixture") {
  const auto w = standard_workspace("evaluate_daily");
  const auto out = w.dir / "out";
  REQUIRE(run_cli("evaluate --input " + w.input.string() + " --config " +
                      w.config.string() + " --avg daily --out " + out.string() +
                      " --export-panel",
                  w.log) == 0);
  const auto rj = nlohmann::json::parse(read_file(out / "report.json"));
  CHECK(rj["normative"] == true);
  // 72 UTC hours at +05:30 touch 4 local days.
  CHECK(count_lines(read_file(out / "panel.csv")) == 5);
}

TEST_CASE("evaluate daily on a single-day input yields a single-row panel") {
  const auto dir = make_work_dir("single_day");
  const auto log = dir / "cli.log";
  std::string csv = "timestamp,device_id,pm25,temperature,humidity\n";
  const std::int64_t t0 = colloc::timeutil::parse_iso8601("2021-11-05T00:00:00Z");
  for (int h = 0; h < 24; ++h)
    for (int s = 0; s < 4; ++s) {
      const std::string ts = colloc::timeutil::format_iso8601(t0 + h * 3600 + s * 900);
      csv += ts + ",bam," + fixture::num(100.0 + h) + ",15,60\n";
      csv += ts + ",a1," + fixture::num(140.0 + h) + ",,\n";
    }
  write_file(dir / "input.csv", csv);
  write_file(dir / "cfg.json",
             R"({"reference_id":"bam","groups":{"alpha":["a1"]}})");
  const auto out = dir / "out";
  REQUIRE(run_cli("evaluate --input " + (dir / "input.csv").string() +
                      " --config " + (dir / "cfg.json").string() +
                      " --avg daily --out " + out.string() + " --export-panel",
                  log) == 0);
  CHECK(count_lines(read_file(out / "panel.csv")) == 2); // header + one day
  const auto units = read_file(out / "metrics_units.csv");
  CHECK(units.find("a1,1,") != std::string::npos); // n = 1 daily pair
}

TEST_CASE("thresholds override flips verdicts") {
  const auto w = standard_workspace("thresholds");
  write_file(w.dir / "loose.json",
             R"({"slope_lo": 0.1, "slope_hi": 3.0, "intercept_abs_max": 100,
                 "rmse_max": 500, "nrmse_max": 500, "sd_max": 100, "cv_max": 100})");
  const auto out = w.dir / "out";
  REQUIRE(run_cli("evaluate --input " + w.input.string() + " --config " +
                      w.config.string() + " --avg hourly --thresholds " +
                      (w.dir / "loose.json").string() + " --out " + out.string(),
                  w.log) == 0);
  const auto rj = nlohmann::json::parse(read_file(out / "report.json"));
  for (const auto& u : rj["units"]) {
    CHECK(u["slope"]["pass"] == true);
    CHECK(u["intercept"]["pass"] == true);
    CHECK(u["overall"] == true);
  }
  for (const auto& g : rj["groups"]) CHECK(g["overall"] == true);
}

TEST_CASE("precision flag controls CSV formatting") {
  const auto w = standard_workspace("precision");
  const auto out = w.dir / "out";
  REQUIRE(run_cli("evaluate --input " + w.input.string() + " --config " +
                      w.config.string() + " --avg hourly --precision 2 --out " +
                      out.string(),
                  w.log) == 0);
  const auto units = read_file(out / "metrics_units.csv");
  CHECK(units.find("a1,68,1.42,") != std::string::npos);
}

TEST_CASE("evaluate exit codes") {
  const auto w = standard_workspace("exit_codes");
  const auto out = w.dir / "out";
  SECTION("missing required flag is a usage error (2)") {
    CHECK(run_cli("evaluate --input " + w.input.string() + " --out " +
                      out.string(),
                  w.log) == 2);
  }
  SECTION("unreadable input (2)") {
    CHECK(run_cli("evaluate --input /nonexistent.csv --config " +
                      w.config.string() + " --out " + out.string(),
                  w.log) == 2);
  }
  SECTION("empty overlap (3)") {
    std::string csv = "timestamp,device_id,pm25,temperature,humidity\n";
    for (int s = 0; s < 4; ++s) {
      csv += "2021-11-01T0" + std::to_string(s) + ":00:00Z,bam,10,,\n";
      csv += "2021-11-02T0" + std::to_string(s) + ":00:00Z,a1,12,,\n";
    }
    const auto disjoint = w.dir / "disjoint.csv";
    write_file(disjoint, csv);
    const auto cfg = w.dir / "cfg2.json";
    write_file(cfg, R"({"reference_id":"bam","groups":{"alpha":["a1"]}})");
    CHECK(run_cli("evaluate --input " + disjoint.string() + " --config " +
                      cfg.string() + " --out " + out.string(),
                  w.log) == 3);
  }
  SECTION("unknown interval (2)") {
    CHECK(run_cli("evaluate --input " + w.input.string() + " --config " +
                      w.config.string() + " --avg weekly --out " + out.string(),
                  w.log) == 2);
  }
}

TEST_CASE("bins outputs and min-hours monotonicity") {
  const auto w = standard_workspace("bins");
  const auto out = w.dir / "out";
  REQUIRE(run_cli("bins --input " + w.input.string() + " --config " +
                      w.config.string() + " --out " + out.string(),
                  w.log) == 0);
  for (const char* name :
       {"bins_long.csv", "bins_excluded.csv", "distribution.csv"})
    CHECK(fs::exists(out / name));
  CHECK(read_file(out / "bins_long.csv") == golden("bins_long.csv"));

  const auto out_loose = w.dir / "out_loose";
  REQUIRE(run_cli("bins --input " + w.input.string() + " --config " +
                      w.config.string() + " --min-hours 1 --out " +
                      out_loose.string(),
                  w.log) == 0);
  CHECK(count_lines(read_file(out_loose / "bins_long.csv")) >=
        count_lines(read_file(out / "bins_long.csv")));
  CHECK(count_lines(read_file(out_loose / "bins_excluded.csv")) <=
        count_lines(read_file(out / "bins_excluded.csv")));

  SECTION("nested JSON mirrors the long CSV") {
    const auto bj = nlohmann::json::parse(read_file(out / "bins.json"));
    CHECK(bj["pm_width"] == 100.0);
    CHECK(bj["min_hours"] == 10);
    CHECK(bj["bins"].size() >= 1);
    CHECK(bj["bins"][0]["units"][0].contains("mae"));
    CHECK(bj.contains("excluded"));
  }

  SECTION("thread cap does not change the bytes") {
    const auto out1 = w.dir / "threads1";
    const auto out4 = w.dir / "threads4";
    REQUIRE(std::system(("COLLOC_EVAL_THREADS=1 " + std::string(COLLOC_EVAL_BIN) +
                         " bins --input " + w.input.string() + " --config " +
                         w.config.string() + " --out " + out1.string() +
                         " > /dev/null 2>&1")
                            .c_str()) == 0);
    REQUIRE(std::system(("COLLOC_EVAL_THREADS=4 " + std::string(COLLOC_EVAL_BIN) +
                         " bins --input " + w.input.string() + " --config " +
                         w.config.string() + " --out " + out4.string() +
                         " > /dev/null 2>&1")
                            .c_str()) == 0);
    CHECK(read_file(out1 / "bins_long.csv") == read_file(out4 / "bins_long.csv"));
    CHECK(read_file(out1 / "bins.json") == read_file(out4 / "bins.json"));
  }
}

TEST_CASE("intervals verb reproduces the published worked example") {
  const auto w = standard_workspace("intervals");
  const auto model = w.dir / "model.json";
  write_file(model, R"({
  "transform": "log_log",
  "orientation": "reference_on_sensor",
  "slope": 0.8259,
  "intercept": 0.4058,
  "n": 978,
  "x_bar": 4.366082523,
  "s_xx": 326.1566,
  "mse": 0.02793705
}
)");
  const auto out = w.dir / "out";
  REQUIRE(run_cli("intervals --fit " + model.string() +
                      " --values 147 --confidence 0.95 --out " + out.string(),
                  w.log) == 0);
  const auto lines = read_file(out / "intervals.csv");
  std::istringstream ss(lines);
  std::string header, row;
  std::getline(ss, header);
  CHECK(header == "x_raw,point,ci_lo,ci_hi,pi_lo,pi_hi");
  std::getline(ss, row);
  const auto fields = colloc::csv::split(row);
  REQUIRE(fields.size() == 6);
  CHECK(*colloc::csv::parse_double(fields[0]) == Catch::Approx(147.0));
  CHECK(*colloc::csv::parse_double(fields[2]) == Catch::Approx(91.09).margin(0.05));
  CHECK(*colloc::csv::parse_double(fields[3]) == Catch::Approx(93.95).margin(0.05));
  CHECK(*colloc::csv::parse_double(fields[4]) == Catch::Approx(66.62).margin(0.05));
  CHECK(*colloc::csv::parse_double(fields[5]) ==
        Catch::Approx(std::exp(4.85576446)).margin(0.01));

  SECTION("narrowest CI at the back-transformed regressor mean") {
    const auto out2 = w.dir / "out2";
    const std::string values =
        "20," + std::to_string(std::exp(4.366082523)) + ",400";
    REQUIRE(run_cli("intervals --fit " + model.string() + " --values " +
                        values + " --out " + out2.string(),
                    w.log) == 0);
    std::istringstream rows(read_file(out2 / "intervals.csv"));
    std::string line;
    std::getline(rows, line);
    double min_width = 1e300;
    int min_index = -1, index = 0;
    while (std::getline(rows, line)) {
      const auto f = colloc::csv::split(line);
      const double w_ci = std::log(*colloc::csv::parse_double(f[3])) -
                          std::log(*colloc::csv::parse_double(f[2]));
      if (w_ci < min_width) {
        min_width = w_ci;
        min_index = index;
      }
      ++index;
    }
    CHECK(min_index == 1);
  }

  SECTION("lower confidence nests strictly inside") {
    const auto out95 = w.dir / "c95";
    const auto out50 = w.dir / "c50";
    REQUIRE(run_cli("intervals --fit " + model.string() +
                        " --values 147 --confidence 0.95 --out " + out95.string(),
                    w.log) == 0);
    REQUIRE(run_cli("intervals --fit " + model.string() +
                        " --values 147 --confidence 0.5 --out " + out50.string(),
                    w.log) == 0);
    auto row_of = [](const std::string& text) {
      std::istringstream ss2(text);
      std::string h, r;
      std::getline(ss2, h);
      std::getline(ss2, r);
      std::vector<double> values;
      for (const auto field : colloc::csv::split(r))
        values.push_back(*colloc::csv::parse_double(field));
      return values;
    };
    const auto wide = row_of(read_file(out95 / "intervals.csv"));
    const auto tight = row_of(read_file(out50 / "intervals.csv"));
    CHECK(tight[2] > wide[2]);
    CHECK(tight[3] < wide[3]);
    CHECK(tight[4] > wide[4]);
    CHECK(tight[5] < wide[5]);
  }

  SECTION("non-positive value under the log transform exits 2") {
    const auto out3 = w.dir / "out3";
    CHECK(run_cli("intervals --fit " + model.string() + " --values 0 --out " +
                      out3.string(),
                  w.log) == 2);
  }
}

TEST_CASE("intervals can fit fresh from the fixture and save the model") {
  const auto w = standard_workspace("intervals_fit");
  const auto out = w.dir / "out";
  REQUIRE(run_cli("intervals --input " + w.input.string() + " --config " +
                      w.config.string() +
                      " --unit a1 --values 100,200 --save-model --out " +
                      out.string(),
                  w.log) == 0);
  CHECK(fs::exists(out / "model.json"));
  const auto mj = nlohmann::json::parse(read_file(out / "model.json"));
  CHECK(mj["transform"] == "log_log");
  CHECK(mj["orientation"] == "reference_on_sensor");
  CHECK(mj["n"].get<int>() > 8);
  CHECK(count_lines(read_file(out / "intervals.csv")) == 3);
}

TEST_CASE("significance verb flags the engineered humidity effect") {
  const auto w = standard_workspace("significance");
  // Rebuild the fixture with a strong RH term on a1.
  std::string csv = "timestamp,device_id,pm25,temperature,humidity\n";
  oracle::Rng rng(55);
  const std::int64_t t0 = colloc::timeutil::parse_iso8601("2021-11-01T00:00:00Z");
  for (int h = 0; h < 72; ++h) {
    const double ref = 60.0 + rng.uniform(0, 200);
    const double rh = rng.uniform(30, 95);
    for (int s = 0; s < 4; ++s) {
      const std::string ts = colloc::timeutil::format_iso8601(t0 + h * 3600 + s * 900);
      csv += ts + ",bam," + fixture::num(ref) + ",15," + fixture::num(rh) + "\n";
      csv += ts + ",a1," +
             fixture::num(1.5 * ref + 2.0 * rh + rng.normal(0, 1.0)) + ",,\n";
    }
  }
  const auto input = w.dir / "rh_input.csv";
  write_file(input, csv);
  const auto cfg = w.dir / "rh_cfg.json";
  write_file(cfg, R"({"reference_id":"bam","groups":{"alpha":["a1"]}})");
  const auto out = w.dir / "out";
  REQUIRE(run_cli("significance --input " + input.string() + " --config " +
                      cfg.string() + " --out " + out.string(),
                  w.log) == 0);
  const auto text = read_file(out / "significance.csv");
  CHECK(text.find("a1") != std::string::npos);
  CHECK(text.find("true") != std::string::npos);
}

TEST_CASE("diurnal profile of two identical days equals one day") {
  auto make_input = [&](int days) {
    std::string csv = "timestamp,device_id,pm25,temperature,humidity\n";
    const std::int64_t t0 = colloc::timeutil::parse_iso8601("2021-11-01T00:00:00Z");
    for (int d = 0; d < days; ++d)
      for (int h = 0; h < 24; ++h)
        for (int s = 0; s < 4; ++s) {
          const std::string ts =
              colloc::timeutil::format_iso8601(t0 + (d * 24 + h) * 3600 + s * 900);
          csv += ts + ",bam," + fixture::num(100.0 + h) + ",15," +
                 fixture::num(50.0 + h / 2.0) + "\n";
          csv += ts + ",a1," + fixture::num(130.0 + 2.0 * h) + ",,\n";
        }
    return csv;
  };
  const auto w = make_work_dir("diurnal");
  const auto log = w / "cli.log";
  const auto cfg = w / "cfg.json";
  write_file(cfg, R"({"reference_id":"bam","groups":{"alpha":["a1"]}})");
  write_file(w / "one.csv", make_input(1));
  write_file(w / "two.csv", make_input(2));
  REQUIRE(run_cli("diurnal --input " + (w / "one.csv").string() + " --config " +
                      cfg.string() + " --out " + (w / "out1").string(),
                  log) == 0);
  REQUIRE(run_cli("diurnal --input " + (w / "two.csv").string() + " --config " +
                      cfg.string() + " --out " + (w / "out2").string(),
                  log) == 0);
  CHECK(read_file(w / "out1" / "diurnal.csv") ==
        read_file(w / "out2" / "diurnal.csv"));
}

TEST_CASE("monthly verb writes one row per covered month") {
  const auto w = standard_workspace("monthly");
  const auto out = w.dir / "out";
  REQUIRE(run_cli("monthly --input " + w.input.string() + " --config " +
                      w.config.string() + " --out " + out.string(),
                  w.log) == 0);
  const auto text = read_file(out / "monthly.csv");
  CHECK(count_lines(text) == 2); // header + 2021-11
  CHECK(text.find("2021-11") != std::string::npos);
}

TEST_CASE("select verb with the bundled catalog") {
  const auto dir = make_work_dir("select");
  const auto log = dir / "cli.log";
  const auto out = dir / "out";
  REQUIRE(run_cli("select --out " + out.string(), log) == 0);
  const auto text = read_file(out / "selection.csv");
  CHECK(text == golden("selection.csv"));
  std::size_t selected = 0;
  std::istringstream ss(text);
  std::string line;
  std::getline(ss, line);
  while (std::getline(ss, line)) {
    const auto f = colloc::csv::split(line);
    REQUIRE(f.size() == 9);
    selected += f[7] == "yes";
  }
  CHECK(selected == 7);

  const auto out_price = dir / "out_price";
  REQUIRE(run_cli("select --max-price 30 --out " + out_price.string(), log) == 0);
  const auto priced = read_file(out_price / "selection.csv");
  std::size_t priced_selected = 0;
  std::istringstream ss3(priced);
  std::getline(ss3, line);
  while (std::getline(ss3, line)) {
    const auto f = colloc::csv::split(line);
    priced_selected += f[7] == "yes";
  }
  CHECK(priced_selected == 1);
}

TEST_CASE("quality verb flags an engineered plateau") {
  const auto dir = make_work_dir("quality");
  const auto log = dir / "cli.log";
  std::string csv = "timestamp,device_id,pm25,temperature,humidity\n";
  const std::int64_t t0 = colloc::timeutil::parse_iso8601("2021-11-01T00:00:00Z");
  for (int h = 0; h < 12; ++h)
    for (int s = 0; s < 4; ++s) {
      const std::string ts = colloc::timeutil::format_iso8601(t0 + h * 3600 + s * 900);
      csv += ts + ",bam," + fixture::num(300.0 + h) + ",,\n";
      const double a1 = h >= 6 ? 950.0 : 400.0 + 10.0 * h;
      csv += ts + ",a1," + fixture::num(a1) + ",,\n";
      csv += ts + ",a2," + fixture::num(420.0 + 10.0 * h) + ",,\n";
    }
  write_file(dir / "input.csv", csv);
  write_file(dir / "cfg.json",
             R"({"reference_id":"bam","groups":{"alpha":["a1","a2"]}})");
  const auto out = dir / "out";
  REQUIRE(run_cli("quality --input " + (dir / "input.csv").string() +
                      " --config " + (dir / "cfg.json").string() + " --out " +
                      out.string(),
                  log) == 0);
  const auto text = read_file(out / "quality_flags.csv");
  CHECK(text.find("saturation_plateau") != std::string::npos);
  CHECK(text.find("a1") != std::string::npos);
}
