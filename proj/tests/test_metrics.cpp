#include <catch2/catch_amalgamated.hpp>

#include "colloc/metrics.hpp"
#include "oracles.hpp"

using namespace colloc;
using Catch::Approx;

namespace {

PairedSeries ps(std::vector<double> x, std::vector<double> y) {
  return make_paired(std::move(x), std::move(y));
}

PairedSeries random_series(oracle::Rng& rng, std::size_t max_n = 50) {
  const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform(0, 1) *
                                                     static_cast<double>(max_n - 2));
  PairedSeries p;
  for (std::size_t i = 0; i < n; ++i) {
    p.x.push_back(rng.uniform(1, 500));
    p.y.push_back(rng.uniform(1, 900));
  }
  return p;
}

} // namespace

TEST_CASE("ols slope and intercept") {
  {
    const auto [m, b] = ols_slope_intercept(ps({1, 2, 3}, {2, 4, 6}));
    CHECK(m == Approx(2.0));
    CHECK(b == Approx(0.0).margin(1e-12));
  }
  {
    const auto [m, b] = ols_slope_intercept(ps({0, 1, 2}, {1, 3, 5}));
    CHECK(m == Approx(2.0));
    CHECK(b == Approx(1.0));
  }
  CHECK_THROWS_AS(ols_slope_intercept(ps({5, 5, 5}, {1, 2, 3})),
                  DegenerateInputError);
  CHECK_THROWS_AS(ols_slope_intercept(ps({1}, {1})), ValidationError);
}

TEST_CASE("noiseless line recovery at tight tolerance") {
  oracle::Rng rng(42);
  PairedSeries p;
  for (int i = 0; i < 500; ++i) {
    const double x = rng.uniform(5, 600);
    p.x.push_back(x);
    p.y.push_back(1.78 * x - 26.78);
  }
  const auto [m, b] = ols_slope_intercept(p);
  CHECK(std::abs(m - 1.78) < 1e-9);
  CHECK(std::abs(b - (-26.78)) < 1e-9);
}

TEST_CASE("r_squared is the squared Pearson correlation") {
  {
    PairedSeries p;
    for (int i = 1; i <= 10; ++i) {
      p.x.push_back(i);
      p.y.push_back(3.0 * i + 5.0);
    }
    CHECK(r_squared(p) == Approx(1.0));
  }
  {
    // y orthogonal to x by construction: sample covariance exactly 0.
    CHECK(r_squared(ps({-1, 0, 1}, {1, 0, 1})) == Approx(0.0).margin(1e-15));
  }
  {
    // Gram-Schmidt: remove the x-component from a random y.
    oracle::Rng rng(3);
    std::vector<double> x, y0;
    for (int i = 0; i < 40; ++i) {
      x.push_back(rng.uniform(0, 100));
      y0.push_back(rng.uniform(0, 100));
    }
    const double beta = oracle::slope(x, y0);
    std::vector<double> y;
    const double xb = oracle::mean(x);
    for (int i = 0; i < 40; ++i) y.push_back(y0[i] - beta * (x[i] - xb));
    CHECK(r_squared(ps(x, y)) == Approx(0.0).margin(1e-18));
  }
  {
    const std::vector<double> x{1, 2, 3, 4}, y{1, 2, 3, 5};
    CHECK(r_squared(ps(x, y)) == Approx(oracle::pearson_r2(x, y)));
  }
  CHECK_THROWS_AS(r_squared(ps({1, 1, 1}, {1, 2, 3})), DegenerateInputError);
  CHECK_THROWS_AS(r_squared(ps({1, 2, 3}, {4, 4, 4})), DegenerateInputError);
}

TEST_CASE("mae, mbe, rmse examples") {
  CHECK(mae(ps({10, 20}, {12, 18})) == Approx(2.0));
  CHECK(mae(ps({3, 4}, {3, 4})) == Approx(0.0));
  CHECK(mbe(ps({3, 4}, {3, 4})) == Approx(0.0));
  CHECK(mbe(ps({1, 2, 3}, {6, 7, 8})) == Approx(5.0));
  CHECK(rmse_single(ps({3, 4}, {3, 4})) == Approx(0.0));
  CHECK(rmse_single(ps({0, 0}, {3, 4})) == Approx(std::sqrt(12.5)));
  CHECK(rmse_single(ps({1, 2, 9}, {4, 5, 12})) == Approx(3.0));
}

TEST_CASE("rmse_group reductions and oracle") {
  SECTION("single unit reduces to rmse_single") {
    const auto panel = oracle::make_panel(
        {"bam", "u1"},
        {oracle::populated({10, 20, 30}), oracle::populated({12, 26, 31})});
    CHECK(rmse_group(panel, {"u1"}, "bam") ==
          Approx(rmse_single(paired_series(panel, "u1", "bam"))));
  }
  SECTION("all units identical to reference give zero") {
    const auto col = oracle::populated({10, 20, 30});
    const auto panel = oracle::make_panel({"bam", "u1", "u2"}, {col, col, col});
    CHECK(rmse_group(panel, {"u1", "u2"}, "bam") == Approx(0.0));
  }
  SECTION("2 units x 2 days against the double loop") {
    const std::vector<double> ref{100, 200};
    const std::vector<std::vector<double>> units{{110, 230}, {95, 180}};
    const auto panel = oracle::make_panel(
        {"bam", "u1", "u2"},
        {oracle::populated(ref), oracle::populated(units[0]),
         oracle::populated(units[1])});
    CHECK(rmse_group(panel, {"u1", "u2"}, "bam") ==
          Approx(oracle::rmse_group(units, ref)));
  }
  SECTION("no co-populated cells is an error") {
    const auto panel = oracle::make_panel(
        {"bam", "u1"},
        {{{10.0}, std::nullopt}, {std::nullopt, {12.0}}});
    CHECK_THROWS_AS(rmse_group(panel, {"u1"}, "bam"), EmptyResultError);
  }
}

TEST_CASE("nrmse normalization") {
  {
    // Plantower group row: RMSE 84.05 over a daily reference spanning 18..344.
    const std::vector<double> ref{18, 344, 100, 150};
    const auto [nm, nr] = nrmse(84.05, ref);
    CHECK(nr == Approx(25.78).margin(0.02));
    CHECK(nm == Approx(84.05 / oracle::mean(ref) * 100.0));
  }
  {
    const std::vector<double> ref{10, 20};
    const auto [nm, nr] = nrmse(0.0, ref);
    CHECK(nm == 0.0);
    CHECK(nr == 0.0);
  }
  {
    const std::vector<double> ref{10, 20};
    CHECK(nrmse(10.0, ref).second == Approx(100.0));
  }
  const std::vector<double> flat{10, 10};
  CHECK_THROWS_AS(nrmse(1.0, flat), DegenerateInputError);
}

TEST_CASE("group SD and CV") {
  SECTION("identical units have zero spread") {
    const auto col = oracle::populated({50, 60, 70});
    const auto panel = oracle::make_panel({"bam", "u1", "u2"}, {col, col, col});
    const auto [sd, cv] = group_sd_cv(panel, {"u1", "u2"});
    CHECK(sd == Approx(0.0).margin(1e-12));
    CHECK(cv == Approx(0.0).margin(1e-12));
  }
  SECTION("2 units x 2 periods against the pooled-deviation loop") {
    const std::vector<std::vector<double>> units{{100, 220}, {110, 200}};
    const auto panel = oracle::make_panel(
        {"bam", "u1", "u2"},
        {oracle::populated({1, 1}), oracle::populated(units[0]),
         oracle::populated(units[1])});
    const auto [sd, cv] = group_sd_cv(panel, {"u1", "u2"});
    const auto [osd, ocv] = oracle::sd_cv(units);
    CHECK(sd == Approx(osd));
    CHECK(cv == Approx(ocv));
  }
  SECTION("partial group coverage periods are excluded") {
    const auto panel = oracle::make_panel(
        {"bam", "u1", "u2"},
        {oracle::populated({1, 1, 1}),
         {{100.0}, {200.0}, {300.0}},
         {{110.0}, std::nullopt, {290.0}}});
    const auto [sd, cv] = group_sd_cv(panel, {"u1", "u2"});
    const auto [osd, ocv] = oracle::sd_cv({{100, 300}, {110, 290}});
    CHECK(sd == Approx(osd));
    CHECK(cv == Approx(ocv));
  }
  SECTION("published SD/CV pair implies a grand mean inside the group means") {
    // SD 7.47 at CV 3.46% puts the grand mean near 215.9, between the
    // Sensirion daily means 213 and 219.
    const double implied_mean = 7.47 / 3.46 * 100.0;
    CHECK(implied_mean == Approx(215.9).margin(0.1));
    CHECK(implied_mean >= 213.0);
    CHECK(implied_mean <= 219.0);
  }
  SECTION("fewer than two units is invalid") {
    const auto panel = oracle::make_panel(
        {"bam", "u1"}, {oracle::populated({1}), oracle::populated({2})});
    CHECK_THROWS_AS(group_sd_cv(panel, {"u1"}), ValidationError);
  }
}

TEST_CASE("metric properties", "[property]") {
  oracle::Rng rng(2024);

  SECTION("scale equivariance and shift behavior") {
    for (int rep = 0; rep < 100; ++rep) {
      auto p = random_series(rng);
      const double c = rng.uniform(0.5, 4.0);
      PairedSeries scaled;
      for (std::size_t i = 0; i < p.n(); ++i) {
        scaled.x.push_back(c * p.x[i]);
        scaled.y.push_back(c * p.y[i]);
      }
      const auto [m, b] = ols_slope_intercept(p);
      const auto [ms, bs] = ols_slope_intercept(scaled);
      CHECK(ms == Approx(m));
      CHECK(bs == Approx(c * b));
      CHECK(r_squared(scaled) == Approx(r_squared(p)));
      CHECK(mae(scaled) == Approx(c * mae(p)));
      CHECK(mbe(scaled) == Approx(c * mbe(p)));
      CHECK(rmse_single(scaled) == Approx(c * rmse_single(p)));
      const std::vector<double> refv = p.x;
      std::vector<double> refs;
      for (double v : refv) refs.push_back(c * v);
      const auto [nm, nr] = nrmse(rmse_single(p), refv);
      const auto [nms, nrs] = nrmse(rmse_single(scaled), refs);
      CHECK(nms == Approx(nm));
      CHECK(nrs == Approx(nr));

      const double shift = rng.uniform(-20, 20);
      PairedSeries shifted = p;
      for (auto& v : shifted.y) v += shift;
      const auto [mh, bh] = ols_slope_intercept(shifted);
      CHECK(mh == Approx(m));
      CHECK(bh == Approx(b + shift));
      CHECK(mbe(shifted) == Approx(mbe(p) + shift));
      CHECK(r_squared(shifted) == Approx(r_squared(p)));
    }
  }

  SECTION("rmse >= mae >= 0 and rmse >= |mbe| on every input") {
    for (int rep = 0; rep < 200; ++rep) {
      const auto p = random_series(rng);
      const double a = mae(p), b = mbe(p), r = rmse_single(p);
      CHECK(a >= 0.0);
      CHECK(r >= a - 1e-12);
      CHECK(r >= std::abs(b) - 1e-12);
    }
  }

  SECTION("naive-loop oracle equivalence at 1e-10 relative") {
    for (int rep = 0; rep < 200; ++rep) {
      const auto p = random_series(rng);
      const auto rel = [](double got, double want) {
        return std::abs(got - want) / std::max(1.0, std::abs(want));
      };
      const auto [m, b] = ols_slope_intercept(p);
      CHECK(rel(m, oracle::slope(p.x, p.y)) < 1e-10);
      CHECK(rel(b, oracle::intercept(p.x, p.y)) < 1e-10);
      CHECK(rel(r_squared(p), oracle::pearson_r2(p.x, p.y)) < 1e-10);
      CHECK(rel(mae(p), oracle::mae(p.x, p.y)) < 1e-10);
      CHECK(rel(mbe(p), oracle::mbe(p.x, p.y)) < 1e-10);
      CHECK(rel(rmse_single(p), oracle::rmse(p.x, p.y)) < 1e-10);
    }
  }
}

TEST_CASE("metric set builder marks degenerate fields absent") {
  const auto panel = oracle::make_panel(
      {"bam", "u1"},
      {oracle::populated({10, 20, 30, 40}), oracle::populated({12, 24, 33, 47})});
  const auto m = unit_metrics(panel, "u1", "bam");
  CHECK(m.n == 4);
  REQUIRE(m.slope.has_value());
  REQUIRE(m.r_squared.has_value());
  REQUIRE(m.nrmse_range.has_value());

  // Constant reference slice: regression and NRMSE come back absent.
  const auto p = make_paired({5, 5, 5}, {1, 2, 3});
  const std::vector<double> norm{5, 5, 5};
  const auto m2 = compute_metrics(p, norm);
  CHECK_FALSE(m2.slope.has_value());
  CHECK_FALSE(m2.r_squared.has_value());
  CHECK_FALSE(m2.nrmse_range.has_value());
  CHECK(m2.mae > 0.0);
}

TEST_CASE("group metric bundle") {
  const auto panel = oracle::make_panel(
      {"bam", "u1", "u2"},
      {oracle::populated({100, 200, 150}), oracle::populated({120, 210, 140}),
       oracle::populated({130, 190, 160})});
  const auto g = group_metrics(panel, {"u1", "u2"}, "bam");
  CHECK(g.n_pairs == 6);
  CHECK(g.n_periods == 3);
  CHECK(g.rmse_group == Approx(oracle::rmse_group({{120, 210, 140},
                                                   {130, 190, 160}},
                                                  {100, 200, 150})));
  REQUIRE(g.sd.has_value());
  REQUIRE(g.cv.has_value());
  const auto [osd, ocv] = oracle::sd_cv({{120, 210, 140}, {130, 190, 160}});
  CHECK(*g.sd == Approx(osd));
  CHECK(*g.cv == Approx(ocv));
  REQUIRE(g.nrmse_group_mean.has_value());
  CHECK(*g.nrmse_group_mean == Approx(g.rmse_group / 150.0 * 100.0));
  CHECK(*g.nrmse_group_range == Approx(g.rmse_group / 100.0 * 100.0));
}
