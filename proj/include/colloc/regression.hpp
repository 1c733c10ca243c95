#ifndef COLLOC_REGRESSION_HPP
#define COLLOC_REGRESSION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "colloc/errors.hpp"
#include "colloc/metrics.hpp"
#include "colloc/numeric.hpp"
#include "colloc/student_t.hpp"

// Calibration regression with optional log-log transform, 3σ standardized
// residual screening, and confidence/prediction intervals for field
// measurements (Montgomery & Runger, ch. 11).

namespace colloc {

enum class Transform { none, log_log };

// Which variable sits on which axis. Accuracy metrics regress sensor on
// reference; the interval analysis regresses reference on sensor. Outputs
// carry the label so the two are never mixed up.
enum class Orientation { sensor_on_reference, reference_on_sensor };

inline std::string_view to_string(Transform t) {
  return t == Transform::none ? "none" : "log_log";
}
inline std::string_view to_string(Orientation o) {
  return o == Orientation::sensor_on_reference ? "sensor_on_reference"
                                               : "reference_on_sensor";
}
inline Transform transform_from_string(std::string_view s) {
  if (s == "none") return Transform::none;
  if (s == "log_log") return Transform::log_log;
  throw ValidationError("unknown transform '" + std::string(s) + "'");
}
inline Orientation orientation_from_string(std::string_view s) {
  if (s == "sensor_on_reference") return Orientation::sensor_on_reference;
  if (s == "reference_on_sensor") return Orientation::reference_on_sensor;
  throw ValidationError("unknown orientation '" + std::string(s) + "'");
}

struct RegressionFit {
  Transform transform = Transform::none;
  Orientation orientation = Orientation::reference_on_sensor;
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t n = 0;
  double x_bar = 0.0;
  double s_xx = 0.0; // Σ(xᵢ − x̄)²
  double mse = 0.0;  // Σ(yᵢ − ŷᵢ)² / (n − 2)
  std::vector<double> residuals;
  std::vector<double> standardized_residuals; // residual / sqrt(MSE)
  std::vector<std::size_t> removed_outlier_indices; // into the original input

  double predict_transformed(double x_o) const {
    return slope * x_o + intercept;
  }
};

namespace detail {

// Plain OLS on already-transformed values, with residual diagnostics.
inline RegressionFit fit_ols(std::span<const double> xs,
                             std::span<const double> ys, Transform transform,
                             Orientation orientation) {
  if (xs.size() != ys.size()) throw ValidationError("fit: length mismatch");
  const std::size_t n = xs.size();
  if (n <= 2) throw ValidationError("fit: needs n > 2 for MSE");

  PairedSeries p;
  p.x.assign(xs.begin(), xs.end());
  p.y.assign(ys.begin(), ys.end());
  const auto [slope, intercept] = ols_slope_intercept(p);

  RegressionFit fit;
  fit.transform = transform;
  fit.orientation = orientation;
  fit.slope = slope;
  fit.intercept = intercept;
  fit.n = n;
  fit.x_bar = mean(p.x);
  CompensatedSum sxx, ssr;
  fit.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - fit.x_bar;
    sxx.add(dx * dx);
    const double r = ys[i] - (slope * xs[i] + intercept);
    fit.residuals[i] = r;
    ssr.add(r * r);
  }
  fit.s_xx = sxx.value();
  fit.mse = std::max(0.0, ssr.value()) / static_cast<double>(n - 2);
  const double scale = std::sqrt(fit.mse);
  fit.standardized_residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    fit.standardized_residuals[i] =
        scale > 0.0 ? fit.residuals[i] / scale : 0.0;
  return fit;
}

} // namespace detail

struct OutlierOptions {
  double sigma_threshold = 3.0;
  // The screen is a single pass plus one re-fit; set iterate to repeat the
  // removal until no standardized residual reaches the threshold.
  bool iterate = false;
};

// Fits OLS on (ln x, ln y), removes points whose |standardized residual|
// reaches 3σ, and re-fits on the retained set. x is the sensor series when
// orientation is reference_on_sensor (the interval-analysis direction).
inline RegressionFit fit_loglog_with_outlier_removal(
    std::span<const double> xs, std::span<const double> ys,
    Orientation orientation = Orientation::reference_on_sensor,
    OutlierOptions options = {}) {
  if (xs.size() != ys.size()) throw ValidationError("fit: length mismatch");
  if (xs.size() <= 3) throw ValidationError("log-log fit needs n > 3");
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw ValidationError("log-log fit requires strictly positive values");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }

  std::vector<std::size_t> kept(lx.size());
  std::iota(kept.begin(), kept.end(), std::size_t{0});
  std::vector<std::size_t> removed;

  RegressionFit fit = detail::fit_ols(lx, ly, Transform::log_log, orientation);
  while (true) {
    std::vector<std::size_t> next_kept;
    next_kept.reserve(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (std::abs(fit.standardized_residuals[i]) >= options.sigma_threshold)
        removed.push_back(kept[i]);
      else
        next_kept.push_back(kept[i]);
    }
    if (next_kept.size() == kept.size()) break;
    if (next_kept.size() <= 3)
      throw DegenerateInputError(
          "outlier removal left too few points to re-fit");
    kept = std::move(next_kept);
    std::vector<double> rx(kept.size()), ry(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      rx[i] = lx[kept[i]];
      ry[i] = ly[kept[i]];
    }
    fit = detail::fit_ols(rx, ry, Transform::log_log, orientation);
    if (!options.iterate) break;
  }
  std::sort(removed.begin(), removed.end());
  fit.removed_outlier_indices = std::move(removed);
  return fit;
}

// Fit without transform (used by the significance and correction paths).
inline RegressionFit fit_linear(std::span<const double> xs,
                                std::span<const double> ys,
                                Orientation orientation) {
  return detail::fit_ols(xs, ys, Transform::none, orientation);
}

struct IntervalEstimate {
  double x_o = 0.0;   // transformed scale
  double point = 0.0; // back-transformed, µg/m³
  double ci_lo = 0.0, ci_hi = 0.0;
  double pi_lo = 0.0, pi_hi = 0.0;
  double confidence = 0.95;
};

namespace detail {

inline double back_transform(double v, Transform t) {
  return t == Transform::log_log ? std::exp(v) : v;
}

inline void check_fit(const RegressionFit& fit, double confidence) {
  if (fit.n <= 2) throw ValidationError("interval: fit has n <= 2");
  if (!(fit.s_xx > 0.0)) throw ValidationError("interval: S_xx must be > 0");
  if (!(confidence > 0.0) || !(confidence < 1.0))
    throw ValidationError("interval: confidence must be in (0, 1)");
}

} // namespace detail

// Mean-response interval: ŷₒ ± t·sqrt(MSE·(1/n + (x_o − x̄)²/S_xx)),
// back-transformed by exponentiation under the log-log transform.
inline IntervalEstimate confidence_interval(const RegressionFit& fit,
                                            double x_o, double confidence) {
  detail::check_fit(fit, confidence);
  const double t = stats::t_quantile(confidence, fit.n - 2);
  const double y_hat = fit.predict_transformed(x_o);
  const double d = x_o - fit.x_bar;
  const double half =
      t * std::sqrt(fit.mse * (1.0 / static_cast<double>(fit.n) +
                               d * d / fit.s_xx));
  IntervalEstimate est;
  est.x_o = x_o;
  est.confidence = confidence;
  est.point = detail::back_transform(y_hat, fit.transform);
  est.ci_lo = detail::back_transform(y_hat - half, fit.transform);
  est.ci_hi = detail::back_transform(y_hat + half, fit.transform);
  est.pi_lo = est.ci_lo;
  est.pi_hi = est.ci_hi;
  return est;
}

// New-observation interval: ŷₒ ± t·sqrt(MSE·(1 + 1/n + (x_o − x̄)²/S_xx)).
inline IntervalEstimate prediction_interval(const RegressionFit& fit,
                                            double x_o, double confidence) {
  detail::check_fit(fit, confidence);
  const double t = stats::t_quantile(confidence, fit.n - 2);
  const double y_hat = fit.predict_transformed(x_o);
  const double d = x_o - fit.x_bar;
  const double half =
      t * std::sqrt(fit.mse * (1.0 + 1.0 / static_cast<double>(fit.n) +
                               d * d / fit.s_xx));
  IntervalEstimate est;
  est.x_o = x_o;
  est.confidence = confidence;
  est.point = detail::back_transform(y_hat, fit.transform);
  est.pi_lo = detail::back_transform(y_hat - half, fit.transform);
  est.pi_hi = detail::back_transform(y_hat + half, fit.transform);
  est.ci_lo = est.point;
  est.ci_hi = est.point;
  return est;
}

// Both intervals at once; the PI contains the CI whenever MSE > 0.
inline IntervalEstimate intervals(const RegressionFit& fit, double x_o,
                                  double confidence) {
  IntervalEstimate est = confidence_interval(fit, x_o, confidence);
  const IntervalEstimate pi = prediction_interval(fit, x_o, confidence);
  est.pi_lo = pi.pi_lo;
  est.pi_hi = pi.pi_hi;
  return est;
}

struct SignificanceResult {
  // Calibration response is the reference series; regressors are the sensor
  // series alone, then sensor + RH.
  double coef_intercept = 0.0;
  double coef_sensor = 0.0;
  double coef_rh = 0.0;
  double r_squared_lcs_only = 0.0;
  double r_squared_lcs_plus_rh = 0.0;
  double p_value_rh = 1.0;
  bool significant = false; // at α = 0.05
  std::size_t n = 0;
};

inline constexpr double kSignificanceAlpha = 0.05;

namespace detail {

// Solves a small symmetric linear system by Gaussian elimination with
// partial pivoting. Throws on (near-)singularity.
template <std::size_t K>
inline std::array<double, K> solve(std::array<std::array<double, K>, K> a,
                                   std::array<double, K> b) {
  for (std::size_t col = 0; col < K; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < K; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-12)
      throw DegenerateInputError("design matrix is rank deficient");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < K; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < K; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::array<double, K> x{};
  for (std::size_t i = K; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < K; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

// Inverse of a 3x3 matrix via the adjugate; only the diagonal is consumed.
inline std::array<double, 3> inverse_diagonal3(
    const std::array<std::array<double, 3>, 3>& m) {
  auto det2 = [&](int r1, int c1, int r2, int c2) {
    return m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1];
  };
  const double det = m[0][0] * det2(1, 1, 2, 2) - m[0][1] * det2(1, 0, 2, 2) +
                     m[0][2] * det2(1, 0, 2, 1);
  if (std::abs(det) < 1e-12)
    throw DegenerateInputError("design matrix is rank deficient");
  return {det2(1, 1, 2, 2) / det, det2(0, 0, 2, 2) / det,
          det2(0, 0, 1, 1) / det};
}

} // namespace detail

// Tests whether RH carries signal beyond the sensor reading: fits
// y ~ 1 + x and y ~ 1 + x + rh by normal equations and reports the two-sided
// t-test on the RH coefficient at n − 3 degrees of freedom.
inline SignificanceResult humidity_significance(std::span<const double> sensor,
                                                std::span<const double> reference,
                                                std::span<const double> rh) {
  const std::size_t n = sensor.size();
  if (reference.size() != n || rh.size() != n)
    throw ValidationError("humidity_significance: length mismatch");
  if (n <= 4) throw ValidationError("humidity_significance needs n > 4");

  const double y_bar = mean(reference);
  CompensatedSum sst_acc;
  for (double y : reference) {
    const double d = y - y_bar;
    sst_acc.add(d * d);
  }
  const double sst = sst_acc.value();
  if (sst <= 0.0)
    throw DegenerateInputError("humidity_significance: constant response");

  // Reduced model y ~ 1 + x.
  PairedSeries p;
  p.x.assign(sensor.begin(), sensor.end());
  p.y.assign(reference.begin(), reference.end());
  const auto [m1, b1] = ols_slope_intercept(p);
  CompensatedSum ssr1;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = reference[i] - (m1 * sensor[i] + b1);
    ssr1.add(r * r);
  }

  // Full model y ~ 1 + x + rh. XᵀX assembled in centered-free form; the
  // normal equations are fine at this scale (n in the thousands, 3 columns).
  CompensatedSum sx, sh, sxx, shh, sxh, sy, sxy, shy;
  for (std::size_t i = 0; i < n; ++i) {
    sx.add(sensor[i]);
    sh.add(rh[i]);
    sxx.add(sensor[i] * sensor[i]);
    shh.add(rh[i] * rh[i]);
    sxh.add(sensor[i] * rh[i]);
    sy.add(reference[i]);
    sxy.add(sensor[i] * reference[i]);
    shy.add(rh[i] * reference[i]);
  }
  const double dn = static_cast<double>(n);
  const std::array<std::array<double, 3>, 3> xtx{{
      {dn, sx.value(), sh.value()},
      {sx.value(), sxx.value(), sxh.value()},
      {sh.value(), sxh.value(), shh.value()},
  }};
  const std::array<double, 3> xty{sy.value(), sxy.value(), shy.value()};
  const auto beta = detail::solve<3>(xtx, xty);

  CompensatedSum ssr2;
  for (std::size_t i = 0; i < n; ++i) {
    const double r =
        reference[i] - (beta[0] + beta[1] * sensor[i] + beta[2] * rh[i]);
    ssr2.add(r * r);
  }
  const double mse2 = std::max(0.0, ssr2.value()) / static_cast<double>(n - 3);
  const auto inv_diag = detail::inverse_diagonal3(xtx);
  const double se_rh = std::sqrt(mse2 * inv_diag[2]);

  SignificanceResult res;
  res.n = n;
  res.coef_intercept = beta[0];
  res.coef_sensor = beta[1];
  res.coef_rh = beta[2];
  res.r_squared_lcs_only = 1.0 - std::max(0.0, ssr1.value()) / sst;
  res.r_squared_lcs_plus_rh = 1.0 - std::max(0.0, ssr2.value()) / sst;
  if (se_rh > 0.0) {
    const double t = beta[2] / se_rh;
    res.p_value_rh = stats::two_sided_p_value(t, static_cast<double>(n - 3));
  } else {
    res.p_value_rh = beta[2] == 0.0 ? 1.0 : 0.0;
  }
  res.significant = res.p_value_rh <= kSignificanceAlpha;
  return res;
}

struct HoldoutScores {
  double r_squared = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

namespace detail {

// Fisher–Yates over raw mt19937_64 draws; std::shuffle is not reproducible
// across standard libraries and these splits feed byte-compared outputs.
inline std::vector<std::size_t> shuffled_indices(std::size_t n,
                                                 std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[rng() % i]);
  return idx;
}

} // namespace detail

// Seeded random sub-sampling evaluation of the linear correction y ~ 1 + x:
// fit on the training share, score on the held-out rest.
inline HoldoutScores linear_correction_eval(std::span<const double> sensor,
                                            std::span<const double> reference,
                                            double split, std::uint64_t seed) {
  const std::size_t n = sensor.size();
  if (reference.size() != n)
    throw ValidationError("linear_correction_eval: length mismatch");
  if (n < 10) throw ValidationError("linear_correction_eval needs n >= 10");
  if (!(split > 0.0) || !(split < 1.0))
    throw ValidationError("split must be in (0, 1)");

  const auto idx = detail::shuffled_indices(n, seed);
  std::size_t n_train = static_cast<std::size_t>(
      std::llround(split * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 2, n - 1);

  PairedSeries train;
  for (std::size_t i = 0; i < n_train; ++i) {
    train.x.push_back(sensor[idx[i]]);
    train.y.push_back(reference[idx[i]]);
  }
  const auto [slope, intercept] = ols_slope_intercept(train);

  PairedSeries test; // x: predictions, y: truth
  for (std::size_t i = n_train; i < n; ++i) {
    test.x.push_back(slope * sensor[idx[i]] + intercept);
    test.y.push_back(reference[idx[i]]);
  }

  HoldoutScores scores;
  scores.n_train = n_train;
  scores.n_test = n - n_train;
  scores.mae = mae(test);
  scores.rmse = rmse_single(test);
  try {
    scores.r_squared = r_squared(test);
  } catch (const DegenerateInputError&) {
    // constant predictions or truth: perfect if error-free, else no skill
    scores.r_squared = scores.rmse == 0.0 ? 1.0 : 0.0;
  }
  return scores;
}

} // namespace colloc

#endif
