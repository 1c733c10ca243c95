#ifndef COLLOC_NUMERIC_HPP
#define COLLOC_NUMERIC_HPP

#include <cmath>
#include <cstddef>
#include <span>

namespace colloc {

// Neumaier-compensated accumulator. All Σ terms in the metric and regression
// code go through this; plain accumulation loses digits once n·x² gets large.
class CompensatedSum {
public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_total(std::span<const double> xs) {
  CompensatedSum s;
  for (double v : xs) s.add(v);
  return s.value();
}

inline double mean(std::span<const double> xs) {
  return compensated_total(xs) / static_cast<double>(xs.size());
}

} // namespace colloc

#endif
