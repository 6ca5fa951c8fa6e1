#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace rdsmdr {

// Numerically stable logistic function.
inline double expit(double x) noexcept {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sum_i exp(x_i)) with max subtraction; -inf for an empty span.
double log_sum_exp(std::span<const double> xs);

// Compensated accumulator. Order of add() calls is fixed by the caller, so
// sums are reproducible run-to-run for a given input order.
class KahanSum {
public:
  void add(double x) noexcept {
    const double y = x - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const noexcept { return s_; }

private:
  double s_ = 0.0;
  double c_ = 0.0;
};

double mean(std::span<const double> xs);
// Sample standard deviation (n-1 denominator); 0 for fewer than 2 values.
double sample_sd(std::span<const double> xs);
// Population standard deviation (n denominator).
double population_sd(std::span<const double> xs);

// Standard normal CDF.
double normal_cdf(double x);
// Standard normal quantile; rational approximation refined by one Halley
// step against normal_cdf, accurate to ~1e-14 on (0,1).
double normal_quantile(double p);

}  // namespace rdsmdr
