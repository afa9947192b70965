#pragma once

#include <cstddef>
#include <span>

namespace netexp {

// Compensated (Kahan) accumulator.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

// Inverse standard-normal CDF. Acklam's rational approximation polished
// with one Halley step against erfc, accurate to full double precision on
// (0, 1).
double normal_quantile(double p);

double mean(std::span<const double> v);
// Sample standard deviation (n-1 denominator); 0 when fewer than 2 values.
double sample_sd(std::span<const double> v);

}  // namespace netexp
