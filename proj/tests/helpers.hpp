#pragma once

// Shared oracles for the test suites: brute-force statistics kept independent
// of the library's own implementation paths.

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "fdsim/core.hpp"

namespace fdsim_test {

using fdsim::Complex;
using fdsim::SignalBuffer;

// Brute-force complex autocorrelation R(lag) = <x[i+lag] x*[i]> / <|x|^2>
// over the valid region.
inline Complex buffer_acf(const SignalBuffer& buf, std::size_t lag) {
  const std::size_t start = buf.leading_invalid;
  Complex num{0.0, 0.0};
  double den = 0.0;
  for (std::size_t i = start; i + lag < buf.size(); ++i) {
    num += buf.samples[i + lag] * std::conj(buf.samples[i]);
    den += std::norm(buf.samples[i]);
  }
  return num / den;
}

// Normalized cross-correlation |<a b*>| / sqrt(<|a|^2><|b|^2>).
inline double normalized_cross_correlation(const std::vector<Complex>& a,
                                           const std::vector<Complex>& b) {
  Complex num{0.0, 0.0};
  double pa = 0.0, pb = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    num += a[i] * std::conj(b[i]);
    pa += std::norm(a[i]);
    pb += std::norm(b[i]);
  }
  return std::abs(num) / std::sqrt(pa * pb);
}

// Same statistic without conjugation (the proper-signal pseudo-correlation).
inline double normalized_pseudo_correlation(const std::vector<Complex>& a,
                                            const std::vector<Complex>& b) {
  Complex num{0.0, 0.0};
  double pa = 0.0, pb = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    num += a[i] * b[i];
    pa += std::norm(a[i]);
    pb += std::norm(b[i]);
  }
  return std::abs(num) / std::sqrt(pa * pb);
}

inline double mean_square(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc / static_cast<double>(v.size());
}

}  // namespace fdsim_test
