#pragma once

// Phase-noise utilities: converting oscillator spectra to jitter statistics
// and generating stationary Gaussian phase paths with a prescribed variance
// and autocorrelation.
//
// Supported processes:
//   white  - independent samples, R(0) = 1 and R(tau) = 0 otherwise
//   ar1    - Gauss-Markov with R(tau) = exp(-|tau|/coherence_time)
//   table  - user-supplied correlations at given lags, realized by fitting an
//            autoregressive model whose autocovariance matches the table at
//            every tabulated lag (Levinson-Durbin). The table must be
//            positive definite.
//
// A free-running random-walk oscillator is deliberately not offered: it has
// no stationary autocorrelation, and every consumer here reasons in terms of
// R(tau).

#include <cmath>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "fdsim/core.hpp"
#include "fdsim/rng.hpp"

namespace fdsim {

// Piecewise-constant phase-noise spectrum level in dBc/Hz over
// [f_start_hz, f_end_hz), offsets from the carrier.
struct SpectrumSegment {
  double f_start_hz = 0.0;
  double f_end_hz = 0.0;
  double level_dbc_per_hz = 0.0;
};

// RMS phase jitter in radians: sqrt of the integral of 10^(L(f)/10) over
// [f1, f2]. The integration range must be covered by the segments; the
// integral is exact on the piecewise-constant levels.
inline double jitter_from_spectrum(std::span<const SpectrumSegment> segments,
                                   double f1_hz, double f2_hz) {
  require(f1_hz < f2_hz, "spectrum integration range must be non-empty");
  std::vector<SpectrumSegment> sorted(segments.begin(), segments.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const SpectrumSegment& a, const SpectrumSegment& b) {
              return a.f_start_hz < b.f_start_hz;
            });
  const double tol = 1e-9 * (f2_hz - f1_hz);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    require(sorted[i].f_start_hz < sorted[i].f_end_hz, "spectrum segment must have positive width");
    if (i > 0)
      require(sorted[i].f_start_hz >= sorted[i - 1].f_end_hz - tol,
              "spectrum segments must not overlap");
  }

  double cursor = f1_hz;
  double integral = 0.0;
  for (const auto& seg : sorted) {
    if (seg.f_end_hz <= cursor + tol) continue;
    if (seg.f_start_hz >= f2_hz - tol) break;
    require(seg.f_start_hz <= cursor + tol,
            "spectrum segments do not cover the integration range");
    const double lo = std::max(cursor, seg.f_start_hz);
    const double hi = std::min(f2_hz, seg.f_end_hz);
    integral += std::pow(10.0, seg.level_dbc_per_hz / 10.0) * (hi - lo);
    cursor = hi;
    if (cursor >= f2_hz - tol) break;
  }
  require(cursor >= f2_hz - tol, "spectrum segments do not cover the integration range");
  return std::sqrt(integral);
}

// RMS time jitter -> RMS phase jitter at the given carrier.
inline double jitter_time_to_phase(double delta_t_rms_s, double carrier_hz) {
  require(delta_t_rms_s >= 0.0 && carrier_hz >= 0.0,
          "jitter and carrier frequency must be non-negative");
  return 2.0 * std::numbers::pi * carrier_hz * delta_t_rms_s;
}

namespace detail {

// Levinson-Durbin fit of an AR(p) model to normalized autocorrelations
// r[0..p] (r[0] = 1). Returns the AR coefficients a[1..p] (as a[0..p-1]) and
// the innovation variance for a unit-variance process.
inline std::vector<double> ar_fit(const std::vector<double>& r, double* innovation_var) {
  const std::size_t p = r.size() - 1;
  std::vector<double> a(p, 0.0);
  double err = r[0];
  for (std::size_t k = 1; k <= p; ++k) {
    double acc = r[k];
    for (std::size_t j = 1; j < k; ++j) acc -= a[j - 1] * r[k - j];
    if (err <= 0.0) throw UsageError("correlation table is not positive definite");
    const double reflection = acc / err;
    if (!(std::abs(reflection) < 1.0))
      throw UsageError("correlation table is not positive definite");
    std::vector<double> prev(a.begin(), a.begin() + static_cast<long>(k - 1));
    a[k - 1] = reflection;
    for (std::size_t j = 1; j < k; ++j) a[j - 1] = prev[j - 1] - reflection * prev[k - 1 - j];
    err *= (1.0 - reflection * reflection);
  }
  *innovation_var = err;
  return a;
}

}  // namespace detail

// Stationary zero-mean Gaussian phase path with the spec's variance and
// autocorrelation, sampled at `sample_period_s`. Identical inputs give
// bit-identical paths.
inline std::vector<double> sample_phase_path(const PhaseNoiseSpec& spec, std::size_t n,
                                             double sample_period_s) {
  require(n > 0, "path length must be positive");
  require(sample_period_s > 0.0, "sample period must be positive");
  spec.validate();

  std::vector<double> path(n, 0.0);
  if (spec.variance_rad2 == 0.0) return path;
  const double sigma = std::sqrt(spec.variance_rad2);
  Rng rng(spec.seed);

  if (std::holds_alternative<PhaseNoiseWhite>(spec.model)) {
    for (double& v : path) v = sigma * rng.gaussian();
    return path;
  }

  if (const auto* ar1 = std::get_if<PhaseNoiseAr1>(&spec.model)) {
    const double a = std::exp(-sample_period_s / ar1->coherence_time_s);
    const double drive = sigma * std::sqrt(1.0 - a * a);
    double state = sigma * rng.gaussian();
    path[0] = state;
    for (std::size_t i = 1; i < n; ++i) {
      state = a * state + drive * rng.gaussian();
      path[i] = state;
    }
    return path;
  }

  const auto& table = std::get<PhaseNoiseTable>(spec.model);
  const std::size_t order = static_cast<std::size_t>(
      std::llround(table.lags_s.back() / sample_period_s));
  if (order == 0) {  // table shorter than one sample: white
    for (double& v : path) v = sigma * rng.gaussian();
    return path;
  }
  require(order <= 4096, "correlation table spans too many sample lags");
  std::vector<double> r(order + 1);
  PhaseNoiseSpec probe = spec;  // reuse the interpolator
  for (std::size_t k = 0; k <= order; ++k)
    r[k] = probe.correlation_at(static_cast<double>(k) * sample_period_s);

  double innovation = 0.0;
  const std::vector<double> a = detail::ar_fit(r, &innovation);
  const double drive = sigma * std::sqrt(innovation);

  const std::size_t burn = std::max<std::size_t>(1000, 50 * order);
  std::vector<double> hist(order, 0.0);  // hist[j] = x[i-1-j]
  auto step = [&]() {
    double x = drive * rng.gaussian();
    for (std::size_t j = 0; j < order; ++j) x += a[j] * hist[j];
    for (std::size_t j = order - 1; j > 0; --j) hist[j] = hist[j - 1];
    hist[0] = x;
    return x;
  };
  for (std::size_t i = 0; i < burn; ++i) step();
  for (std::size_t i = 0; i < n; ++i) path[i] = step();
  return path;
}

struct AcfEstimate {
  std::vector<double> values;  // normalized to 1 at lag 0
  bool degenerate = false;     // constant input; values defined as all ones
};

// Biased sample autocorrelation of a real sequence after mean removal.
inline AcfEstimate empirical_autocorrelation(std::span<const double> path,
                                             std::size_t max_lag) {
  require(!path.empty(), "autocorrelation of an empty sequence is undefined");
  require(max_lag < path.size(), "autocorrelation lag out of range");
  const std::size_t n = path.size();
  double mean = 0.0;
  for (double v : path) mean += v;
  mean /= static_cast<double>(n);

  double var = 0.0;
  for (double v : path) var += (v - mean) * (v - mean);
  if (var <= 0.0) return AcfEstimate{std::vector<double>(max_lag + 1, 1.0), true};

  AcfEstimate out;
  out.values.resize(max_lag + 1);
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i)
      acc += (path[i] - mean) * (path[i + lag] - mean);
    out.values[lag] = acc / var;
  }
  return out;
}

}  // namespace fdsim
