#pragma once

// Complex-baseband model of the transmit -> channel -> receive path. Up- and
// downconversion are represented entirely at baseband: a tap at delay D
// contributes gain * exp(-j*2*pi*fc*D) * x[i - D/T], and oscillator phase
// noise appears as the multiplicative rotation exp(+/- j*phi[i]). Carrier
// phases use the sample-quantized delay so they compose exactly with the
// integer shifts.

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "fdsim/core.hpp"
#include "fdsim/rng.hpp"

namespace fdsim {

// Unit-power complex exponential: samples[i] = exp(j*2*pi*f*i*T).
inline SignalBuffer generate_tone(double freq_hz, std::size_t n, double sample_period_s) {
  require(n > 0, "tone length must be positive");
  require(sample_period_s > 0.0, "sample period must be positive");
  std::vector<Complex> samples(n);
  const double w = 2.0 * std::numbers::pi * freq_hz * sample_period_s;
  for (std::size_t i = 0; i < n; ++i) samples[i] = std::polar(1.0, w * static_cast<double>(i));
  return SignalBuffer{std::move(samples), sample_period_s, 0};
}

namespace detail {

inline constexpr int kBandlimitedTones = 64;

// Tone table used by generate_bandlimited for a given record length:
// a half-offset comb over [-B/2, B/2], snapped to the length-n DFT grid when
// the record is long enough to resolve the comb.
inline std::vector<double> bandlimited_frequencies(double bandwidth_hz, std::size_t n,
                                                   double sample_period_s) {
  const int k_tones = kBandlimitedTones;
  const double grid = 1.0 / (static_cast<double>(n) * sample_period_s);
  const bool snap = bandwidth_hz * static_cast<double>(n) * sample_period_s >=
                    2.0 * static_cast<double>(k_tones);
  std::vector<double> freqs(static_cast<std::size_t>(k_tones));
  for (int k = 0; k < k_tones; ++k) {
    double f = -bandwidth_hz / 2.0 + (k + 0.5) * bandwidth_hz / k_tones;
    if (snap) f = std::round(f / grid) * grid;
    freqs[static_cast<std::size_t>(k)] = f;
  }
  return freqs;
}

}  // namespace detail

// Zero-mean unit-power signal with a flat spectrum on [-B/2, B/2]: an equal
// mix of random-phase tones. Tone frequencies snap to the length-n DFT grid
// when the record is long enough, which makes the realized power exactly one
// and keeps empirical autocorrelations free of cross-tone leakage.
inline SignalBuffer generate_bandlimited(double bandwidth_hz, std::size_t n,
                                         double sample_period_s, std::uint64_t seed) {
  require(n > 0, "signal length must be positive");
  require(sample_period_s > 0.0, "sample period must be positive");
  require(bandwidth_hz >= 0.0, "bandwidth must be non-negative");
  require(bandwidth_hz <= 1.0 / sample_period_s, "bandwidth exceeds the Nyquist range");

  Rng rng(seed);
  if (bandwidth_hz == 0.0) {
    const Complex c = std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform());
    return SignalBuffer{std::vector<Complex>(n, c), sample_period_s, 0};
  }

  const std::vector<double> freqs =
      detail::bandlimited_frequencies(bandwidth_hz, n, sample_period_s);
  std::vector<Complex> acc(n, Complex{0.0, 0.0});
  for (double f : freqs) {
    const Complex step = std::polar(1.0, 2.0 * std::numbers::pi * f * sample_period_s);
    Complex ph = std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform());
    for (std::size_t i = 0; i < n; ++i) {
      acc[i] += ph;
      ph *= step;
      if ((i & 4095u) == 4095u) ph /= std::abs(ph);  // keep the phasor on the circle
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(freqs.size()));
  for (Complex& c : acc) c *= scale;
  return SignalBuffer{std::move(acc), sample_period_s, 0};
}

// Closed-form complex autocorrelation R_x(lag) = E[x(t+lag) x*(t)] of the
// waveforms produced above, at an integer sample lag.
inline Complex waveform_autocorrelation(const SignalSpec& spec, int lag_samples, std::size_t n,
                                        double sample_period_s) {
  const double u = lag_samples * sample_period_s;
  if (spec.kind == SignalSpec::Kind::tone)
    return std::polar(1.0, 2.0 * std::numbers::pi * spec.freq_hz * u);
  if (spec.bandwidth_hz == 0.0) return Complex{1.0, 0.0};
  Complex acc{0.0, 0.0};
  const auto freqs = detail::bandlimited_frequencies(spec.bandwidth_hz, n, sample_period_s);
  for (double f : freqs) acc += std::polar(1.0, 2.0 * std::numbers::pi * f * u);
  return acc / static_cast<double>(freqs.size());
}

// out[i] = sum over taps of gain * exp(-j*2*pi*fc*Dq*T) * in[i - Dq], with
// delays quantized to samples. Leading samples without full history are
// zero-filled and flagged via leading_invalid.
inline SignalBuffer apply_channel(const SignalBuffer& signal, const ChannelModel& channel,
                                  double carrier_hz) {
  channel.validate();
  require(!signal.samples.empty(), "cannot apply a channel to an empty buffer");
  const std::size_t n = signal.size();
  const double T = signal.sample_period_s;

  int max_d = 0;
  std::vector<Complex> out(n, Complex{0.0, 0.0});
  for (const auto& tap : channel.taps) {
    const int d = delay_to_samples(tap.delay_s, T);
    require(static_cast<std::size_t>(d) < n, "tap delay reaches past the buffer");
    max_d = std::max(max_d, d);
    const Complex w =
        tap.gain * std::polar(1.0, -2.0 * std::numbers::pi * carrier_hz * d * T);
    for (std::size_t i = static_cast<std::size_t>(d); i < n; ++i)
      out[i] += w * signal.samples[i - d];
  }
  return SignalBuffer{std::move(out), T,
                      signal.leading_invalid + static_cast<std::size_t>(max_d)};
}

// samples[i] * exp(j * sign * phi[i]); power is preserved.
inline SignalBuffer apply_phase_rotation(const SignalBuffer& signal,
                                         std::span<const double> phase_path, int sign) {
  require(sign == 1 || sign == -1, "rotation sign must be +1 or -1");
  require(phase_path.size() >= signal.size(),
          "phase path shorter than the signal buffer");
  std::vector<Complex> out(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i)
    out[i] = signal.samples[i] * std::polar(1.0, sign * phase_path[i]);
  return SignalBuffer{std::move(out), signal.sample_period_s, signal.leading_invalid};
}

// Adds circularly symmetric complex Gaussian noise with per-sample variance
// noise.thermal_variance.
inline SignalBuffer add_thermal_noise(const SignalBuffer& signal, const NoiseSpec& noise) {
  noise.validate();
  if (noise.thermal_variance == 0.0) return signal;
  Rng rng(noise.seed);
  std::vector<Complex> out(signal.samples);
  for (Complex& c : out) c += rng.complex_gaussian(noise.thermal_variance);
  return SignalBuffer{std::move(out), signal.sample_period_s, signal.leading_invalid};
}

// Measurement dynamic-range cap: an additive Gaussian floor at
// power(clean) * 10^(-range_db/10). Infinite range disables the cap. The cap
// models the finite SNR of the measuring instrument, not saturation.
inline SignalBuffer apply_dynamic_range(const SignalBuffer& signal, const SignalBuffer& clean,
                                        double range_db, std::uint64_t seed) {
  require(signal.size() == clean.size(), "signal/clean buffer length mismatch");
  if (std::isinf(range_db)) return signal;
  require(range_db > 0.0, "dynamic range must be positive");
  const double floor_var = power(clean) * std::pow(10.0, -range_db / 10.0);
  Rng rng(seed);
  std::vector<Complex> out(signal.samples);
  for (Complex& c : out) c += rng.complex_gaussian(floor_var);
  return SignalBuffer{std::move(out), signal.sample_period_s, signal.leading_invalid};
}

// Elementwise sum; the combined invalid prefix is the larger of the two.
inline SignalBuffer add_buffers(const SignalBuffer& a, const SignalBuffer& b) {
  require(a.size() == b.size(), "buffer length mismatch");
  std::vector<Complex> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.samples[i] + b.samples[i];
  return SignalBuffer{std::move(out), a.sample_period_s,
                      std::max(a.leading_invalid, b.leading_invalid)};
}

inline SignalBuffer subtract_buffers(const SignalBuffer& a, const SignalBuffer& b) {
  require(a.size() == b.size(), "buffer length mismatch");
  std::vector<Complex> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.samples[i] - b.samples[i];
  return SignalBuffer{std::move(out), a.sample_period_s,
                      std::max(a.leading_invalid, b.leading_invalid)};
}

inline SignalBuffer scale_buffer(const SignalBuffer& a, Complex factor) {
  std::vector<Complex> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = factor * a.samples[i];
  return SignalBuffer{std::move(out), a.sample_period_s, a.leading_invalid};
}

}  // namespace fdsim
