#pragma once

// Shared domain types for the full-duplex self-interference toolkit:
// complex-baseband sample buffers, channel taps, oscillator / noise
// descriptions, and the scenario and report records passed between modules.
// All types are immutable value types once constructed and safe to share
// across worker threads.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fdsim/rng.hpp"

namespace fdsim {

using Complex = std::complex<double>;

// Precondition / parameter violations.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Inputs that are structurally valid but make the requested computation
// meaningless (all-zero reference signal, collinear regressors, ...).
struct DegenerateInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw UsageError(msg);
}

inline double to_db(double ratio) { return 10.0 * std::log10(ratio); }
inline double from_db(double db) { return std::pow(10.0, db / 10.0); }

// ---------------------------------------------------------------------------
// Signal buffers

// Uniformly sampled complex baseband sequence. `leading_invalid` marks a
// zero-filled prefix where delayed history was unavailable; those samples are
// excluded from power statistics.
struct SignalBuffer {
  std::vector<Complex> samples;
  double sample_period_s = 0.0;
  std::size_t leading_invalid = 0;

  std::size_t size() const { return samples.size(); }
};

inline SignalBuffer make_buffer(std::vector<Complex> samples, double sample_period_s,
                                std::size_t leading_invalid = 0) {
  require(!samples.empty(), "signal buffer must be non-empty");
  require(sample_period_s > 0.0, "sample period must be positive");
  require(leading_invalid < samples.size(), "invalid prefix covers the whole buffer");
  for (const Complex& s : samples)
    require(std::isfinite(s.real()) && std::isfinite(s.imag()),
            "signal samples must be finite");
  return SignalBuffer{std::move(samples), sample_period_s, leading_invalid};
}

// Mean |s|^2 over the valid region.
inline double power(const SignalBuffer& buffer) {
  require(!buffer.samples.empty(), "power of an empty buffer is undefined");
  require(buffer.leading_invalid < buffer.size(), "no valid samples in buffer");
  double acc = 0.0;
  for (std::size_t i = buffer.leading_invalid; i < buffer.size(); ++i)
    acc += std::norm(buffer.samples[i]);
  return acc / static_cast<double>(buffer.size() - buffer.leading_invalid);
}

// Delays are used at integer sample resolution throughout; sub-sample
// interpolation is out of scope.
inline int delay_to_samples(double delay_s, double sample_period_s) {
  require(delay_s >= 0.0, "delay must be non-negative");
  require(sample_period_s > 0.0, "sample period must be positive");
  return static_cast<int>(std::llround(delay_s / sample_period_s));
}

inline double samples_to_delay(int samples, double sample_period_s) {
  require(samples >= 0, "delay in samples must be non-negative");
  return samples * sample_period_s;
}

// ---------------------------------------------------------------------------
// Oscillators and phase noise

struct PhaseNoiseWhite {};

struct PhaseNoiseAr1 {
  double coherence_time_s = 0.0;  // R(tau) = exp(-|tau|/coherence_time)
};

// Correlation values at explicit lags; 1 at lag 0, linear between entries,
// zero beyond the last entry.
struct PhaseNoiseTable {
  std::vector<double> lags_s;
  std::vector<double> correlations;
};

using PhaseNoiseModel = std::variant<PhaseNoiseWhite, PhaseNoiseAr1, PhaseNoiseTable>;

struct PhaseNoiseSpec {
  double variance_rad2 = 0.0;
  PhaseNoiseModel model = PhaseNoiseWhite{};
  std::uint64_t seed = 0;

  void validate() const {
    require(std::isfinite(variance_rad2) && variance_rad2 >= 0.0,
            "phase-noise variance must be finite and >= 0");
    if (const auto* ar1 = std::get_if<PhaseNoiseAr1>(&model)) {
      require(ar1->coherence_time_s > 0.0, "AR(1) coherence time must be positive");
    } else if (const auto* table = std::get_if<PhaseNoiseTable>(&model)) {
      require(!table->lags_s.empty(), "correlation table must be non-empty");
      require(table->lags_s.size() == table->correlations.size(),
              "correlation table lags/values length mismatch");
      require(table->lags_s.front() == 0.0 && table->correlations.front() == 1.0,
              "correlation table must start at lag 0 with value 1");
      for (std::size_t i = 0; i < table->lags_s.size(); ++i) {
        require(std::abs(table->correlations[i]) <= 1.0,
                "correlation values must lie in [-1, 1]");
        if (i > 0)
          require(table->lags_s[i] > table->lags_s[i - 1],
                  "correlation table lags must be strictly increasing");
      }
    }
  }

  // Closed-form R(tau) of the configured model (table entries interpolated
  // linearly, zero beyond the last lag).
  double correlation_at(double lag_s) const {
    const double lag = std::abs(lag_s);
    if (std::holds_alternative<PhaseNoiseWhite>(model)) {
      return lag == 0.0 ? 1.0 : 0.0;
    }
    if (const auto* ar1 = std::get_if<PhaseNoiseAr1>(&model)) {
      return std::exp(-lag / ar1->coherence_time_s);
    }
    const auto& table = std::get<PhaseNoiseTable>(model);
    if (lag >= table.lags_s.back()) return lag == table.lags_s.back() ? table.correlations.back() : 0.0;
    auto it = std::upper_bound(table.lags_s.begin(), table.lags_s.end(), lag);
    const std::size_t hi = static_cast<std::size_t>(it - table.lags_s.begin());
    if (hi == 0) return table.correlations.front();
    const double t = (lag - table.lags_s[hi - 1]) / (table.lags_s[hi] - table.lags_s[hi - 1]);
    return table.correlations[hi - 1] + t * (table.correlations[hi] - table.correlations[hi - 1]);
  }
};

// Oscillators with equal lo_group share one phase-noise sample path (matched
// LOs); distinct groups are statistically independent.
struct OscillatorConfig {
  double carrier_hz = 0.0;
  PhaseNoiseSpec phase_noise;
  int lo_group = 0;

  void validate() const {
    require(carrier_hz > 0.0, "carrier frequency must be positive");
    phase_noise.validate();
  }
};

// Seed of the shared path for this oscillator's LO group. Equal
// (lo_group, phase_noise.seed) pairs give identical paths.
inline std::uint64_t oscillator_path_seed(const OscillatorConfig& osc,
                                          std::uint64_t trial_seed) {
  const std::uint64_t group_seed =
      Rng::derive(osc.phase_noise.seed, 0x6f5cu + static_cast<std::uint64_t>(osc.lo_group));
  return Rng::derive(group_seed, trial_seed);
}

// ---------------------------------------------------------------------------
// Channels

struct ChannelTap {
  Complex gain{0.0, 0.0};
  double delay_s = 0.0;
};

struct ChannelModel {
  std::vector<ChannelTap> taps;  // sorted by delay, at least one tap

  void validate() const {
    require(!taps.empty(), "channel must have at least one tap");
    for (std::size_t i = 0; i < taps.size(); ++i) {
      require(std::isfinite(taps[i].gain.real()) && std::isfinite(taps[i].gain.imag()),
              "tap gain must be finite");
      require(taps[i].delay_s >= 0.0, "tap delay must be non-negative");
      if (i > 0)
        require(taps[i].delay_s >= taps[i - 1].delay_s, "taps must be sorted by delay");
    }
  }

  double total_gain_sq() const {
    double acc = 0.0;
    for (const auto& t : taps) acc += std::norm(t.gain);
    return acc;
  }

  int max_delay_samples(double sample_period_s) const {
    int d = 0;
    for (const auto& t : taps) d = std::max(d, delay_to_samples(t.delay_s, sample_period_s));
    return d;
  }
};

// Single-tap estimate of a channel: estimated gain `rho` relative to the
// reference tap (rho = 1, tau = true delay is the perfect estimate; the
// estimators return absolute gains, i.e. measured against a unit reference).
struct ChannelEstimate {
  Complex rho{1.0, 0.0};
  double tau_s = 0.0;
};

struct NoiseSpec {
  double thermal_variance = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(std::isfinite(thermal_variance) && thermal_variance >= 0.0,
            "thermal variance must be finite and >= 0");
  }
};

// ---------------------------------------------------------------------------
// Scenario description

enum class CancellerKind { pre_mixer, post_mixer, baseband_analog };

inline const char* to_string(CancellerKind kind) {
  switch (kind) {
    case CancellerKind::pre_mixer: return "pre_mixer";
    case CancellerKind::post_mixer: return "post_mixer";
    case CancellerKind::baseband_analog: return "baseband_analog";
  }
  return "?";
}

// Transmit waveform used for the self-interference path.
struct SignalSpec {
  enum class Kind { tone, bandlimited };
  Kind kind = Kind::tone;
  double freq_hz = 0.0;       // tone
  double bandwidth_hz = 0.0;  // bandlimited
  std::uint64_t seed = 0;     // bandlimited phases
};

// How the analog canceller obtains its channel estimate: a fixed (rho, tau)
// detuning of the true channel, or a least-squares estimate trained on the
// first `training_len` received samples.
struct EstimateSpec {
  enum class Mode { fixed, trained };
  Mode mode = Mode::fixed;
  ChannelEstimate fixed{};
};

struct DigitalCancellerSpec {
  enum class Mode { perfect, fitted };
  Mode mode = Mode::perfect;
  int max_taps = 2;
  int training_len = 0;  // 0: use the scenario training length
};

struct Scenario {
  SignalSpec si_signal;
  ChannelModel si_channel;
  std::optional<ChannelModel> signal_channel;
  OscillatorConfig tx_osc, cancel_osc, rx_osc;
  CancellerKind canceller = CancellerKind::pre_mixer;
  EstimateSpec estimate;
  std::optional<DigitalCancellerSpec> digital;
  NoiseSpec noise;
  double p_si = 1.0;
  double p_signal = 0.0;
  int n_samples = 0;
  int training_len = 1;
  double sample_period_s = 0.0;
  double passive_db = 0.0;  // suppression applied to the earliest tap

  void validate() const {
    require(sample_period_s > 0.0, "sample period must be positive");
    require(n_samples > 0, "n_samples must be positive");
    require(training_len > 0, "training length must be positive");
    require(n_samples >= training_len, "n_samples must cover the training length");
    require(p_si >= 0.0 && p_signal >= 0.0, "powers must be non-negative");
    require(passive_db >= 0.0, "passive suppression must be non-negative");
    si_channel.validate();
    if (signal_channel) signal_channel->validate();
    tx_osc.validate();
    cancel_osc.validate();
    rx_osc.validate();
    noise.validate();
    require(tx_osc.carrier_hz == cancel_osc.carrier_hz &&
                tx_osc.carrier_hz == rx_osc.carrier_hz,
            "up- and downconversion carriers must match");
    require(estimate.fixed.tau_s >= 0.0, "estimated delay must be non-negative");
    if (digital) require(digital->max_taps >= 1, "digital canceller needs at least one tap");

    // Oscillators sharing an LO group share one sample path, which only
    // makes sense if their phase-noise descriptions agree.
    auto same_model = [](const PhaseNoiseModel& a, const PhaseNoiseModel& b) {
      if (a.index() != b.index()) return false;
      if (const auto* ar1 = std::get_if<PhaseNoiseAr1>(&a))
        return ar1->coherence_time_s == std::get<PhaseNoiseAr1>(b).coherence_time_s;
      if (const auto* tab = std::get_if<PhaseNoiseTable>(&a)) {
        const auto& other = std::get<PhaseNoiseTable>(b);
        return tab->lags_s == other.lags_s && tab->correlations == other.correlations;
      }
      return true;
    };
    auto same_spec = [&](const PhaseNoiseSpec& a, const PhaseNoiseSpec& b) {
      return a.variance_rad2 == b.variance_rad2 && a.seed == b.seed &&
             same_model(a.model, b.model);
    };
    const OscillatorConfig* oscs[3] = {&tx_osc, &cancel_osc, &rx_osc};
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j)
        if (oscs[i]->lo_group == oscs[j]->lo_group)
          require(same_spec(oscs[i]->phase_noise, oscs[j]->phase_noise),
                  "oscillators in one LO group must have identical phase-noise specs");
  }
};

// ---------------------------------------------------------------------------
// Results

// Per-stage residual powers and cancellation amounts. Cancellation of a stage
// is 10*log10(power before / power after that stage).
struct ResidualReport {
  double power_before = 0.0;
  double power_after_passive = 0.0;
  double power_after_analog = 0.0;
  std::optional<double> power_after_digital;
  double passive_db = 0.0;
  double analog_db = 0.0;
  std::optional<double> digital_db;
  double total_db = 0.0;
};

}  // namespace fdsim
