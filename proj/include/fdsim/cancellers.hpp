#pragma once

// Canceller architectures and the staged cancellation pipeline.
//
// The three analog architectures differ only in where the cancelling signal
// picks up oscillator phase noise:
//   pre_mixer        cancelling path has its own upconverter: phi_cancel(t)
//   post_mixer       taps the transmitted RF signal: phi_si(t - tau)
//   baseband_analog  never passes through an RF chain: no rotation, and the
//                    cancelling signal is injected after downconversion
// The receive rotation exp(-j*phi_down) is common to the self-interference
// and (for pre/post) the cancelling signal, because both are combined at RF
// before the downconverter.

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "fdsim/core.hpp"
#include "fdsim/estimators.hpp"
#include "fdsim/parallel.hpp"
#include "fdsim/phasenoise.hpp"
#include "fdsim/rfchain.hpp"
#include "fdsim/rng.hpp"

namespace fdsim {

// Phase paths for the three oscillators of a scenario, one sample per signal
// sample. Oscillators sharing an LO group receive bit-identical paths.
struct OscillatorPaths {
  std::vector<double> si, cancel, down;
};

inline OscillatorPaths sample_oscillator_paths(const Scenario& scenario, std::size_t n,
                                               std::uint64_t trial_seed) {
  auto path_for = [&](const OscillatorConfig& osc) {
    PhaseNoiseSpec spec = osc.phase_noise;
    spec.seed = oscillator_path_seed(osc, trial_seed);
    return sample_phase_path(spec, n, scenario.sample_period_s);
  };
  return OscillatorPaths{path_for(scenario.tx_osc), path_for(scenario.cancel_osc),
                         path_for(scenario.rx_osc)};
}

// Transmit waveform for the self-interference path, scaled to p_si.
inline SignalBuffer make_si_waveform(const Scenario& scenario, std::uint64_t trial_seed) {
  const std::size_t n = static_cast<std::size_t>(scenario.n_samples);
  SignalBuffer x =
      scenario.si_signal.kind == SignalSpec::Kind::tone
          ? generate_tone(scenario.si_signal.freq_hz, n, scenario.sample_period_s)
          : generate_bandlimited(scenario.si_signal.bandwidth_hz, n, scenario.sample_period_s,
                                 Rng::derive(scenario.si_signal.seed, trial_seed));
  if (scenario.p_si != 1.0) x = scale_buffer(x, Complex{std::sqrt(scenario.p_si), 0.0});
  return x;
}

// Scales the earliest (line-of-sight) tap's power down by suppression_db.
inline ChannelModel passive_suppress(const ChannelModel& channel, double suppression_db) {
  require(suppression_db >= 0.0, "passive suppression must be non-negative");
  channel.validate();
  ChannelModel out = channel;
  out.taps.front().gain *= std::pow(10.0, -suppression_db / 20.0);
  return out;
}

namespace detail {

// Channel whose gains absorb their carrier rotations; convolves with
// carrier 0. Taps are kept in sample-quantized form.
inline ChannelModel absorb_carrier(const ChannelModel& channel, double carrier_hz, double T) {
  ChannelModel out;
  out.taps.reserve(channel.taps.size());
  for (const auto& tap : channel.taps) {
    const int dq = delay_to_samples(tap.delay_s, T);
    out.taps.push_back(
        ChannelTap{tap.gain * std::polar(1.0, -2.0 * std::numbers::pi * carrier_hz * dq * T),
                   samples_to_delay(dq, T)});
  }
  return out;
}

// Merge of two carrier-absorbed tap lists; taps on the same sample add, and
// vanishing taps are dropped (the result may be empty for an exact null).
inline ChannelModel merge_absorbed(const ChannelModel& a, const ChannelModel& b, double T) {
  std::vector<ChannelTap> taps;
  taps.insert(taps.end(), a.taps.begin(), a.taps.end());
  taps.insert(taps.end(), b.taps.begin(), b.taps.end());
  std::sort(taps.begin(), taps.end(),
            [](const ChannelTap& x, const ChannelTap& y) { return x.delay_s < y.delay_s; });
  ChannelModel out;
  double max_gain = 0.0;
  for (const auto& t : taps) {
    max_gain = std::max(max_gain, std::abs(t.gain));
    if (!out.taps.empty() &&
        delay_to_samples(out.taps.back().delay_s, T) == delay_to_samples(t.delay_s, T)) {
      out.taps.back().gain += t.gain;
    } else {
      out.taps.push_back(t);
    }
  }
  std::erase_if(out.taps, [&](const ChannelTap& t) {
    return std::abs(t.gain) <= 1e-14 * std::max(max_gain, 1.0);
  });
  return out;
}

// Cancelling channel for a fixed (rho, tau) estimate: every tap scaled by
// -rho and shifted by the delay error relative to the earliest tap.
inline ChannelModel fixed_cancelling_channel(const ChannelModel& si_channel,
                                             const ChannelEstimate& estimate, double T) {
  const int tau_q = delay_to_samples(estimate.tau_s, T);
  const int first_q = delay_to_samples(si_channel.taps.front().delay_s, T);
  const int shift = tau_q - first_q;
  ChannelModel out;
  out.taps.reserve(si_channel.taps.size());
  for (const auto& tap : si_channel.taps) {
    const int dq = delay_to_samples(tap.delay_s, T) + shift;
    require(dq >= 0, "estimated delay shifts a tap to negative time");
    out.taps.push_back(ChannelTap{-estimate.rho * tap.gain, samples_to_delay(dq, T)});
  }
  return out;
}

}  // namespace detail

// Baseband contribution of the cancelling signal at the receiver for a fixed
// (rho, tau) estimate, before the common receive rotation (which baseband
// cancellers bypass entirely).
inline SignalBuffer build_cancelling_signal(CancellerKind kind, const ChannelEstimate& estimate,
                                            const SignalBuffer& x_si,
                                            const OscillatorPaths& paths,
                                            const ChannelModel& channel, double carrier_hz) {
  const ChannelModel cancel_model =
      detail::fixed_cancelling_channel(channel, estimate, x_si.sample_period_s);
  switch (kind) {
    case CancellerKind::pre_mixer:
      require(paths.cancel.size() >= x_si.size(),
              "pre-mixer canceller needs a cancelling-path oscillator");
      return apply_phase_rotation(apply_channel(x_si, cancel_model, carrier_hz), paths.cancel,
                                  +1);
    case CancellerKind::post_mixer:
      require(paths.si.size() >= x_si.size(),
              "post-mixer canceller needs the transmit oscillator");
      return apply_channel(apply_phase_rotation(x_si, paths.si, +1), cancel_model, carrier_hz);
    case CancellerKind::baseband_analog:
      return apply_channel(x_si, cancel_model, carrier_hz);
  }
  throw UsageError("unknown canceller kind");
}

struct StageTrace {
  SignalBuffer before;
  SignalBuffer after;
  double power_before = 0.0;
  double power_after = 0.0;
  double cancellation_db = 0.0;
};

struct AnalogStageResult {
  SignalBuffer residual;
  StageTrace trace;
  ChannelEstimate estimate_used;  // trained mode: the fitted absolute estimate
  ChannelModel residual_model;    // carrier-absorbed; empty when the null is exact
  OscillatorPaths paths;
  SignalBuffer x_si;  // clean scaled baseband copy (digital reference)
};

// Simulates the channel output with per-tap transmit phase noise, adds the
// cancelling signal for the configured architecture, applies the receive
// rotation and thermal noise, and reports residual power.
inline AnalogStageResult run_analog_stage(const Scenario& scenario, std::uint64_t seed) {
  scenario.validate();
  const std::size_t n = static_cast<std::size_t>(scenario.n_samples);
  const double T = scenario.sample_period_s;
  const double fc = scenario.tx_osc.carrier_hz;
  const std::uint64_t noise_seed = Rng::derive(Rng::derive(scenario.noise.seed, 0xA11), seed);
  const NoiseSpec trial_noise{scenario.noise.thermal_variance, noise_seed};

  SignalBuffer x = make_si_waveform(scenario, seed);
  OscillatorPaths paths = sample_oscillator_paths(scenario, n, seed);

  SignalBuffer x_tx = apply_phase_rotation(x, paths.si, +1);
  SignalBuffer si_rf = apply_channel(x_tx, scenario.si_channel, fc);

  // Resolve the estimate and the cancelling channel the canceller applies.
  ChannelEstimate est = scenario.estimate.fixed;
  ChannelModel cancel_model;
  if (scenario.estimate.mode == EstimateSpec::Mode::trained) {
    SignalBuffer rx_train =
        add_thermal_noise(apply_phase_rotation(si_rf, paths.down, -1), trial_noise);
    const int d_max = scenario.si_channel.max_delay_samples(T) + 4;
    est = ls_single_tap(rx_train, x, static_cast<std::size_t>(scenario.training_len), 0, d_max);
    const int tau_q = delay_to_samples(est.tau_s, T);
    // The fitted gain absorbs the carrier rotation; undo it here so that
    // apply_channel re-applies it and the net tap is exactly -gain.
    const Complex tap_gain =
        -est.rho * std::polar(1.0, 2.0 * std::numbers::pi * fc * tau_q * T);
    cancel_model.taps = {ChannelTap{tap_gain, samples_to_delay(tau_q, T)}};
  } else {
    cancel_model = detail::fixed_cancelling_channel(scenario.si_channel, est, T);
  }

  SignalBuffer cancel = [&]() {
    switch (scenario.canceller) {
      case CancellerKind::pre_mixer:
        return apply_phase_rotation(apply_channel(x, cancel_model, fc), paths.cancel, +1);
      case CancellerKind::post_mixer:
        return apply_channel(x_tx, cancel_model, fc);
      case CancellerKind::baseband_analog:
        return apply_channel(x, cancel_model, fc);
    }
    throw UsageError("unknown canceller kind");
  }();

  SignalBuffer base;
  if (scenario.canceller == CancellerKind::baseband_analog) {
    base = add_buffers(apply_phase_rotation(si_rf, paths.down, -1), cancel);
  } else {
    base = apply_phase_rotation(add_buffers(si_rf, cancel), paths.down, -1);
  }
  SignalBuffer residual = add_thermal_noise(base, trial_noise);

  AnalogStageResult out;
  out.trace.power_before = power(si_rf);
  out.trace.power_after = power(residual);
  out.trace.cancellation_db = to_db(out.trace.power_before / out.trace.power_after);
  out.residual_model = detail::merge_absorbed(
      detail::absorb_carrier(scenario.si_channel, fc, T),
      detail::absorb_carrier(cancel_model, fc, T), T);
  out.estimate_used = est;
  out.trace.before = std::move(si_rf);
  out.trace.after = residual;
  out.residual = std::move(residual);
  out.paths = std::move(paths);
  out.x_si = std::move(x);
  return out;
}

struct DigitalStageResult {
  SignalBuffer residual;
  StageTrace trace;
};

// Subtracts the estimated residual channel convolved with the clean
// self-interference reference. An empty estimate subtracts nothing. The kind
// and seed are part of the stage interface for symmetry with the analog
// stage; the subtraction itself is architecture-independent.
inline DigitalStageResult run_digital_stage(const SignalBuffer& residual,
                                            const SignalBuffer& x_si,
                                            const ChannelModel& digital_estimate,
                                            CancellerKind /*kind*/, std::uint64_t /*seed*/) {
  DigitalStageResult out;
  if (digital_estimate.taps.empty()) {
    out.residual = residual;
  } else {
    out.residual = subtract_buffers(residual, apply_channel(x_si, digital_estimate, 0.0));
  }
  out.trace.power_before = power(residual);
  out.trace.power_after = power(out.residual);
  out.trace.cancellation_db = to_db(out.trace.power_before / out.trace.power_after);
  out.trace.before = residual;
  out.trace.after = out.residual;
  return out;
}

// One full pass: passive suppression, analog stage, optional digital stage.
inline ResidualReport run_cascade_single(const Scenario& scenario, double passive_db,
                                         std::uint64_t trial_seed) {
  Scenario scn = scenario;
  scn.si_channel = passive_suppress(scenario.si_channel, passive_db);

  AnalogStageResult analog = run_analog_stage(scn, trial_seed);

  ResidualReport rep;
  const double supp_ratio =
      scenario.si_channel.total_gain_sq() / scn.si_channel.total_gain_sq();
  rep.power_after_passive = analog.trace.power_before;
  rep.power_before = rep.power_after_passive * supp_ratio;
  rep.power_after_analog = analog.trace.power_after;

  double final_power = rep.power_after_analog;
  if (scenario.digital) {
    ChannelModel model;
    if (scenario.digital->mode == DigitalCancellerSpec::Mode::perfect) {
      model = analog.residual_model;
    } else {
      const int t_train = scenario.digital->training_len > 0 ? scenario.digital->training_len
                                                             : scenario.training_len;
      const auto taps =
          estimate_residual_channel(analog.residual, analog.x_si,
                                    static_cast<std::size_t>(t_train),
                                    scenario.digital->max_taps);
      for (const auto& tap : taps) model.taps.push_back(ChannelTap{tap.rho, tap.tau_s});
    }
    DigitalStageResult digital = run_digital_stage(analog.residual, analog.x_si, model,
                                                   scenario.canceller, trial_seed);
    rep.power_after_digital = digital.trace.power_after;
    final_power = digital.trace.power_after;
  }

  rep.passive_db = to_db(rep.power_before / rep.power_after_passive);
  rep.analog_db = to_db(rep.power_after_passive / rep.power_after_analog);
  if (rep.power_after_digital)
    rep.digital_db = to_db(rep.power_after_analog / *rep.power_after_digital);
  rep.total_db = to_db(rep.power_before / final_power);
  return rep;
}

// Trial-averaged cascade. Per-trial seeds derive from (seed, trial index);
// trials run concurrently and reduce in index order.
inline ResidualReport run_cascade(const Scenario& scenario, double passive_db, int trials,
                                  std::uint64_t seed) {
  require(trials >= 1, "at least one trial is required");
  std::vector<ResidualReport> reports(static_cast<std::size_t>(trials));
  detail::parallel_index(trials, [&](int t) {
    reports[static_cast<std::size_t>(t)] =
        run_cascade_single(scenario, passive_db, Rng::derive(seed, static_cast<std::uint64_t>(t)));
  });

  ResidualReport mean;
  bool has_digital = true;
  for (const auto& r : reports) {
    mean.power_before += r.power_before;
    mean.power_after_passive += r.power_after_passive;
    mean.power_after_analog += r.power_after_analog;
    if (r.power_after_digital)
      mean.power_after_digital = mean.power_after_digital.value_or(0.0) + *r.power_after_digital;
    else
      has_digital = false;
  }
  const double inv = 1.0 / static_cast<double>(trials);
  mean.power_before *= inv;
  mean.power_after_passive *= inv;
  mean.power_after_analog *= inv;
  if (has_digital && mean.power_after_digital)
    mean.power_after_digital = *mean.power_after_digital * inv;
  else
    mean.power_after_digital.reset();

  mean.passive_db = to_db(mean.power_before / mean.power_after_passive);
  mean.analog_db = to_db(mean.power_after_passive / mean.power_after_analog);
  double final_power = mean.power_after_analog;
  if (mean.power_after_digital) {
    mean.digital_db = to_db(mean.power_after_analog / *mean.power_after_digital);
    final_power = *mean.power_after_digital;
  }
  mean.total_db = to_db(mean.power_before / final_power);
  return mean;
}

}  // namespace fdsim
