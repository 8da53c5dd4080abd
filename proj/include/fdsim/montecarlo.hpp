#pragma once

// Trial orchestration: the split-path cancellation experiment, trial-averaged
// cascade statistics, parameter sweeps with side-by-side closed-form
// predictions, and the closed-form prediction helper itself.

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fdsim/analytic.hpp"
#include "fdsim/cancellers.hpp"
#include "fdsim/core.hpp"
#include "fdsim/estimators.hpp"
#include "fdsim/parallel.hpp"
#include "fdsim/phasenoise.hpp"
#include "fdsim/rfchain.hpp"
#include "fdsim/rng.hpp"

namespace fdsim {

// ---------------------------------------------------------------------------
// Split-path cancellation experiment
//
// One tone source is split into two wired branches observed coherently; the
// delayed second branch, scaled by the least-squares h_c(d), cancels the
// first. Both branches ride the same source phase path evaluated at their
// wire delays, so the residual isolates the source's phase-noise
// decorrelation over the branch delay d.

struct MimicConfig {
  PhaseNoiseSpec source_phase;
  Complex h1{1.0, 0.0};
  Complex h2{1.0, 0.0};
  double delta1_s = 0.0;
  double delta2_s = 0.0;
  double tone_freq_hz = 1e6;
  double carrier_hz = 2.4e9;
  double sample_period_s = 21.7e-9;
  double sigma_noise_sq = 0.0;
  std::optional<double> dynamic_range_db;  // measurement floor on the observed branch
  std::size_t n = 1u << 20;

  void validate() const {
    source_phase.validate();
    require(sample_period_s > 0.0, "sample period must be positive");
    require(carrier_hz > 0.0, "carrier frequency must be positive");
    require(delta1_s >= 0.0 && delta2_s >= 0.0, "wire delays must be non-negative");
    require(sigma_noise_sq >= 0.0, "noise variance must be non-negative");
    require(n > 0, "record length must be positive");
    if (dynamic_range_db) require(*dynamic_range_db > 0.0, "dynamic range must be positive");
  }
};

// Returns the measured cancellation 10*log10(power(y1) / power(residual)) at
// branch delay d.
inline double simulate_mimic_experiment(const MimicConfig& config, int d, std::uint64_t seed) {
  config.validate();
  require(d >= 0, "branch delay must be non-negative");
  const double T = config.sample_period_s;
  const std::size_t n = config.n;
  const int d1 = delay_to_samples(config.delta1_s, T);
  const int d2 = delay_to_samples(config.delta2_s, T);
  require(static_cast<std::size_t>(d) + static_cast<std::size_t>(std::max(d1, d2)) + 16 < n,
          "record too short for the requested delay");

  PhaseNoiseSpec path_spec = config.source_phase;
  path_spec.seed = Rng::derive(config.source_phase.seed, Rng::derive(seed, 0));
  const std::vector<double> phi = sample_phase_path(path_spec, n, T);

  const double w = 2.0 * std::numbers::pi * config.tone_freq_hz * T;
  const double wc_plus_w = 2.0 * std::numbers::pi * (config.carrier_hz + config.tone_freq_hz);
  const Complex a1 = config.h1 * std::polar(1.0, -wc_plus_w * d1 * T);
  const Complex a2 = config.h2 * std::polar(1.0, -wc_plus_w * d2 * T);

  auto branch = [&](const Complex& a, int wire_d) {
    std::vector<Complex> samples(n, Complex{0.0, 0.0});
    for (std::size_t i = static_cast<std::size_t>(wire_d); i < n; ++i)
      samples[i] = a * std::polar(1.0, w * static_cast<double>(i) +
                                           phi[i - static_cast<std::size_t>(wire_d)]);
    return SignalBuffer{std::move(samples), T, static_cast<std::size_t>(wire_d)};
  };
  SignalBuffer y1 = branch(a1, d1);
  SignalBuffer y2 = branch(a2, d2);

  if (config.sigma_noise_sq > 0.0) {
    y1 = add_thermal_noise(y1, NoiseSpec{config.sigma_noise_sq, Rng::derive(seed, 1)});
    y2 = add_thermal_noise(y2, NoiseSpec{config.sigma_noise_sq, Rng::derive(seed, 2)});
  }
  if (config.dynamic_range_db) {
    // The observed branch is measured through the instrument's finite SNR.
    SignalBuffer clean = branch(a1, d1);
    y1 = apply_dynamic_range(y1, clean, *config.dynamic_range_db, Rng::derive(seed, 3));
  }

  const std::size_t start =
      std::max(static_cast<std::size_t>(d) + y2.leading_invalid, y1.leading_invalid);
  const Complex hc = estimate_scaling(y1, y2, d, n - start);

  std::vector<Complex> res(n, Complex{0.0, 0.0});
  for (std::size_t i = start; i < n; ++i)
    res[i] = y1.samples[i] - hc * y2.samples[i - static_cast<std::size_t>(d)];
  const SignalBuffer residual{std::move(res), T, start};
  return to_db(power(y1) / power(residual));
}

// ---------------------------------------------------------------------------
// Closed-form prediction for a scenario
//
// Mirrors the analytic residual expressions using the scenario's own model
// autocorrelations at the quantized lags. Cross-tap terms are taken as zero,
// which holds when tap phases are independent or the waveform decorrelates
// across the tap spacing.

struct ScenarioPrediction {
  double power_before = 0.0;
  double est_term = 0.0;    // E|h_res * x|^2 left by the analog estimate
  double phase_term = 0.0;  // architecture's phase-noise floor
  double after_analog = 0.0;
  std::optional<double> after_digital;
  double analog_db = 0.0;
  double total_db = 0.0;
};

inline ScenarioPrediction predict_residuals(const Scenario& scenario, double passive_db) {
  scenario.validate();
  const double T = scenario.sample_period_s;
  const double fc = scenario.tx_osc.carrier_hz;
  const ChannelModel channel = passive_suppress(scenario.si_channel, passive_db);
  const double gain_sq = channel.total_gain_sq();
  const double p = scenario.p_si;
  const double s_si = scenario.tx_osc.phase_noise.variance_rad2;
  const double s_cancel = scenario.cancel_osc.phase_noise.variance_rad2;
  const double s_down = scenario.rx_osc.phase_noise.variance_rad2;
  const bool matched_tx_cancel = scenario.tx_osc.lo_group == scenario.cancel_osc.lo_group;
  const bool matched_cancel_rx = scenario.cancel_osc.lo_group == scenario.rx_osc.lo_group;

  const int first_q = delay_to_samples(channel.taps.front().delay_s, T);
  const int tau_q = scenario.estimate.mode == EstimateSpec::Mode::fixed
                        ? delay_to_samples(scenario.estimate.fixed.tau_s, T)
                        : first_q;
  const int shift = tau_q - first_q;

  // Estimate-error term E|h_res * x|^2.
  double est_term = 0.0;
  if (scenario.estimate.mode == EstimateSpec::Mode::fixed) {
    const Complex rho = scenario.estimate.fixed.rho;
    const Complex rx = waveform_autocorrelation(scenario.si_signal, shift,
                                                static_cast<std::size_t>(scenario.n_samples), T);
    const Complex carrier = std::polar(1.0, 2.0 * std::numbers::pi * fc * shift * T);
    const double cross = 2.0 * std::real(std::conj(rho) * carrier * rx);
    est_term = p * gain_sq * (1.0 + std::norm(rho) - cross);
  } else {
    est_term = scenario.noise.thermal_variance / static_cast<double>(scenario.training_len);
  }

  // Phase-noise floor per architecture.
  auto r_phi = [&](double lag_s) { return scenario.tx_osc.phase_noise.correlation_at(lag_s); };
  double phase_term = 0.0;
  switch (scenario.canceller) {
    case CancellerKind::pre_mixer:
      for (const auto& tap : channel.taps) {
        const double gq = std::norm(tap.gain);
        const double lag = samples_to_delay(delay_to_samples(tap.delay_s, T), T);
        phase_term += matched_tx_cancel ? 2.0 * gq * s_si * (1.0 - r_phi(lag))
                                        : gq * (s_si + s_cancel);
      }
      break;
    case CancellerKind::post_mixer:
      for (const auto& tap : channel.taps) {
        const double gq = std::norm(tap.gain);
        const double lag = std::abs(shift) * T;
        phase_term += 2.0 * gq * s_si * (1.0 - r_phi(lag));
      }
      break;
    case CancellerKind::baseband_analog:
      phase_term = gain_sq * (s_si + s_down);
      break;
  }
  phase_term *= p;

  ScenarioPrediction out;
  out.power_before = p * gain_sq;
  out.est_term = est_term;
  out.phase_term = phase_term;
  out.after_analog = est_term + phase_term + scenario.noise.thermal_variance;
  out.analog_db = to_db(out.power_before / out.after_analog);
  double final_power = out.after_analog;
  if (scenario.digital) {
    // Digital estimate errors are training-limited and negligible next to the
    // floors modeled here, so both digital modes predict alike. The rotation
    // coupling vanishes when the cancelling and receive chains share an LO.
    double coupling = 0.0;
    if (scenario.canceller == CancellerKind::pre_mixer && !matched_cancel_rx)
      coupling = est_term * (s_cancel + s_down);
    if (scenario.canceller == CancellerKind::post_mixer)
      coupling = est_term * (s_si + s_down);
    out.after_digital = phase_term + coupling + scenario.noise.thermal_variance;
    final_power = *out.after_digital;
  }
  out.total_db = to_db(out.power_before / final_power);
  return out;
}

// ---------------------------------------------------------------------------
// Trial statistics

struct TrialStats {
  ResidualReport mean;
  double stderr_total_db = 0.0;
  double stderr_analog_db = 0.0;
  double stderr_digital_db = 0.0;
  int trials = 1;
};

// Trial-mean of single-pass cascades with per-trial derived seeds. Standard
// errors are computed over per-trial dB values (samples within a trial are
// correlated through the shared phase paths, trials are not).
inline TrialStats run_trials(const Scenario& scenario, int trials, std::uint64_t seed) {
  require(trials >= 1, "at least one trial is required");
  std::vector<ResidualReport> reports(static_cast<std::size_t>(trials));
  detail::parallel_index(trials, [&](int t) {
    reports[static_cast<std::size_t>(t)] = run_cascade_single(
        scenario, scenario.passive_db, Rng::derive(seed, static_cast<std::uint64_t>(t)));
  });

  TrialStats stats;
  stats.trials = trials;
  bool has_digital = true;
  for (const auto& r : reports) {
    stats.mean.power_before += r.power_before;
    stats.mean.power_after_passive += r.power_after_passive;
    stats.mean.power_after_analog += r.power_after_analog;
    if (r.power_after_digital)
      stats.mean.power_after_digital =
          stats.mean.power_after_digital.value_or(0.0) + *r.power_after_digital;
    else
      has_digital = false;
  }
  const double inv = 1.0 / static_cast<double>(trials);
  stats.mean.power_before *= inv;
  stats.mean.power_after_passive *= inv;
  stats.mean.power_after_analog *= inv;
  if (has_digital && stats.mean.power_after_digital)
    stats.mean.power_after_digital = *stats.mean.power_after_digital * inv;
  else
    stats.mean.power_after_digital.reset();

  stats.mean.passive_db = to_db(stats.mean.power_before / stats.mean.power_after_passive);
  stats.mean.analog_db = to_db(stats.mean.power_after_passive / stats.mean.power_after_analog);
  double final_power = stats.mean.power_after_analog;
  if (stats.mean.power_after_digital) {
    stats.mean.digital_db = to_db(stats.mean.power_after_analog / *stats.mean.power_after_digital);
    final_power = *stats.mean.power_after_digital;
  }
  stats.mean.total_db = to_db(stats.mean.power_before / final_power);

  auto stderr_of = [&](auto getter) {
    if (trials < 2) return 0.0;
    double mean = 0.0;
    for (const auto& r : reports) mean += getter(r);
    mean /= trials;
    double ss = 0.0;
    for (const auto& r : reports) {
      const double d = getter(r) - mean;
      ss += d * d;
    }
    return std::sqrt(ss / (trials - 1)) / std::sqrt(static_cast<double>(trials));
  };
  stats.stderr_total_db = stderr_of([](const ResidualReport& r) { return r.total_db; });
  stats.stderr_analog_db = stderr_of([](const ResidualReport& r) { return r.analog_db; });
  if (has_digital)
    stats.stderr_digital_db =
        stderr_of([](const ResidualReport& r) { return r.digital_db.value_or(0.0); });
  return stats;
}

// ---------------------------------------------------------------------------
// Parameter sweeps

enum class SweepAxis {
  sigma_phi_sq,
  mimic_delay,
  rho,
  passive_db,
  t_train,
  wideband_bands,
  mimo_tx,
};

inline SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "sigma_phi_sq") return SweepAxis::sigma_phi_sq;
  if (name == "d" || name == "mimic_delay") return SweepAxis::mimic_delay;
  if (name == "rho") return SweepAxis::rho;
  if (name == "passive_db") return SweepAxis::passive_db;
  if (name == "t_train") return SweepAxis::t_train;
  if (name == "K" || name == "wideband_bands") return SweepAxis::wideband_bands;
  if (name == "M" || name == "mimo_tx") return SweepAxis::mimo_tx;
  throw UsageError("unknown sweep axis: " + name);
}

inline const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::sigma_phi_sq: return "sigma_phi_sq";
    case SweepAxis::mimic_delay: return "d";
    case SweepAxis::rho: return "rho";
    case SweepAxis::passive_db: return "passive_db";
    case SweepAxis::t_train: return "t_train";
    case SweepAxis::wideband_bands: return "K";
    case SweepAxis::mimo_tx: return "M";
  }
  return "?";
}

struct SweepRow {
  double value = 0.0;
  ResidualReport report;
  double sim_db = 0.0;
  double sim_stderr_db = 0.0;
  double analytic_db = 0.0;
};

struct RunSetup {
  Scenario scenario;
  std::optional<MimicConfig> mimic;
};

namespace detail {

// Wideband / MIMO rows measure the abstracted model's residual power
// directly; `sim_db` and `analytic_db` are absolute powers in dB for these
// axes and cancellation ratios for the cascade axes.
inline SweepRow signal_model_row(const Scenario& scenario, SweepAxis axis, double value,
                                 int trials, std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(scenario.n_samples);
  const double T = scenario.sample_period_s;
  const ScenarioPrediction pred = predict_residuals(scenario, scenario.passive_db);
  const double gain_sq = scenario.si_channel.total_gain_sq();
  const double phase_unit = pred.phase_term / std::max(scenario.p_si * gain_sq, 1e-300);
  const double beta = std::sqrt(std::max(phase_unit, 0.0));

  SignalModelConfig config;
  config.phase_coeff = beta;
  config.sigma_noise_sq = scenario.noise.thermal_variance;

  const int count = static_cast<int>(value);
  require(count >= 1, "band/antenna count must be at least 1");
  if (axis == SweepAxis::wideband_bands) {
    config.kind = count == 1 ? SignalModelKind::narrowband : SignalModelKind::wideband;
    for (int k = 0; k < count; ++k) {
      SignalModelBranch br;
      br.p_si = scenario.p_si / count;  // equal split of the narrowband power
      br.h_si_mag = std::sqrt(gain_sq);
      br.x_si = generate_tone(scenario.si_signal.freq_hz, n, T);
      config.branches.push_back(std::move(br));
    }
  } else {
    config.kind = SignalModelKind::mimo;
    config.n_rx = 1;
    for (int m = 0; m < count; ++m) {
      SignalModelBranch br;
      br.p_si = scenario.p_si;  // every chain transmits at the scenario power
      br.h_si_mag = std::sqrt(gain_sq);
      br.x_si = generate_tone(scenario.si_signal.freq_hz, n, T);
      config.branches.push_back(std::move(br));
    }
  }

  double measured = 0.0;
  std::vector<double> trial_powers(static_cast<std::size_t>(trials));
  detail::parallel_index(trials, [&](int t) {
    SignalModelConfig c = config;
    c.seed = Rng::derive(seed, static_cast<std::uint64_t>(t));
    double acc = 0.0;
    for (const auto& buf : signal_model_received(c)) acc += power(buf);
    trial_powers[static_cast<std::size_t>(t)] = acc;
  });
  for (double v : trial_powers) measured += v;
  measured /= trials;

  double predicted = 0.0;
  if (axis == SweepAxis::wideband_bands) {
    predicted = scenario.p_si * gain_sq * beta * beta +
                count * scenario.noise.thermal_variance;
  } else {
    predicted = count * scenario.p_si * gain_sq * beta * beta +
                scenario.noise.thermal_variance;
  }

  SweepRow row;
  row.value = value;
  row.report.power_before = scenario.p_si * gain_sq;
  row.report.power_after_analog = measured;
  row.sim_db = to_db(measured);
  row.analytic_db = to_db(predicted);
  return row;
}

}  // namespace detail

// One row per axis value; every row carries the closed-form prediction for
// side-by-side comparison. The output is a pure function of its arguments.
inline std::vector<SweepRow> sweep(const RunSetup& setup, SweepAxis axis,
                                   const std::vector<double>& values, int trials,
                                   std::uint64_t seed) {
  require(!values.empty(), "sweep needs at least one value");
  require(trials >= 1, "at least one trial is required");
  std::vector<SweepRow> rows;
  rows.reserve(values.size());

  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    const double value = values[vi];
    const std::uint64_t row_seed = Rng::derive(seed, 0xC0FFEE + vi);

    if (axis == SweepAxis::mimic_delay) {
      require(setup.mimic.has_value(), "axis d requires a mimic experiment section");
      const MimicConfig& mc = *setup.mimic;
      const int d = static_cast<int>(value);
      std::vector<double> cancels(static_cast<std::size_t>(trials));
      detail::parallel_index(trials, [&](int t) {
        cancels[static_cast<std::size_t>(t)] = simulate_mimic_experiment(
            mc, d, Rng::derive(row_seed, static_cast<std::uint64_t>(t)));
      });
      SweepRow row;
      row.value = value;
      double mean = 0.0;
      for (double c : cancels) mean += c;
      mean /= trials;
      double ss = 0.0;
      for (double c : cancels) ss += (c - mean) * (c - mean);
      row.sim_db = mean;
      row.sim_stderr_db = trials > 1 ? std::sqrt(ss / (trials - 1) / trials) : 0.0;

      const double T = mc.sample_period_s;
      const int d1 = delay_to_samples(mc.delta1_s, T);
      const int d2 = delay_to_samples(mc.delta2_s, T);
      const double lag = std::abs(d2 - d1 + d) * T;
      const double h1_sq = std::norm(mc.h1);
      const double h2_sq = std::norm(mc.h2);
      double residual = mimic_residual_shared_path(
          h1_sq, h2_sq, mc.source_phase.variance_rad2,
          mc.source_phase.correlation_at(lag), mc.sigma_noise_sq);
      double before = h1_sq + mc.sigma_noise_sq;
      if (mc.dynamic_range_db) {
        const double floor = h1_sq * std::pow(10.0, -*mc.dynamic_range_db / 10.0);
        residual += floor;
        before += floor;
      }
      row.analytic_db = to_db(before / residual);
      row.report.power_before = before;
      row.report.power_after_analog = residual;
      rows.push_back(std::move(row));
      continue;
    }

    if (axis == SweepAxis::wideband_bands || axis == SweepAxis::mimo_tx) {
      rows.push_back(detail::signal_model_row(setup.scenario, axis, value, trials, row_seed));
      continue;
    }

    Scenario scn = setup.scenario;
    double passive = scn.passive_db;
    switch (axis) {
      case SweepAxis::sigma_phi_sq:
        require(value >= 0.0, "variance must be non-negative");
        scn.tx_osc.phase_noise.variance_rad2 = value;
        scn.cancel_osc.phase_noise.variance_rad2 = value;
        scn.rx_osc.phase_noise.variance_rad2 = value;
        break;
      case SweepAxis::rho:
        require(scn.estimate.mode == EstimateSpec::Mode::fixed,
                "axis rho requires a fixed estimate");
        scn.estimate.fixed.rho = Complex{value, 0.0};
        break;
      case SweepAxis::passive_db:
        passive = value;
        scn.passive_db = value;
        break;
      case SweepAxis::t_train:
        require(value >= 1.0, "training length must be at least 1");
        scn.training_len = static_cast<int>(value);
        break;
      default:
        throw UsageError("unhandled sweep axis");
    }

    TrialStats stats = run_trials(scn, trials, row_seed);
    SweepRow row;
    row.value = value;
    row.report = stats.mean;
    row.sim_db = stats.mean.total_db;
    row.sim_stderr_db = stats.stderr_total_db;
    row.analytic_db = predict_residuals(scn, passive).total_db;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace fdsim
