#pragma once

// Closed-form residual powers and cancellation bounds, plus the abstracted
// received-signal models (narrowband / wideband / MIMO). These expressions
// are the oracle the Monte Carlo engine is validated against. All correlation
// values (r_x, r_phi at the relevant lags) are taken as explicit arguments so
// tests can inject exact numbers.

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "fdsim/core.hpp"
#include "fdsim/rfchain.hpp"
#include "fdsim/rng.hpp"

namespace fdsim {

// Residual power of conventional single-tap cancellation whose only
// impairments are thermal noise and training-limited estimation error:
// 5*sigma^2/t_train + sigma^2.
inline double conventional_residual_bound(double sigma_noise_sq, int t_train) {
  require(t_train >= 1, "training length must be at least 1");
  require(sigma_noise_sq >= 0.0, "noise variance must be non-negative");
  return 5.0 * sigma_noise_sq / static_cast<double>(t_train) + sigma_noise_sq;
}

// Residual power of the split-path cancellation experiment at branch delay d,
// in the form |h1|^2 * sigma_phi^2 * (1 - R_phi(d*T)) + 2*sigma_noise^2.
inline double mimic_residual(double h1_sq, double sigma_phi_sq, double r_phi_at_dT,
                             double sigma_noise_sq) {
  require(std::abs(r_phi_at_dT) <= 1.0, "correlation must lie in [-1, 1]");
  require(h1_sq >= 0.0 && sigma_phi_sq >= 0.0 && sigma_noise_sq >= 0.0,
          "powers must be non-negative");
  return h1_sq * sigma_phi_sq * (1.0 - r_phi_at_dT) + 2.0 * sigma_noise_sq;
}

// Residual power of the same experiment as the discrete-time simulation
// realizes it: one shared source path evaluated at both wire delays gives the
// phase difference variance 2*sigma^2*(1 - R), and the least-squares scaling
// leaves both branch noises, sigma^2*(1 + |h1|^2/|h2|^2).
inline double mimic_residual_shared_path(double h1_sq, double h2_sq, double sigma_phi_sq,
                                         double r_phi_at_lag, double sigma_noise_sq) {
  require(std::abs(r_phi_at_lag) <= 1.0, "correlation must lie in [-1, 1]");
  require(h2_sq > 0.0, "reference branch must have gain");
  return h1_sq * 2.0 * sigma_phi_sq * (1.0 - r_phi_at_lag) +
         sigma_noise_sq * (1.0 + h1_sq / h2_sq);
}

namespace detail {

inline double phase_floor(CancellerKind kind, double h_si_sq, double sigma_si_sq,
                          double sigma_down_sq, double r_phi) {
  switch (kind) {
    case CancellerKind::pre_mixer:
    case CancellerKind::post_mixer:
      return h_si_sq * 2.0 * sigma_si_sq * (1.0 - r_phi);
    case CancellerKind::baseband_analog:
      return h_si_sq * (sigma_si_sq + sigma_down_sq);
  }
  return 0.0;
}

}  // namespace detail

// Residual power after active analog cancellation with an imperfect
// single-tap estimate. r_x is the (real) waveform autocorrelation at the
// delay error; r_phi is the phase-noise autocorrelation at the lag the
// canceller kind exposes: the channel delay for pre-mixer (zero for
// independent LOs), the delay error for post-mixer, unused for baseband.
inline double analog_residual(CancellerKind kind, double h_si_sq, Complex rho, double r_x,
                              double r_phi, double sigma_si_sq, double sigma_down_sq,
                              double sigma_noise_sq) {
  require(std::abs(r_x) <= 1.0 + 1e-12 && std::abs(r_phi) <= 1.0,
          "correlations must lie in [-1, 1]");
  const double mag = std::abs(rho);
  const double estimate_term = h_si_sq * (1.0 + mag * mag - 2.0 * mag * r_x);
  return estimate_term +
         detail::phase_floor(kind, h_si_sq, sigma_si_sq, sigma_down_sq, r_phi) +
         sigma_noise_sq;
}

// Residual power after a digital stage cascaded behind the analog canceller.
// analog_estimate_term is E|h_residual * x|^2 left by the analog stage;
// digital_estimate_term is E|(h_residual - h_residual_hat) * x|^2 after the
// digital fit. The analog term couples through the transmit+receive phase
// noise for pre/post-mixer cancellers and drops out at baseband.
inline double digital_residual(CancellerKind kind, double analog_estimate_term,
                               double digital_estimate_term, double h_si_sq,
                               double sigma_si_sq, double sigma_down_sq, double r_phi,
                               double sigma_noise_sq) {
  require(analog_estimate_term >= 0.0 && digital_estimate_term >= 0.0,
          "estimate terms must be non-negative");
  const double coupling = kind == CancellerKind::baseband_analog
                              ? 0.0
                              : analog_estimate_term * (sigma_si_sq + sigma_down_sq);
  return digital_estimate_term +
         detail::phase_floor(kind, h_si_sq, sigma_si_sq, sigma_down_sq, r_phi) + coupling +
         sigma_noise_sq;
}

struct TwoTapResult {
  double residual;             // absolute residual power
  double cancellation_ratio;   // before/after, linear
};

// Two-tap channel under a matched-LO canceller with perfect taps: residual
// 2*sigma^2*(E1*(1-R1) + E2*(1-R2)) and active-cancellation ratio
// (E1+E2) / (E1*(1-R1) + E2*(1-R2)).
inline TwoTapResult two_tap_residual_and_ratio(double e_h1_sq, double e_h2_sq,
                                               double sigma_phi_sq, double r_phi_d1,
                                               double r_phi_d2) {
  require(e_h1_sq >= 0.0 && e_h2_sq >= 0.0, "tap powers must be non-negative");
  require(std::abs(r_phi_d1) <= 1.0 && std::abs(r_phi_d2) <= 1.0,
          "correlations must lie in [-1, 1]");
  const double weighted = e_h1_sq * (1.0 - r_phi_d1) + e_h2_sq * (1.0 - r_phi_d2);
  if (weighted <= 0.0)
    throw DegenerateInputError("two-tap residual vanishes; the ratio is unbounded");
  return TwoTapResult{2.0 * sigma_phi_sq * weighted, (e_h1_sq + e_h2_sq) / weighted};
}

// Effective phase-noise coefficients of the abstracted signal models:
// beta^2 after analog-only cancellation, gamma^2 after analog + digital.
struct ModelParams {
  double beta_phi_sq = 0.0;
  double gamma_phi_sq = 0.0;
};

inline ModelParams model_params(CancellerKind kind, Complex rho, double r_x, double r_phi,
                                double sigma_si_sq, double sigma_down_sq) {
  const double mag = std::abs(rho);
  const double est = 1.0 + mag * mag - 2.0 * mag * r_x;
  ModelParams out;
  switch (kind) {
    case CancellerKind::pre_mixer:
    case CancellerKind::post_mixer:
      out.beta_phi_sq = 2.0 * sigma_si_sq * (1.0 - r_phi);
      out.gamma_phi_sq = out.beta_phi_sq + est * (sigma_si_sq + sigma_down_sq);
      break;
    case CancellerKind::baseband_analog:
      out.beta_phi_sq = sigma_si_sq + sigma_down_sq;
      out.gamma_phi_sq = out.beta_phi_sq;
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Abstracted received-signal evaluators

enum class SignalModelKind { narrowband, wideband, mimo };

// One self-interference contributor: a band (wideband) or a transmit chain
// (MIMO). The residual channel's gains carry their carrier rotations and
// convolve with carrier 0; an empty tap list means no correlated residual.
struct SignalModelBranch {
  double p_si = 1.0;
  double h_si_mag = 1.0;
  std::vector<ChannelTap> residual_taps;
  SignalBuffer x_si;
};

struct SignalOfInterest {
  double p_signal = 1.0;
  ChannelModel channel;
  SignalBuffer x_signal;
};

struct SignalModelConfig {
  SignalModelKind kind = SignalModelKind::narrowband;
  double phase_coeff = 0.0;  // beta_phi or gamma_phi, per the cancellation depth modeled
  std::vector<SignalModelBranch> branches;
  int n_rx = 1;  // MIMO receive count
  std::optional<SignalOfInterest> signal_of_interest;
  double sigma_noise_sq = 0.0;
  std::uint64_t seed = 0;
};

// Evaluates the abstracted model: signal-of-interest term, the unit-variance
// phase-noise surrogate scaled by sqrt(P_si)*|h_si|*coeff, the residual
// channel convolution, and thermal noise. Narrowband emits one buffer,
// wideband one per band (thermal per band, so K times the narrowband total),
// MIMO one per receiver with the surrogate scaled by sqrt(sum_m |h_m|^2 P_m).
inline std::vector<SignalBuffer> signal_model_received(const SignalModelConfig& config) {
  require(!config.branches.empty(), "signal model needs at least one branch");
  require(config.phase_coeff >= 0.0 && config.sigma_noise_sq >= 0.0,
          "model coefficients must be non-negative");
  const std::size_t n = config.branches.front().x_si.size();
  const double T = config.branches.front().x_si.sample_period_s;
  for (const auto& br : config.branches) {
    require(br.p_si >= 0.0 && br.h_si_mag >= 0.0, "branch powers must be non-negative");
    require(br.x_si.size() == n && br.x_si.sample_period_s == T,
            "branch buffers must share length and sample period");
  }
  if (config.kind == SignalModelKind::narrowband)
    require(config.branches.size() == 1, "narrowband model takes exactly one branch");
  if (config.kind != SignalModelKind::mimo)
    require(config.n_rx == 1, "only the MIMO model has multiple receivers");
  require(config.n_rx >= 1, "receiver count must be positive");
  if (config.signal_of_interest) {
    require(config.signal_of_interest->x_signal.size() == n,
            "signal-of-interest buffer length mismatch");
  }

  auto residual_term = [&](const SignalModelBranch& br) -> std::optional<SignalBuffer> {
    if (br.residual_taps.empty()) return std::nullopt;
    ChannelModel model{br.residual_taps};
    SignalBuffer conv = apply_channel(br.x_si, model, 0.0);
    return scale_buffer(conv, Complex{std::sqrt(br.p_si), 0.0});
  };

  std::optional<SignalBuffer> soi;
  if (config.signal_of_interest) {
    const auto& s = *config.signal_of_interest;
    soi = scale_buffer(apply_channel(s.x_signal, s.channel, 0.0),
                       Complex{std::sqrt(s.p_signal), 0.0});
  }

  std::vector<SignalBuffer> outputs;
  if (config.kind == SignalModelKind::mimo) {
    double phase_power = 0.0;
    for (const auto& br : config.branches)
      phase_power += br.h_si_mag * br.h_si_mag * br.p_si;
    const double phase_scale = config.phase_coeff * std::sqrt(phase_power);

    for (int rx = 0; rx < config.n_rx; ++rx) {
      Rng rng(Rng::derive(config.seed, 0x900 + static_cast<std::uint64_t>(rx)));
      std::vector<Complex> acc(n, Complex{0.0, 0.0});
      std::size_t lead = 0;
      for (const auto& br : config.branches) {
        if (auto res = residual_term(br)) {
          for (std::size_t i = 0; i < n; ++i) acc[i] += res->samples[i];
          lead = std::max(lead, res->leading_invalid);
        }
      }
      if (soi) {
        for (std::size_t i = 0; i < n; ++i) acc[i] += soi->samples[i];
        lead = std::max(lead, soi->leading_invalid);
      }
      for (std::size_t i = 0; i < n; ++i) {
        acc[i] += phase_scale * rng.complex_gaussian(1.0);
        if (config.sigma_noise_sq > 0.0) acc[i] += rng.complex_gaussian(config.sigma_noise_sq);
      }
      outputs.push_back(SignalBuffer{std::move(acc), T, lead});
    }
    return outputs;
  }

  // Narrowband and wideband: one output per branch, independent surrogates
  // and thermal floors per band.
  for (std::size_t b = 0; b < config.branches.size(); ++b) {
    const auto& br = config.branches[b];
    Rng rng(Rng::derive(config.seed, 0x100 + b));
    std::vector<Complex> acc(n, Complex{0.0, 0.0});
    std::size_t lead = 0;
    if (auto res = residual_term(br)) {
      for (std::size_t i = 0; i < n; ++i) acc[i] += res->samples[i];
      lead = res->leading_invalid;
    }
    if (soi && config.kind == SignalModelKind::narrowband) {
      for (std::size_t i = 0; i < n; ++i) acc[i] += soi->samples[i];
      lead = std::max(lead, soi->leading_invalid);
    }
    const double phase_scale = config.phase_coeff * std::sqrt(br.p_si) * br.h_si_mag;
    for (std::size_t i = 0; i < n; ++i) {
      acc[i] += phase_scale * rng.complex_gaussian(1.0);
      if (config.sigma_noise_sq > 0.0) acc[i] += rng.complex_gaussian(config.sigma_noise_sq);
    }
    outputs.push_back(SignalBuffer{std::move(acc), T, lead});
  }
  return outputs;
}

}  // namespace fdsim
