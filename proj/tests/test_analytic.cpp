#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "fdsim/analytic.hpp"
#include "fdsim/rfchain.hpp"
#include "fdsim/rng.hpp"

using namespace fdsim;

TEST_CASE("conventional residual bound", "[analytic]") {
  CHECK(conventional_residual_bound(1.0, 5) == Catch::Approx(2.0));
  CHECK(to_db(conventional_residual_bound(1.0, 5) / 1.0) == Catch::Approx(3.01).epsilon(1e-3));
  CHECK(conventional_residual_bound(1.0, 1000000000) == Catch::Approx(1.0).epsilon(1e-6));
  CHECK(conventional_residual_bound(0.01, 100) == Catch::Approx(0.0105));
  CHECK_THROWS_AS(conventional_residual_bound(1.0, 0), UsageError);
}

TEST_CASE("mimic residual closed form", "[analytic]") {
  CHECK(mimic_residual(1.0, 1e-3, 1.0, 0.02) == Catch::Approx(0.04));
  const double floor = mimic_residual(1.0, 1.566e-4, 0.0, 0.0);
  CHECK(floor == Catch::Approx(1.566e-4));
  CHECK(-to_db(floor) == Catch::Approx(38.05).epsilon(1e-3));
  // linear in (1 - R): half the decorrelation halves the phase term
  const double half = mimic_residual(1.0, 1.566e-4, 0.5, 0.0);
  CHECK(half == Catch::Approx(floor / 2.0));
}

TEST_CASE("shared-path mimic residual keeps both branch noises", "[analytic]") {
  const double v = mimic_residual_shared_path(1.0, 1.0, 1.566e-4, 0.0, 0.01);
  CHECK(v == Catch::Approx(2.0 * 1.566e-4 + 0.02));
  CHECK(mimic_residual_shared_path(1.0, 4.0, 0.0, 0.0, 0.01) == Catch::Approx(0.0125));
}

TEST_CASE("analog residual rows", "[analytic]") {
  // perfect estimate and no phase noise leaves thermal noise only
  for (auto kind : {CancellerKind::pre_mixer, CancellerKind::post_mixer,
                    CancellerKind::baseband_analog}) {
    CHECK(analog_residual(kind, 1.0, {1.0, 0.0}, 1.0, 1.0, 0.0, 0.0, 1e-3) ==
          Catch::Approx(1e-3));
  }
  // post-mixer with a perfect delay estimate kills the phase-noise term
  CHECK(analog_residual(CancellerKind::post_mixer, 1.0, {1.0, 0.0}, 1.0, 1.0, 1.566e-4,
                        1.566e-4, 1e-3) == Catch::Approx(1e-3));
  // worked pre-mixer row
  const double v = analog_residual(CancellerKind::pre_mixer, 1.0, {0.9, 0.0}, 0.95, 0.0,
                                   1.566e-4, 0.0, 0.0);
  CHECK(v == Catch::Approx(0.100313).epsilon(1e-5));
  // baseband floor
  CHECK(analog_residual(CancellerKind::baseband_analog, 2.0, {1.0, 0.0}, 1.0, 0.0, 1e-4,
                        3e-4, 1e-3) == Catch::Approx(2.0 * 4e-4 + 1e-3));
}

TEST_CASE("digital residual floors and coupling", "[analytic]") {
  const double s = 1.566e-4;
  // perfect digital estimate after a perfect analog stage: the phase floor
  const double floor = digital_residual(CancellerKind::pre_mixer, 0.0, 0.0, 1.0, s, s, 0.0, 0.0);
  CHECK(floor == Catch::Approx(2.0 * s));
  CHECK(to_db(1.0 / floor) == Catch::Approx(35.04).epsilon(1e-3));

  // baseband is independent of the analog estimate quality
  const double bb1 = digital_residual(CancellerKind::baseband_analog, 0.0, 0.0, 1.0, s, s, 0.0, 0.0);
  const double bb2 = digital_residual(CancellerKind::baseband_analog, 0.5, 0.0, 1.0, s, s, 0.0, 0.0);
  CHECK(bb1 == bb2);

  // dominant receiver phase noise couples through a poor analog stage
  const double coupled =
      digital_residual(CancellerKind::pre_mixer, 1.0, 0.0, 1.0, s, 10.0 * s, 0.0, 0.0);
  CHECK(coupled - 2.0 * s == Catch::Approx(11.0 * s));
  CHECK(coupled > 5.0 * (2.0 * s));
}

TEST_CASE("digital floor with perfect estimates equals the perfect analog residual",
          "[analytic]") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto kind = static_cast<CancellerKind>(i % 3);
    const double h_sq = rng.uniform(0.1, 4.0);
    const double s_si = rng.uniform(0.0, 1e-3);
    const double s_down = rng.uniform(0.0, 1e-3);
    const double r_phi = rng.uniform(-1.0, 1.0);
    const double noise = rng.uniform(0.0, 1e-3);
    const double digital = digital_residual(kind, 0.0, 0.0, h_sq, s_si, s_down, r_phi, noise);
    const double analog =
        analog_residual(kind, h_sq, {1.0, 0.0}, 1.0, r_phi, s_si, s_down, noise);
    CHECK(digital == Catch::Approx(analog));
  }
}

TEST_CASE("analytic residuals never fall below thermal noise and grow with phase noise",
          "[analytic]") {
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto kind = static_cast<CancellerKind>(i % 3);
    const double h_sq = rng.uniform(0.1, 4.0);
    const Complex rho{rng.uniform(0.5, 1.0), rng.uniform(-0.1, 0.1)};
    const double r_x = rng.uniform(0.0, 1.0);
    const double r_phi = rng.uniform(0.0, 1.0);
    const double s1 = rng.uniform(0.0, 1e-3);
    const double s2 = s1 * rng.uniform(1.0, 3.0);
    const double s_down = rng.uniform(0.0, 1e-3);
    const double noise = rng.uniform(1e-6, 1e-3);
    const double lo = analog_residual(kind, h_sq, rho, r_x, r_phi, s1, s_down, noise);
    const double hi = analog_residual(kind, h_sq, rho, r_x, r_phi, s2, s_down, noise);
    CHECK(lo >= noise);
    CHECK(hi >= lo);
  }
}

TEST_CASE("two-tap ratio limits", "[analytic]") {
  const auto only_reflection = two_tap_residual_and_ratio(0.0, 1.0, 1.566e-4, 0.99, 0.9);
  CHECK(to_db(only_reflection.cancellation_ratio) == Catch::Approx(10.0).epsilon(1e-3));

  const auto los_dominant = two_tap_residual_and_ratio(1e9, 1.0, 1.566e-4, 0.99, 0.9);
  CHECK(los_dominant.cancellation_ratio == Catch::Approx(1.0 / 0.01).epsilon(1e-3));

  const auto mixed = two_tap_residual_and_ratio(1.0, 0.01, 1.566e-4, 0.99, 0.9);
  CHECK(to_db(mixed.cancellation_ratio) == Catch::Approx(19.63).epsilon(1e-3));

  CHECK_THROWS_AS(two_tap_residual_and_ratio(1.0, 1.0, 1e-4, 1.0, 1.0), DegenerateInputError);
}

TEST_CASE("two-tap ratio is invariant to common scaling", "[analytic]") {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const double e1 = rng.uniform(0.01, 2.0);
    const double e2 = rng.uniform(0.01, 2.0);
    const double r1 = rng.uniform(0.0, 0.999);
    const double r2 = rng.uniform(0.0, r1);
    const double scale = rng.uniform(0.1, 50.0);
    const auto a = two_tap_residual_and_ratio(e1, e2, 1e-4, r1, r2);
    const auto b = two_tap_residual_and_ratio(scale * e1, scale * e2, 1e-4, r1, r2);
    CHECK(a.cancellation_ratio == Catch::Approx(b.cancellation_ratio));
  }
}

TEST_CASE("model parameters per architecture", "[analytic]") {
  const double s = 2e-4;
  const auto bb = model_params(CancellerKind::baseband_analog, {0.7, 0.0}, 0.3, 0.1, s, 3.0 * s);
  CHECK(bb.beta_phi_sq == Catch::Approx(4.0 * s));
  CHECK(bb.gamma_phi_sq == Catch::Approx(4.0 * s));

  const auto perfect = model_params(CancellerKind::pre_mixer, {1.0, 0.0}, 1.0, 0.4, s, s);
  CHECK(perfect.gamma_phi_sq == Catch::Approx(perfect.beta_phi_sq));

  const auto detuned = model_params(CancellerKind::pre_mixer, {0.8, 0.0}, 0.9, 0.0, s, s);
  CHECK(detuned.beta_phi_sq == Catch::Approx(2.0 * s));
  CHECK(detuned.gamma_phi_sq ==
        Catch::Approx(2.0 * s + (1.0 + 0.64 - 2.0 * 0.8 * 0.9) * 2.0 * s));
}

TEST_CASE("gamma minus beta equals the estimate coupling", "[analytic]") {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const auto kind = static_cast<CancellerKind>(i % 3);
    const Complex rho{rng.uniform(0.0, 1.2), rng.uniform(-0.2, 0.2)};
    const double r_x = rng.uniform(-1.0, 1.0);
    const double r_phi = rng.uniform(-1.0, 1.0);
    const double s_si = rng.uniform(0.0, 1e-3);
    const double s_down = rng.uniform(0.0, 1e-3);
    const auto params = model_params(kind, rho, r_x, r_phi, s_si, s_down);
    const double est = 1.0 + std::norm(rho) - 2.0 * std::abs(rho) * r_x;
    if (kind == CancellerKind::baseband_analog) {
      CHECK(params.gamma_phi_sq == Catch::Approx(params.beta_phi_sq));
    } else {
      CHECK(params.gamma_phi_sq - params.beta_phi_sq ==
            Catch::Approx(est * (s_si + s_down)).margin(1e-15));
    }
  }
}

TEST_CASE("signal model with no impairments is signal plus thermal", "[analytic]") {
  const std::size_t n = 200000;
  const double T = 21.7e-9;
  SignalModelConfig config;
  config.kind = SignalModelKind::narrowband;
  config.phase_coeff = 0.0;
  config.sigma_noise_sq = 1e-3;
  SignalModelBranch br;
  br.p_si = 1.0;
  br.h_si_mag = 1.0;
  br.x_si = generate_tone(1e6, n, T);
  config.branches.push_back(std::move(br));
  SignalOfInterest soi;
  soi.p_signal = 0.25;
  soi.channel = ChannelModel{{ChannelTap{{1.0, 0.0}, 0.0}}};
  soi.x_signal = generate_tone(2e6, n, T);
  config.signal_of_interest = soi;
  config.seed = 3;

  const auto out = signal_model_received(config);
  REQUIRE(out.size() == 1);
  CHECK(power(out[0]) == Catch::Approx(0.25 + 1e-3).epsilon(0.02));
}

TEST_CASE("wideband bands keep the total phase residual and multiply thermal noise",
          "[analytic]") {
  const std::size_t n = 200000;
  const double T = 21.7e-9;
  const double beta = 0.02;
  const int k_bands = 4;

  auto make_config = [&](int bands, double coeff, double noise) {
    SignalModelConfig config;
    config.kind = bands == 1 ? SignalModelKind::narrowband : SignalModelKind::wideband;
    config.phase_coeff = coeff;
    config.sigma_noise_sq = noise;
    config.seed = 11;
    for (int k = 0; k < bands; ++k) {
      SignalModelBranch br;
      br.p_si = 1.0 / bands;
      br.h_si_mag = 1.0;
      br.x_si = generate_tone(1e6, n, T);
      config.branches.push_back(std::move(br));
    }
    return config;
  };

  double narrow_phase = 0.0;
  for (const auto& buf : signal_model_received(make_config(1, beta, 0.0)))
    narrow_phase += power(buf);
  double wide_phase = 0.0;
  for (const auto& buf : signal_model_received(make_config(k_bands, beta, 0.0)))
    wide_phase += power(buf);
  CHECK(to_db(wide_phase / narrow_phase) == Catch::Approx(0.0).margin(0.3));

  double narrow_thermal = 0.0;
  for (const auto& buf : signal_model_received(make_config(1, 0.0, 1e-3)))
    narrow_thermal += power(buf);
  double wide_thermal = 0.0;
  for (const auto& buf : signal_model_received(make_config(k_bands, 0.0, 1e-3)))
    wide_thermal += power(buf);
  CHECK(to_db(wide_thermal / narrow_thermal) == Catch::Approx(6.02).margin(0.3));
}

TEST_CASE("two identical MIMO chains double the phase residual", "[analytic]") {
  const std::size_t n = 200000;
  const double T = 21.7e-9;
  auto make_config = [&](int m) {
    SignalModelConfig config;
    config.kind = m == 1 ? SignalModelKind::narrowband : SignalModelKind::mimo;
    config.phase_coeff = 0.02;
    config.sigma_noise_sq = 0.0;
    config.seed = 13;
    for (int i = 0; i < m; ++i) {
      SignalModelBranch br;
      br.p_si = 1.0;
      br.h_si_mag = 1.0;
      br.x_si = generate_tone(1e6, n, T);
      config.branches.push_back(std::move(br));
    }
    return config;
  };
  const double siso = power(signal_model_received(make_config(1))[0]);
  const double mimo = power(signal_model_received(make_config(2))[0]);
  CHECK(to_db(mimo / siso) == Catch::Approx(3.01).margin(0.3));
}

TEST_CASE("signal model validates dimensions", "[analytic]") {
  SignalModelConfig config;
  config.kind = SignalModelKind::narrowband;
  CHECK_THROWS_AS(signal_model_received(config), UsageError);

  SignalModelBranch a;
  a.x_si = generate_tone(1e6, 100, 21.7e-9);
  SignalModelBranch b;
  b.x_si = generate_tone(1e6, 200, 21.7e-9);
  config.branches.push_back(a);
  config.branches.push_back(b);
  config.kind = SignalModelKind::wideband;
  CHECK_THROWS_AS(signal_model_received(config), UsageError);
}
