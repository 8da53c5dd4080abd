#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "fdsim/core.hpp"
#include "fdsim/phasenoise.hpp"
#include "fdsim/rfchain.hpp"

using namespace fdsim;

TEST_CASE("power of constant and zero buffers", "[core]") {
  SignalBuffer ones = make_buffer(std::vector<Complex>(100, Complex{1.0, 0.0}), 1e-6);
  CHECK(power(ones) == Catch::Approx(1.0));

  SignalBuffer zeros = make_buffer(std::vector<Complex>(100, Complex{0.0, 0.0}), 1e-6);
  CHECK(power(zeros) == Catch::Approx(0.0).margin(0.0));
}

TEST_CASE("power of a unit tone is one at any frequency", "[core]") {
  for (double f : {0.0, 1e6, 17.3e6, -4e6}) {
    SignalBuffer tone = generate_tone(f, 4096, 21.7e-9);
    // brute-force oracle: every sample has unit modulus
    double acc = 0.0;
    for (const Complex& s : tone.samples) acc += std::norm(s);
    CHECK(acc / 4096.0 == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(power(tone) == Catch::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("power rejects empty buffers", "[core]") {
  SignalBuffer empty;
  CHECK_THROWS_AS(power(empty), UsageError);
  CHECK_THROWS_AS(make_buffer({}, 1e-6), UsageError);
}

TEST_CASE("delay quantization round trip stays within half a sample", "[core]") {
  const double T = 21.7e-9;
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const double delay = rng.uniform(0.0, 1000.0 * T);
    const int q = delay_to_samples(delay, T);
    CHECK(std::abs(samples_to_delay(q, T) - delay) <= T / 2.0 + 1e-18);
  }
  CHECK_THROWS_AS(delay_to_samples(-1e-9, T), UsageError);
}

TEST_CASE("matched LO groups give identical phase paths", "[core]") {
  OscillatorConfig a{2.4e9, PhaseNoiseSpec{1e-4, PhaseNoiseWhite{}, 42}, 3};
  OscillatorConfig b{2.4e9, PhaseNoiseSpec{1e-4, PhaseNoiseWhite{}, 42}, 3};
  const std::uint64_t trial = 11;
  PhaseNoiseSpec sa = a.phase_noise;
  sa.seed = oscillator_path_seed(a, trial);
  PhaseNoiseSpec sb = b.phase_noise;
  sb.seed = oscillator_path_seed(b, trial);
  const auto pa = sample_phase_path(sa, 10000, 21.7e-9);
  const auto pb = sample_phase_path(sb, 10000, 21.7e-9);
  REQUIRE(pa == pb);
}

TEST_CASE("distinct LO groups decorrelate", "[core]") {
  const std::size_t n = 100000;
  OscillatorConfig a{2.4e9, PhaseNoiseSpec{1e-4, PhaseNoiseWhite{}, 42}, 0};
  OscillatorConfig b{2.4e9, PhaseNoiseSpec{1e-4, PhaseNoiseWhite{}, 43}, 1};
  PhaseNoiseSpec sa = a.phase_noise;
  sa.seed = oscillator_path_seed(a, 0);
  PhaseNoiseSpec sb = b.phase_noise;
  sb.seed = oscillator_path_seed(b, 0);
  const auto pa = sample_phase_path(sa, n, 21.7e-9);
  const auto pb = sample_phase_path(sb, n, 21.7e-9);
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += pa[i] * pb[i];
    da += pa[i] * pa[i];
    db += pb[i] * pb[i];
  }
  CHECK(std::abs(num) / std::sqrt(da * db) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("phase-noise spec validation", "[core]") {
  CHECK_THROWS_AS((PhaseNoiseSpec{-1.0, PhaseNoiseWhite{}, 0}.validate()), UsageError);
  CHECK_THROWS_AS((PhaseNoiseSpec{1.0, PhaseNoiseAr1{0.0}, 0}.validate()), UsageError);
  PhaseNoiseTable bad_lag0{{0.0, 1e-9}, {0.9, 0.5}};
  CHECK_THROWS_AS((PhaseNoiseSpec{1.0, bad_lag0, 0}.validate()), UsageError);
  PhaseNoiseTable too_big{{0.0, 1e-9}, {1.0, 1.5}};
  CHECK_THROWS_AS((PhaseNoiseSpec{1.0, too_big, 0}.validate()), UsageError);
}

TEST_CASE("correlation_at interpolates tables and models", "[core]") {
  PhaseNoiseSpec white{1.0, PhaseNoiseWhite{}, 0};
  CHECK(white.correlation_at(0.0) == 1.0);
  CHECK(white.correlation_at(1e-9) == 0.0);

  PhaseNoiseSpec ar1{1.0, PhaseNoiseAr1{470e-9}, 0};
  CHECK(ar1.correlation_at(470e-9) == Catch::Approx(std::exp(-1.0)));

  PhaseNoiseSpec table{1.0, PhaseNoiseTable{{0.0, 2e-9, 4e-9}, {1.0, 0.5, 0.25}}, 0};
  CHECK(table.correlation_at(1e-9) == Catch::Approx(0.75));
  CHECK(table.correlation_at(3e-9) == Catch::Approx(0.375));
  CHECK(table.correlation_at(8e-9) == 0.0);
}

TEST_CASE("channel model validation", "[core]") {
  ChannelModel empty;
  CHECK_THROWS_AS(empty.validate(), UsageError);
  ChannelModel unsorted{{ChannelTap{{1, 0}, 5e-8}, ChannelTap{{1, 0}, 1e-8}}};
  CHECK_THROWS_AS(unsorted.validate(), UsageError);
  ChannelModel ok{{ChannelTap{{1, 0}, 1e-8}, ChannelTap{{0.5, 0}, 5e-8}}};
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.total_gain_sq() == Catch::Approx(1.25));
}

namespace {

Scenario minimal_scenario() {
  Scenario s;
  s.si_signal = SignalSpec{SignalSpec::Kind::tone, 1e6, 0.0, 0};
  s.si_channel.taps = {ChannelTap{{1.0, 0.0}, 0.0}};
  s.tx_osc = {2.4e9, PhaseNoiseSpec{0.0, PhaseNoiseWhite{}, 1}, 0};
  s.cancel_osc = {2.4e9, PhaseNoiseSpec{0.0, PhaseNoiseWhite{}, 2}, 1};
  s.rx_osc = {2.4e9, PhaseNoiseSpec{0.0, PhaseNoiseWhite{}, 3}, 2};
  s.n_samples = 1024;
  s.training_len = 64;
  s.sample_period_s = 21.7e-9;
  return s;
}

}  // namespace

TEST_CASE("scenario validation", "[core]") {
  Scenario ok = minimal_scenario();
  CHECK_NOTHROW(ok.validate());

  Scenario short_record = minimal_scenario();
  short_record.n_samples = 10;
  CHECK_THROWS_AS(short_record.validate(), UsageError);

  Scenario mismatched = minimal_scenario();
  mismatched.rx_osc.carrier_hz = 2.2e9;
  CHECK_THROWS_AS(mismatched.validate(), UsageError);

  Scenario group_clash = minimal_scenario();
  group_clash.cancel_osc.lo_group = group_clash.tx_osc.lo_group;
  group_clash.cancel_osc.phase_noise.seed = 99;  // same group, different path spec
  CHECK_THROWS_AS(group_clash.validate(), UsageError);

  Scenario negative_power = minimal_scenario();
  negative_power.p_si = -1.0;
  CHECK_THROWS_AS(negative_power.validate(), UsageError);
}
