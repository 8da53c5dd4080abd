#pragma once

// Scenario configuration files (JSON) and CSV emission for sweep tables.
//
// Config layout:
// {
//   "signals":     { "si": {"kind":"tone","freq_hz":1e6} | {"kind":"bandlimited",...},
//                    "n_samples", "sample_period_s", "p_si", "training_len" },
//   "oscillators": { "carrier_hz", "tx": {...}, "cancel": {...}, "rx": {...} },
//   "channel":     { "si_taps": [{"gain_re","gain_im","delay_s"}, ...],
//                    "estimate": {"mode":"fixed","rho_re","rho_im","tau_s"} | {"mode":"trained"},
//                    "passive_db" },
//   "canceller":   { "kind", "digital": {"mode","max_taps","training_len"} },
//   "noise":       { "thermal_variance", "seed" },
//   "sweep":       { "axis", "values", "trials" },        (optional)
//   "mimic":       { ... split-path experiment ... }      (optional)
// }
//
// Each oscillator takes either "sigma_phi_deg" (converted to radians) or
// "variance_rad2", or a "spectrum" of {f_start_hz, f_end_hz, level_dbc_per_hz}
// segments with an "integration_band" [f1, f2]; plus "model"
// ("white" | "ar1" + coherence_time_s | "table" + lags_s/correlations),
// "lo_group" and "seed". Unknown keys anywhere are rejected.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdsim/core.hpp"
#include "fdsim/montecarlo.hpp"
#include "fdsim/phasenoise.hpp"

namespace fdsim {

struct SweepSpec {
  SweepAxis axis = SweepAxis::rho;
  std::vector<double> values;
  int trials = 8;
};

struct RunConfig {
  Scenario scenario;
  std::optional<MimicConfig> mimic;
  std::optional<SweepSpec> sweep;
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void config_error(const std::string& path, const std::string& msg) {
  throw UsageError(path + ": " + msg);
}

inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) config_error(path + "." + key, "unknown key");
  }
}

inline double number_at(const json& obj, const std::string& path, const char* key,
                        std::optional<double> fallback = std::nullopt) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    config_error(path + "." + key, "missing required number");
  }
  if (!obj[key].is_number()) config_error(path + "." + key, "expected a number");
  return obj[key].get<double>();
}

inline std::uint64_t seed_at(const json& obj, const std::string& path, const char* key,
                             std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_unsigned() && !obj[key].is_number_integer())
    config_error(path + "." + key, "expected an integer seed");
  return obj[key].get<std::uint64_t>();
}

inline std::string string_at(const json& obj, const std::string& path, const char* key,
                             const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) config_error(path + "." + key, "expected a string");
  return obj[key].get<std::string>();
}

inline PhaseNoiseSpec parse_phase_noise(const json& obj, const std::string& path) {
  check_keys(obj, path,
             {"sigma_phi_deg", "variance_rad2", "spectrum", "integration_band", "model",
              "coherence_time_s", "lags_s", "correlations", "lo_group", "seed"});
  PhaseNoiseSpec spec;
  const bool has_deg = obj.contains("sigma_phi_deg");
  const bool has_var = obj.contains("variance_rad2");
  const bool has_spectrum = obj.contains("spectrum");
  if (has_deg + has_var + has_spectrum > 1)
    config_error(path, "give exactly one of sigma_phi_deg, variance_rad2, spectrum");
  if (has_deg) {
    const double deg = number_at(obj, path, "sigma_phi_deg");
    const double rad = deg * std::numbers::pi / 180.0;
    spec.variance_rad2 = rad * rad;
  } else if (has_var) {
    spec.variance_rad2 = number_at(obj, path, "variance_rad2");
  } else if (has_spectrum) {
    if (!obj.contains("integration_band") || !obj["integration_band"].is_array() ||
        obj["integration_band"].size() != 2)
      config_error(path + ".integration_band", "expected [f1_hz, f2_hz]");
    std::vector<SpectrumSegment> segments;
    for (std::size_t i = 0; i < obj["spectrum"].size(); ++i) {
      const json& seg = obj["spectrum"][i];
      const std::string seg_path = path + ".spectrum[" + std::to_string(i) + "]";
      check_keys(seg, seg_path, {"f_start_hz", "f_end_hz", "level_dbc_per_hz"});
      segments.push_back(SpectrumSegment{number_at(seg, seg_path, "f_start_hz"),
                                         number_at(seg, seg_path, "f_end_hz"),
                                         number_at(seg, seg_path, "level_dbc_per_hz")});
    }
    const double f1 = obj["integration_band"][0].get<double>();
    const double f2 = obj["integration_band"][1].get<double>();
    const double sigma = jitter_from_spectrum(segments, f1, f2);
    spec.variance_rad2 = sigma * sigma;
  } else {
    spec.variance_rad2 = 0.0;
  }

  const std::string model = string_at(obj, path, "model", "white");
  if (model == "white") {
    spec.model = PhaseNoiseWhite{};
  } else if (model == "ar1") {
    spec.model = PhaseNoiseAr1{number_at(obj, path, "coherence_time_s")};
  } else if (model == "table") {
    PhaseNoiseTable table;
    if (!obj.contains("lags_s") || !obj.contains("correlations"))
      config_error(path, "table model needs lags_s and correlations");
    table.lags_s = obj["lags_s"].get<std::vector<double>>();
    table.correlations = obj["correlations"].get<std::vector<double>>();
    spec.model = std::move(table);
  } else {
    config_error(path + ".model", "unknown phase-noise model: " + model);
  }
  spec.seed = seed_at(obj, path, "seed", 0);

  try {
    spec.validate();
  } catch (const UsageError& e) {
    config_error(path, e.what());
  }
  return spec;
}

inline OscillatorConfig parse_oscillator(const json& obj, const std::string& path,
                                         double carrier_hz) {
  OscillatorConfig osc;
  osc.carrier_hz = carrier_hz;
  osc.phase_noise = parse_phase_noise(obj, path);
  if (obj.contains("lo_group")) {
    if (!obj["lo_group"].is_number_integer())
      config_error(path + ".lo_group", "expected an integer");
    osc.lo_group = obj["lo_group"].get<int>();
  }
  return osc;
}

inline ChannelModel parse_channel(const json& arr, const std::string& path) {
  if (!arr.is_array() || arr.empty()) config_error(path, "expected a non-empty tap array");
  ChannelModel model;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string tap_path = path + "[" + std::to_string(i) + "]";
    check_keys(arr[i], tap_path, {"gain_re", "gain_im", "delay_s"});
    model.taps.push_back(
        ChannelTap{Complex{number_at(arr[i], tap_path, "gain_re"),
                           number_at(arr[i], tap_path, "gain_im", 0.0)},
                   number_at(arr[i], tap_path, "delay_s", 0.0)});
  }
  try {
    model.validate();
  } catch (const UsageError& e) {
    config_error(path, e.what());
  }
  return model;
}

}  // namespace detail

// Parses and fully validates a scenario configuration. Any parse error,
// invariant violation or unknown key raises UsageError with the JSON path.
inline RunConfig parse_config_json(const nlohmann::json& root) {
  using detail::check_keys;
  using detail::config_error;
  using detail::number_at;
  using detail::seed_at;
  using detail::string_at;

  check_keys(root, "$",
             {"signals", "oscillators", "channel", "canceller", "noise", "sweep", "mimic"});
  RunConfig out;
  Scenario& scn = out.scenario;

  // signals
  if (!root.contains("signals")) config_error("$", "missing signals section");
  const auto& signals = root["signals"];
  check_keys(signals, "$.signals",
             {"si", "n_samples", "sample_period_s", "p_si", "p_signal", "training_len"});
  scn.sample_period_s = number_at(signals, "$.signals", "sample_period_s");
  scn.n_samples = static_cast<int>(number_at(signals, "$.signals", "n_samples", 1048576.0));
  scn.p_si = number_at(signals, "$.signals", "p_si", 1.0);
  scn.p_signal = number_at(signals, "$.signals", "p_signal", 0.0);
  scn.training_len = static_cast<int>(number_at(signals, "$.signals", "training_len", 1024.0));
  if (signals.contains("si")) {
    const auto& si = signals["si"];
    check_keys(si, "$.signals.si", {"kind", "freq_hz", "bandwidth_hz", "seed"});
    const std::string kind = string_at(si, "$.signals.si", "kind", "tone");
    if (kind == "tone") {
      scn.si_signal.kind = SignalSpec::Kind::tone;
      scn.si_signal.freq_hz = number_at(si, "$.signals.si", "freq_hz", 0.0);
    } else if (kind == "bandlimited") {
      scn.si_signal.kind = SignalSpec::Kind::bandlimited;
      scn.si_signal.bandwidth_hz = number_at(si, "$.signals.si", "bandwidth_hz");
      scn.si_signal.seed = seed_at(si, "$.signals.si", "seed", 0);
    } else {
      config_error("$.signals.si.kind", "unknown signal kind: " + kind);
    }
  }

  // oscillators
  if (!root.contains("oscillators")) config_error("$", "missing oscillators section");
  const auto& osc = root["oscillators"];
  check_keys(osc, "$.oscillators", {"carrier_hz", "tx", "cancel", "rx"});
  const double carrier = number_at(osc, "$.oscillators", "carrier_hz");
  if (!osc.contains("tx")) config_error("$.oscillators", "missing tx oscillator");
  scn.tx_osc = detail::parse_oscillator(osc["tx"], "$.oscillators.tx", carrier);
  scn.cancel_osc = osc.contains("cancel")
                       ? detail::parse_oscillator(osc["cancel"], "$.oscillators.cancel", carrier)
                       : scn.tx_osc;
  if (!osc.contains("cancel")) scn.cancel_osc.lo_group = scn.tx_osc.lo_group + 1;
  scn.rx_osc = osc.contains("rx")
                   ? detail::parse_oscillator(osc["rx"], "$.oscillators.rx", carrier)
                   : OscillatorConfig{carrier, PhaseNoiseSpec{}, scn.cancel_osc.lo_group + 1};

  // channel
  if (!root.contains("channel")) config_error("$", "missing channel section");
  const auto& channel = root["channel"];
  check_keys(channel, "$.channel", {"si_taps", "signal_taps", "estimate", "passive_db"});
  if (!channel.contains("si_taps")) config_error("$.channel", "missing si_taps");
  scn.si_channel = detail::parse_channel(channel["si_taps"], "$.channel.si_taps");
  if (channel.contains("signal_taps"))
    scn.signal_channel = detail::parse_channel(channel["signal_taps"], "$.channel.signal_taps");
  scn.passive_db = number_at(channel, "$.channel", "passive_db", 0.0);
  if (channel.contains("estimate")) {
    const auto& est = channel["estimate"];
    check_keys(est, "$.channel.estimate", {"mode", "rho_re", "rho_im", "tau_s"});
    const std::string mode = string_at(est, "$.channel.estimate", "mode", "fixed");
    if (mode == "fixed") {
      scn.estimate.mode = EstimateSpec::Mode::fixed;
      scn.estimate.fixed.rho = Complex{number_at(est, "$.channel.estimate", "rho_re", 1.0),
                                       number_at(est, "$.channel.estimate", "rho_im", 0.0)};
      scn.estimate.fixed.tau_s = number_at(est, "$.channel.estimate", "tau_s",
                                           scn.si_channel.taps.front().delay_s);
    } else if (mode == "trained") {
      scn.estimate.mode = EstimateSpec::Mode::trained;
    } else {
      config_error("$.channel.estimate.mode", "unknown estimate mode: " + mode);
    }
  } else {
    scn.estimate.fixed.tau_s = scn.si_channel.taps.front().delay_s;
  }

  // canceller
  if (!root.contains("canceller")) config_error("$", "missing canceller section");
  const auto& canceller = root["canceller"];
  check_keys(canceller, "$.canceller", {"kind", "digital"});
  const std::string kind = string_at(canceller, "$.canceller", "kind", "pre_mixer");
  if (kind == "pre_mixer") scn.canceller = CancellerKind::pre_mixer;
  else if (kind == "post_mixer") scn.canceller = CancellerKind::post_mixer;
  else if (kind == "baseband_analog") scn.canceller = CancellerKind::baseband_analog;
  else config_error("$.canceller.kind", "unknown canceller kind: " + kind);
  if (canceller.contains("digital")) {
    const auto& dig = canceller["digital"];
    check_keys(dig, "$.canceller.digital", {"mode", "max_taps", "training_len"});
    const std::string mode = string_at(dig, "$.canceller.digital", "mode", "off");
    if (mode != "off") {
      DigitalCancellerSpec spec;
      if (mode == "perfect") spec.mode = DigitalCancellerSpec::Mode::perfect;
      else if (mode == "fitted") spec.mode = DigitalCancellerSpec::Mode::fitted;
      else config_error("$.canceller.digital.mode", "unknown digital mode: " + mode);
      spec.max_taps = static_cast<int>(number_at(dig, "$.canceller.digital", "max_taps", 2.0));
      spec.training_len =
          static_cast<int>(number_at(dig, "$.canceller.digital", "training_len", 0.0));
      scn.digital = spec;
    }
  }

  // noise
  if (root.contains("noise")) {
    const auto& noise = root["noise"];
    check_keys(noise, "$.noise", {"thermal_variance", "seed"});
    scn.noise.thermal_variance = number_at(noise, "$.noise", "thermal_variance", 0.0);
    scn.noise.seed = seed_at(noise, "$.noise", "seed", 0);
  }

  // sweep
  if (root.contains("sweep")) {
    const auto& sweep = root["sweep"];
    check_keys(sweep, "$.sweep", {"axis", "values", "trials"});
    SweepSpec spec;
    try {
      spec.axis = sweep_axis_from_string(string_at(sweep, "$.sweep", "axis", ""));
    } catch (const UsageError& e) {
      config_error("$.sweep.axis", e.what());
    }
    if (!sweep.contains("values") || !sweep["values"].is_array() || sweep["values"].empty())
      config_error("$.sweep.values", "expected a non-empty array of numbers");
    spec.values = sweep["values"].get<std::vector<double>>();
    spec.trials = static_cast<int>(number_at(sweep, "$.sweep", "trials", 8.0));
    out.sweep = std::move(spec);
  }

  // mimic experiment
  if (root.contains("mimic")) {
    const auto& mimic = root["mimic"];
    check_keys(mimic, "$.mimic",
               {"source", "h1_re", "h1_im", "h2_re", "h2_im", "delta1_s", "delta2_s",
                "tone_freq_hz", "carrier_hz", "sample_period_s", "sigma_noise_sq",
                "dynamic_range_db", "n_samples"});
    MimicConfig mc;
    if (!mimic.contains("source")) config_error("$.mimic", "missing source oscillator");
    mc.source_phase = detail::parse_phase_noise(mimic["source"], "$.mimic.source");
    mc.h1 = Complex{number_at(mimic, "$.mimic", "h1_re", 1.0),
                    number_at(mimic, "$.mimic", "h1_im", 0.0)};
    mc.h2 = Complex{number_at(mimic, "$.mimic", "h2_re", 1.0),
                    number_at(mimic, "$.mimic", "h2_im", 0.0)};
    mc.delta1_s = number_at(mimic, "$.mimic", "delta1_s", 0.0);
    mc.delta2_s = number_at(mimic, "$.mimic", "delta2_s", 0.0);
    mc.tone_freq_hz = number_at(mimic, "$.mimic", "tone_freq_hz", 1e6);
    mc.carrier_hz = number_at(mimic, "$.mimic", "carrier_hz", 2.4e9);
    mc.sample_period_s = number_at(mimic, "$.mimic", "sample_period_s", scn.sample_period_s);
    mc.sigma_noise_sq = number_at(mimic, "$.mimic", "sigma_noise_sq", 0.0);
    if (mimic.contains("dynamic_range_db"))
      mc.dynamic_range_db = number_at(mimic, "$.mimic", "dynamic_range_db");
    mc.n = static_cast<std::size_t>(
        number_at(mimic, "$.mimic", "n_samples", static_cast<double>(scn.n_samples)));
    try {
      mc.validate();
    } catch (const UsageError& e) {
      config_error("$.mimic", e.what());
    }
    out.mimic = std::move(mc);
  }

  try {
    scn.validate();
  } catch (const UsageError& e) {
    config_error("$", e.what());
  }
  return out;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
  return parse_config_json(root);
}

// ---------------------------------------------------------------------------
// CSV emission

// Header plus one row per sweep value, 6 significant digits, newline
// terminated. Reruns with identical inputs produce byte-identical files.
inline std::string format_csv(const std::vector<SweepRow>& rows, const std::string& axis_name) {
  require(!rows.empty(), "cannot emit an empty table");
  std::ostringstream out;
  out.precision(6);
  out << axis_name
      << ",sim_db,sim_stderr_db,analytic_db,power_before,power_after_passive,"
         "power_after_analog,power_after_digital\n";
  for (const auto& row : rows) {
    out << row.value << ',' << row.sim_db << ',' << row.sim_stderr_db << ','
        << row.analytic_db << ',' << row.report.power_before << ','
        << row.report.power_after_passive << ',' << row.report.power_after_analog << ',';
    if (row.report.power_after_digital) out << *row.report.power_after_digital;
    out << '\n';
  }
  return out.str();
}

inline void emit_csv(const std::vector<SweepRow>& rows, const std::string& axis_name,
                     const std::string& path) {
  const std::string text = format_csv(rows, axis_name);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write csv file: " + path);
  out << text;
  if (!out) throw UsageError("failed while writing csv file: " + path);
}

}  // namespace fdsim
