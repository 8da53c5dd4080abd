#pragma once

// Estimation procedures: the delayed least-squares scaling used by the
// split-path cancellation experiment, single-tap channel estimation with a
// training-length-dependent error, and least-squares fitting of the residual
// channel for the digital stage.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include "fdsim/core.hpp"

namespace fdsim {

// Least-squares scaling h_c(d) between y1[i] and the delayed branch
// y2[i - d]: conjugate cross-sum over energy sum, taken over the first
// n_train usable samples.
inline Complex estimate_scaling(const SignalBuffer& y1, const SignalBuffer& y2, int d,
                                std::size_t n_train) {
  require(d >= 0, "branch delay must be non-negative");
  require(n_train > 0, "training window must be non-empty");
  const std::size_t start =
      std::max(static_cast<std::size_t>(d) + y2.leading_invalid, y1.leading_invalid);
  require(start + n_train <= y1.size(), "training window exceeds the first buffer");
  require(start + n_train <= y2.size() + static_cast<std::size_t>(d),
          "training window exceeds the delayed buffer");

  Complex num{0.0, 0.0};
  double den = 0.0;
  for (std::size_t i = start; i < start + n_train; ++i) {
    const Complex ref = y2.samples[i - static_cast<std::size_t>(d)];
    num += std::conj(ref) * y1.samples[i];
    den += std::norm(ref);
  }
  if (den <= 0.0) throw DegenerateInputError("reference branch has no energy");
  return num / den;
}

// Exhaustive integer-delay search maximizing correlation magnitude, then the
// least-squares gain at the winning delay. Ties go to the smallest delay.
// The returned estimate holds the absolute fitted gain in `rho`.
inline ChannelEstimate ls_single_tap(const SignalBuffer& rx, const SignalBuffer& tx,
                                     std::size_t t_train, int delay_min, int delay_max) {
  require(delay_min >= 0 && delay_min <= delay_max, "delay grid is empty");
  require(t_train > 0, "training window must be non-empty");
  const std::size_t start = std::max(
      static_cast<std::size_t>(delay_max) + tx.leading_invalid, rx.leading_invalid);
  require(start + t_train <= rx.size() && start + t_train <= tx.size(),
          "training window exceeds the buffers");

  int best_d = delay_min;
  double best_score = -1.0;
  Complex best_num{0.0, 0.0};
  double best_den = 0.0;
  for (int d = delay_min; d <= delay_max; ++d) {
    Complex num{0.0, 0.0};
    double den = 0.0;
    for (std::size_t i = start; i < start + t_train; ++i) {
      const Complex ref = tx.samples[i - static_cast<std::size_t>(d)];
      num += std::conj(ref) * rx.samples[i];
      den += std::norm(ref);
    }
    const double score = std::abs(num);
    if (score > best_score) {
      best_score = score;
      best_d = d;
      best_num = num;
      best_den = den;
    }
  }
  if (best_den <= 0.0) throw DegenerateInputError("training signal has no energy");
  return ChannelEstimate{best_num / best_den,
                         samples_to_delay(best_d, tx.sample_period_s)};
}

namespace detail {

// Gaussian elimination with partial pivoting for the small complex normal
// equations of the tap fit. Throws on rank deficiency.
inline std::vector<Complex> solve_hermitian(std::vector<std::vector<Complex>> a,
                                            std::vector<Complex> b) {
  const std::size_t m = b.size();
  double scale = 0.0;
  for (std::size_t i = 0; i < m; ++i) scale = std::max(scale, std::abs(a[i][i]));
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < m; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) <= 1e-12 * scale)
      throw DegenerateInputError("delayed copies are collinear; tap fit is rank-deficient");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < m; ++r) {
      const Complex f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < m; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<Complex> x(m);
  for (std::size_t i = m; i-- > 0;) {
    Complex acc = b[i];
    for (std::size_t c = i + 1; c < m; ++c) acc -= a[i][c] * x[c];
    x[i] = acc / a[i][i];
  }
  return x;
}

}  // namespace detail

// Least-squares fit of up to max_taps integer-delay taps relating x_si to the
// residual. Delays are selected greedily by correlation, then the selected
// set is refit jointly. Gains are absolute (carrier phases absorbed), so the
// fitted model convolves with carrier 0.
inline std::vector<ChannelEstimate> estimate_residual_channel(const SignalBuffer& residual,
                                                              const SignalBuffer& x_si,
                                                              std::size_t t_train,
                                                              int max_taps) {
  require(max_taps >= 1, "tap budget must be at least one");
  require(t_train > 0, "training window must be non-empty");
  const std::size_t n = std::min(residual.size(), x_si.size());
  const std::size_t lead = std::max(residual.leading_invalid, x_si.leading_invalid);
  require(n > lead + t_train, "training window exceeds the buffers");
  const std::size_t d_max = std::min<std::size_t>(128, n - lead - t_train);
  const std::size_t start = lead + d_max;

  std::vector<Complex> work(residual.samples.begin(), residual.samples.end());
  std::vector<int> chosen;
  std::vector<Complex> gains;

  for (int pass = 0; pass < max_taps; ++pass) {
    int best_d = -1;
    double best_score = 0.0;
    for (std::size_t d = 0; d <= d_max; ++d) {
      if (std::find(chosen.begin(), chosen.end(), static_cast<int>(d)) != chosen.end())
        continue;
      Complex num{0.0, 0.0};
      double den = 0.0;
      for (std::size_t i = start; i < start + t_train; ++i) {
        const Complex ref = x_si.samples[i - d];
        num += std::conj(ref) * work[i];
        den += std::norm(ref);
      }
      if (den <= 0.0) continue;
      const double score = std::norm(num) / den;  // energy removed by this tap
      if (best_d < 0 || score > best_score) {
        best_d = static_cast<int>(d);
        best_score = score;
      }
    }
    if (best_d < 0) throw DegenerateInputError("probe signal has no energy");
    chosen.push_back(best_d);

    // Joint refit over the chosen set.
    const std::size_t m = chosen.size();
    std::vector<std::vector<Complex>> gram(m, std::vector<Complex>(m, Complex{0, 0}));
    std::vector<Complex> rhs(m, Complex{0, 0});
    for (std::size_t i = start; i < start + t_train; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const Complex xj = x_si.samples[i - static_cast<std::size_t>(chosen[j])];
        rhs[j] += std::conj(xj) * residual.samples[i];
        for (std::size_t k = 0; k < m; ++k)
          gram[j][k] += std::conj(xj) * x_si.samples[i - static_cast<std::size_t>(chosen[k])];
      }
    }
    gains = detail::solve_hermitian(gram, rhs);

    for (std::size_t i = start; i < start + t_train; ++i) {
      Complex fit{0.0, 0.0};
      for (std::size_t j = 0; j < m; ++j)
        fit += gains[j] * x_si.samples[i - static_cast<std::size_t>(chosen[j])];
      work[i] = residual.samples[i] - fit;
    }
  }

  std::vector<ChannelEstimate> taps;
  taps.reserve(chosen.size());
  for (std::size_t j = 0; j < chosen.size(); ++j)
    taps.push_back(ChannelEstimate{gains[j],
                                   samples_to_delay(chosen[j], x_si.sample_period_s)});
  std::sort(taps.begin(), taps.end(),
            [](const ChannelEstimate& a, const ChannelEstimate& b) { return a.tau_s < b.tau_s; });
  return taps;
}

// Exact residual channel left behind by an analog canceller that used the
// (rho, tau) estimate: the true taps minus the rho-scaled taps shifted by the
// delay error. Gains include the carrier rotations, so the model convolves
// with carrier 0. Taps landing on the same sample merge; vanishing taps drop.
inline ChannelModel true_residual_channel(const ChannelModel& si_channel,
                                          const ChannelEstimate& estimate,
                                          double carrier_hz, double sample_period_s) {
  si_channel.validate();
  const double T = sample_period_s;
  const int tau_q = delay_to_samples(estimate.tau_s, T);
  const int first_q = delay_to_samples(si_channel.taps.front().delay_s, T);
  const int shift = tau_q - first_q;

  std::vector<std::pair<int, Complex>> raw;
  double max_gain = 0.0;
  for (const auto& tap : si_channel.taps) {
    const int dq = delay_to_samples(tap.delay_s, T);
    const int eq = dq + shift;
    require(eq >= 0, "estimated delay shifts a tap to negative time");
    const Complex true_part =
        tap.gain * std::polar(1.0, -2.0 * std::numbers::pi * carrier_hz * dq * T);
    const Complex est_part = estimate.rho * tap.gain *
                             std::polar(1.0, -2.0 * std::numbers::pi * carrier_hz * eq * T);
    raw.emplace_back(dq, true_part);
    raw.emplace_back(eq, -est_part);
    max_gain = std::max({max_gain, std::abs(true_part), std::abs(est_part)});
  }
  std::sort(raw.begin(), raw.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  ChannelModel out;
  for (const auto& [dq, g] : raw) {
    if (!out.taps.empty() &&
        delay_to_samples(out.taps.back().delay_s, T) == dq) {
      out.taps.back().gain += g;
    } else {
      out.taps.push_back(ChannelTap{g, samples_to_delay(dq, T)});
    }
  }
  std::erase_if(out.taps, [&](const ChannelTap& t) {
    return std::abs(t.gain) <= 1e-14 * std::max(max_gain, 1.0);
  });
  return out;  // may be empty when the estimate is perfect
}

}  // namespace fdsim
