#include "cpx/pointwise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpx/error.hpp"

namespace cpx {

std::vector<double> changepoint_marginals(const BackwardTable& bt) {
  const GridLayout& g = *bt.layout;
  const int n = g.n();
  std::vector<double> qt(static_cast<std::size_t>(n) + 2, 0.0);  // 1-based, qt[n+1] = 1
  qt[static_cast<std::size_t>(n) + 1] = 1.0;
  for (int i = n; i >= 1; --i) {
    const int last = g.row_last(i);
    double acc = 0.0;
    for (int l = i; l <= last; ++l) acc += bt.value[g.row_entry(i, l)] * qt[static_cast<std::size_t>(l) + 1];
    qt[static_cast<std::size_t>(i)] = acc;
  }
  return {qt.begin() + 1, qt.begin() + 1 + n};
}

double expected_count(const std::vector<double>& q_tilde) {
  return std::accumulate(q_tilde.begin(), q_tilde.end(), 0.0);
}

std::vector<double> segment_weights(const BackwardTable& bt, const std::vector<double>& q_tilde) {
  const GridLayout& g = *bt.layout;
  const int n = g.n();
  std::vector<double> w(bt.value.size());
  for (int i = 1; i <= n; ++i) {
    const double next = i < n ? q_tilde[static_cast<std::size_t>(i)] : 1.0;
    for (std::size_t e = g.col_begin(i); e < g.col_end(i); ++e) w[e] = bt.value[e] * next;
  }
  return w;
}

std::vector<double> direct_mixture(const BackwardTable& bt, const std::vector<double>& q_tilde,
                                   const std::vector<double>& functionals, int width, int i) {
  const GridLayout& g = *bt.layout;
  const int n = g.n();
  const auto K = static_cast<std::size_t>(width);
  std::vector<double> acc(K, 0.0);
  for (int l = i; l <= n; ++l) {
    const double next = l < n ? q_tilde[static_cast<std::size_t>(l)] : 1.0;
    for (std::size_t e = g.col_begin(l); e < g.col_end(l) && g.start_of(e) <= i; ++e) {
      const double w = bt.value[e] * next;
      for (std::size_t k = 0; k < K; ++k) acc[k] += w * functionals[e * K + k];
    }
  }
  return acc;
}

std::vector<double> height_moment_trajectory(const BackwardTable& bt, const std::vector<double>& q_tilde,
                                             const std::vector<double>& functionals, int width,
                                             const TrajectoryOptions& options) {
  const GridLayout& g = *bt.layout;
  const int n = g.n();
  const auto K = static_cast<std::size_t>(width);
  if (functionals.size() != g.size() * K) throw UsageError("functional table does not match grid");
  std::vector<double> traj(static_cast<std::size_t>(n) * K, 0.0);
  std::vector<double> E(K, 0.0);
  std::size_t touches = 0;

  for (std::size_t e = g.col_begin(n); e < g.col_end(n); ++e) {
    for (std::size_t k = 0; k < K; ++k) E[k] += bt.value[e] * functionals[e * K + k];
    ++touches;
  }
  std::copy(E.begin(), E.end(), traj.begin() + static_cast<std::ptrdiff_t>((n - 1) * K));

  for (int i = n - 1; i >= 1; --i) {
    // segments starting at i+1 no longer cover i
    const int r = i + 1;
    for (int l = r, last = g.row_last(r); l <= last; ++l) {
      const std::size_t e = g.row_entry(r, l);
      const double w = bt.value[e] * (l < n ? q_tilde[static_cast<std::size_t>(l)] : 1.0);
      for (std::size_t k = 0; k < K; ++k) E[k] -= w * functionals[e * K + k];
      ++touches;
    }
    // segments ending at i now cover it
    const double next = q_tilde[static_cast<std::size_t>(i)];
    for (std::size_t e = g.col_begin(i); e < g.col_end(i); ++e) {
      const double w = bt.value[e] * next;
      for (std::size_t k = 0; k < K; ++k) E[k] += w * functionals[e * K + k];
      ++touches;
    }
    if (options.resync_every > 0 && (n - i) % options.resync_every == 0) {
      E = direct_mixture(bt, q_tilde, functionals, width, i);
    }
    std::copy(E.begin(), E.end(), traj.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i - 1) * K));
  }
  if (options.touch_counter) *options.touch_counter += touches;
  return traj;
}

Band summary_band(double shift, double m1, double m2, double m3, int* clamped) {
  double var = m2 - m1 * m1;
  if (var < 0.0) {
    var = 0.0;
    if (clamped) ++*clamped;
  }
  const double sd = std::sqrt(var);
  const double central3 = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;
  const double sk = sd > 0.0 ? central3 / (sd * sd * sd) : 0.0;
  const double mean = shift + m1;
  const double lo = mean - 2.0 * (sd - (sk < 0.0 ? sk : 0.0));
  const double hi = mean + 2.0 * (sd + (sk >= 0.0 ? sk : 0.0));
  return {mean, sd, sk, lo, hi};
}

double median(std::vector<double> values) {
  if (values.empty()) throw UsageError("median of an empty sequence");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  double m = values[mid];
  if (values.size() % 2 == 0) {
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

MarginalReport marginal_report(const TimeSeries& data, const ForwardResult& fwd, const BackwardTable& bt,
                               const TrajectoryOptions& options) {
  MarginalReport rep;
  rep.q_tilde = changepoint_marginals(bt);
  rep.expected_count = expected_count(rep.q_tilde);
  const double shift = median(data.values());
  const auto F = with_kernel(fwd.model.observation, [&](const auto& kernel) {
    return particle_functionals(*bt.layout, data, kernel, 3, [&](const auto& s, int, int, double* out) {
      const auto m = kernel.moments_about(s, shift);
      out[0] = m[0];
      out[1] = m[1];
      out[2] = m[2];
    });
  });
  const auto traj = height_moment_trajectory(bt, rep.q_tilde, F, 3, options);
  const int n = data.size();
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i) * 3;
    const Band b = summary_band(shift, traj[k], traj[k + 1], traj[k + 2], &rep.clamped_variances);
    rep.mean.push_back(b.mean);
    rep.sd.push_back(b.sd);
    rep.skew.push_back(b.skew);
    rep.band_lo.push_back(b.lo);
    rep.band_hi.push_back(b.hi);
  }
  return rep;
}

}  // namespace cpx
