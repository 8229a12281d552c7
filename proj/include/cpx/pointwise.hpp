#pragma once

#include <cstddef>
#include <vector>

#include "cpx/forward.hpp"
#include "cpx/posterior.hpp"

namespace cpx {

// q~_i = P(C_i = i | y_1:n), returned at index i-1.
std::vector<double> changepoint_marginals(const BackwardTable& bt);
double expected_count(const std::vector<double>& q_tilde);

// Posterior probability that a segment starts at j and ends at i, per grid
// entry: c~_ji q~_{i+1} for i < n and c~_jn for i = n.
std::vector<double> segment_weights(const BackwardTable& bt, const std::vector<double>& q_tilde);

// Evaluates f(state, j, i, out) for every live particle, rebuilding the kernel
// state row by row. Output is entry-major with `width` values per entry.
template <class K, class F>
std::vector<double> particle_functionals(const GridLayout& g, const TimeSeries& y, const K& kernel, int width, F&& f) {
  std::vector<double> out(g.size() * static_cast<std::size_t>(width), 0.0);
  for (int j = 0; j <= g.n(); ++j) {
    const int last = g.row_last(j);
    if (last < 0) continue;
    auto s = kernel.prior();
    for (int i = GridLayout::row_first(j); i <= last; ++i) {
      kernel.absorb(s, y(i));
      f(s, j, i, &out[g.row_entry(j, i) * static_cast<std::size_t>(width)]);
    }
  }
  return out;
}

struct TrajectoryOptions {
  // Recompute the exact mixture every this many timepoints; 0 disables.
  int resync_every = 512;
  // Counts particle reads in the incremental sweep when set.
  std::size_t* touch_counter = nullptr;
};

// E[f(X_i) | y_1:n] for i = 1..n (row i-1, `width` values per row) from
// per-particle functionals, by the backward add/remove sweep.
std::vector<double> height_moment_trajectory(const BackwardTable& bt, const std::vector<double>& q_tilde,
                                             const std::vector<double>& functionals, int width,
                                             const TrajectoryOptions& options = {});

// The same expectation at a single timepoint, summed from scratch.
std::vector<double> direct_mixture(const BackwardTable& bt, const std::vector<double>& q_tilde,
                                   const std::vector<double>& functionals, int width, int i);

struct Band {
  double mean;
  double sd;
  double skew;
  double lo;
  double hi;
};

// Bands from moments about `shift`, E[(X-shift)^m] for m = 1..3.
// Negative variances from rounding are clamped to zero and counted.
Band summary_band(double shift, double m1, double m2, double m3, int* clamped = nullptr);

struct MarginalReport {
  std::vector<double> q_tilde;
  double expected_count = 0.0;
  std::vector<double> mean, sd, skew, band_lo, band_hi;
  int clamped_variances = 0;
};

MarginalReport marginal_report(const TimeSeries& data, const ForwardResult& fwd, const BackwardTable& bt,
                               const TrajectoryOptions& options = {});

double median(std::vector<double> values);

}  // namespace cpx
