#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "cpx/forward.hpp"
#include "cpx/model.hpp"
#include "cpx/posterior.hpp"
#include "oracle/enumerate.hpp"
#include "oracle/quadrature.hpp"

namespace testutil {

inline double rel_err(double a, double b) {
  if (a == b) return 0.0;
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

// Relative error with an absolute floor at roundoff level, for probabilities.
inline bool prob_close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::abs(b) + 1e-15; }

// Piecewise-constant Gaussian series with random jumps.
inline std::vector<double> gaussian_series(std::mt19937_64& rng, int n, double jump_sd, double noise_sd,
                                           double p_change) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::bernoulli_distribution B(p_change);
  std::vector<double> y(n);
  double h = jump_sd * N(rng);
  for (int i = 0; i < n; ++i) {
    if (i > 0 && B(rng)) h = jump_sd * N(rng);
    y[i] = h + noise_sd * N(rng);
  }
  return y;
}

inline double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }

// Segment log marginal likelihood for the Laplace model by quadrature.
inline oracle::SegmentLogML laplace_segment(const std::vector<double>& y, double mu, double tau, double sigma) {
  return [&y, mu, tau, sigma](int a, int b) {
    oracle::LaplaceQuad q;
    q.z.push_back(mu);
    q.w.push_back(1 / tau);
    for (int l = a; l <= b; ++l) {
      q.z.push_back(y[l - 1]);
      q.w.push_back(1 / sigma);
    }
    return q.log_z0() - std::log(2 * tau) - (b - a + 1) * std::log(2 * sigma);
  };
}

inline oracle::LaplaceQuad laplace_posterior(const std::vector<double>& y, int a, int b, double mu, double tau,
                                             double sigma) {
  oracle::LaplaceQuad q;
  q.z.push_back(mu);
  q.w.push_back(1 / tau);
  for (int l = a; l <= b; ++l) {
    q.z.push_back(y[l - 1]);
    q.w.push_back(1 / sigma);
  }
  return q;
}

// Segments [a, b] of a configuration on 1..n (the initial segment included when nonempty).
inline std::vector<std::pair<int, int>> segments_of(const std::vector<int>& cps, int n) {
  std::vector<std::pair<int, int>> out;
  int start = 1;
  for (int c : cps) {
    if (c > start) out.emplace_back(start, c - 1);
    start = c;
  }
  out.emplace_back(start, n);
  return out;
}

}  // namespace testutil
