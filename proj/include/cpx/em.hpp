#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cpx/forward.hpp"
#include "cpx/posterior.hpp"

namespace cpx {

inline constexpr double kProbEps = 1e-12;

// ---- segment-length steps ----

double em_step_geometric(const std::vector<double>& q_tilde);
double geometric_surrogate(const std::vector<double>& q_tilde, double q);

// Survival q^i = 1 - q~_i for every timepoint.
std::vector<double> em_step_per_timepoint(const std::vector<double>& q_tilde);
double per_timepoint_surrogate(const std::vector<double>& q_tilde, const std::vector<double>& survival);

// Coefficients of c1 ln q + c2 ln(1-q) + c3 ln(1 - q/(r(1-q))).
struct NegBinCoefficients {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
};

NegBinCoefficients negbin_em_coefficients(const BackwardTable& bt, const std::vector<double>& q_tilde, int r,
                                          double q_old, std::size_t* touches = nullptr);
double negbin_em_objective(const NegBinCoefficients& c, int r, double q);
// Unique maximizer of the objective in (0, r/(r+1)); needs c1 > 0 and c3 >= 0.
double negbin_em_root(const NegBinCoefficients& c, int r);
double em_step_negbin(const BackwardTable& bt, const std::vector<double>& q_tilde, int r, double q_old);

// ---- height and observation steps ----

// Sums over every posterior segment (including the initial one) of
// P(segment) * f(segment); `weight` is the expected number of segments.
struct SegmentSums {
  double weight = 0.0;
  std::vector<double> f;
  std::size_t touches = 0;
};

SegmentSums accumulate_segments(const BackwardTable& bt, const std::vector<double>& q_tilde,
                                const std::vector<double>& functionals, int width);

// Per-particle (E|X - mu|, E[energy]) under H_ji for the Laplace kernel.
std::vector<double> laplace_em_functionals(const GridLayout& g, const TimeSeries& y, const LaplaceMedianParams& p);

double em_step_tau(const BackwardTable& bt, const std::vector<double>& q_tilde, const TimeSeries& y,
                   const LaplaceMedianParams& p);
double em_step_sigma(const BackwardTable& bt, const std::vector<double>& q_tilde, const TimeSeries& y,
                     const LaplaceMedianParams& p);
// From precomputed Laplace sums (f = {sum E|X-mu|, sum E[energy]}).
double tau_from_sums(const SegmentSums& s);
double sigma_from_sums(const SegmentSums& s, const LaplaceMedianParams& p, int n);
// Expected complete log-likelihood terms that depend on tau or sigma.
double tau_surrogate(const SegmentSums& s, double tau);
double sigma_surrogate(const SegmentSums& s, const LaplaceMedianParams& p, int n, double sigma);

// Gaussian change in mean: f = {E(X-mu0)^2, E sum_l (y_l - X)^2}.
std::vector<double> gaussian_mean_em_functionals(const GridLayout& g, const TimeSeries& y,
                                                 const GaussianMeanParams& p);
// Gaussian change in variance: f = {E[1/X], E[1/X] sum y, E[1/X] count}.
std::vector<double> gaussian_var_em_functionals(const GridLayout& g, const TimeSeries& y, const GaussianVarParams& p);

// ---- driver ----

struct EmConfig {
  double tol = 1e-6;
  int max_iter = 200;
  int osc_window = 8;
  FilterOptions filter;
};

struct EmIterate {
  ModelConfig model;
  std::vector<double> theta;
  double loglik = 0.0;
  double expected_count = 0.0;
};

struct EMTrace {
  std::vector<std::string> targets;
  std::vector<EmIterate> iterates;
  bool converged = false;
  bool oscillation_detected = false;
  std::size_t best = 0;  // index of the returned iterate
  const ModelConfig& final_model() const { return iterates[best].model; }
};

// One EM update of `targets` (subset of q, tau, sigma, mu) from a completed
// forward/backward pass.
ModelConfig em_update(const TimeSeries& data, const ModelConfig& model, const ForwardResult& fwd,
                      const BackwardTable& bt, const std::vector<double>& q_tilde,
                      const std::vector<std::string>& targets);

std::vector<double> theta_of(const ModelConfig& model, const std::vector<std::string>& targets);

EMTrace em_run(const TimeSeries& data, const ModelConfig& model, const std::vector<std::string>& targets,
               const EmConfig& config = {});

}  // namespace cpx
