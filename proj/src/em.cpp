#include "cpx/em.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cpx/error.hpp"
#include "cpx/pointwise.hpp"

namespace cpx {

namespace {

double clamp_prob(double q) { return std::clamp(q, kProbEps, 1.0 - kProbEps); }

bool has_target(const std::vector<std::string>& targets, const std::string& t) {
  return std::find(targets.begin(), targets.end(), t) != targets.end();
}

}  // namespace

double em_step_geometric(const std::vector<double>& q_tilde) {
  if (q_tilde.empty()) throw UsageError("empty marginal sequence");
  return clamp_prob(expected_count(q_tilde) / static_cast<double>(q_tilde.size()));
}

double geometric_surrogate(const std::vector<double>& q_tilde, double q) {
  const double k = expected_count(q_tilde);
  return k * std::log(q) + (static_cast<double>(q_tilde.size()) - k) * std::log1p(-q);
}

std::vector<double> em_step_per_timepoint(const std::vector<double>& q_tilde) {
  std::vector<double> s(q_tilde.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::clamp(1.0 - q_tilde[i], 0.0, 1.0);
  return s;
}

double per_timepoint_surrogate(const std::vector<double>& q_tilde, const std::vector<double>& survival) {
  double acc = 0.0;
  for (std::size_t i = 0; i < q_tilde.size(); ++i) {
    if (q_tilde[i] > 0.0) acc += q_tilde[i] * std::log1p(-survival[i]);
    if (q_tilde[i] < 1.0) acc += (1.0 - q_tilde[i]) * std::log(survival[i]);
  }
  return acc;
}

NegBinCoefficients negbin_em_coefficients(const BackwardTable& bt, const std::vector<double>& q_tilde, int r,
                                          double q_old, std::size_t* touches) {
  const GridLayout& g = *bt.layout;
  const int n = g.n();
  NegBinTail tail(q_old, r, n);
  NegBinCoefficients c;
  // first segment empty: changepoint at 1
  c.c1 += q_tilde[0];
  c.c2 -= q_tilde[0];
  std::size_t count = 0;
  for (int i = 1; i <= n; ++i) {
    const double next = i < n ? q_tilde[static_cast<std::size_t>(i)] : 1.0;
    for (std::size_t e = g.col_begin(i); e < g.col_end(i); ++e) {
      ++count;
      const int j = g.start_of(e);
      const double w = bt.value[e] * next;
      if (j == 0) {
        if (i < n) {
          c.c1 += w;
          c.c2 -= w;
          c.c3 += w * i;
        } else {
          c.c3 += w * n;
        }
      } else if (i < n) {
        c.c1 += w * r;
        c.c2 += w * (i - j);
      } else {
        c.c1 += w * r;
        c.c2 += w * tail.tail_mean(n - j);
      }
    }
  }
  if (touches) *touches += count;
  return c;
}

double negbin_em_objective(const NegBinCoefficients& c, int r, double q) {
  return c.c1 * std::log(q) + c.c2 * std::log1p(-q) + c.c3 * std::log1p(-q / (r * (1.0 - q)));
}

double negbin_em_root(const NegBinCoefficients& c, int r) {
  if (!(c.c1 > 0.0) || !(c.c3 >= 0.0)) throw NumericError("negative binomial EM needs c1 > 0 and c3 >= 0");
  // (r+1)(c1+c2) q^2 - ((2r+1)c1 + r c2 + c3) q + r c1 = 0, smaller root
  const double A = (r + 1.0) * (c.c1 + c.c2);
  const double B = (2.0 * r + 1.0) * c.c1 + r * c.c2 + c.c3;
  const double C = r * c.c1;
  const double disc = B * B - 4.0 * A * C;
  if (!(disc >= 0.0) || !(B > 0.0)) throw NumericError("negative binomial EM quadratic has no admissible root");
  const double q = 2.0 * C / (B + std::sqrt(disc));
  const double upper = static_cast<double>(r) / (r + 1.0);
  if (!(q > 0.0) || q > upper) throw NumericError("negative binomial EM root outside (0, r/(r+1))");
  return q;
}

double em_step_negbin(const BackwardTable& bt, const std::vector<double>& q_tilde, int r, double q_old) {
  return negbin_em_root(negbin_em_coefficients(bt, q_tilde, r, q_old), r);
}

SegmentSums accumulate_segments(const BackwardTable& bt, const std::vector<double>& q_tilde,
                                const std::vector<double>& functionals, int width) {
  const GridLayout& g = *bt.layout;
  const int n = g.n();
  const auto K = static_cast<std::size_t>(width);
  SegmentSums s;
  s.f.assign(K, 0.0);
  for (int i = 1; i <= n; ++i) {
    const double next = i < n ? q_tilde[static_cast<std::size_t>(i)] : 1.0;
    for (std::size_t e = g.col_begin(i); e < g.col_end(i); ++e) {
      const double w = bt.value[e] * next;
      s.weight += w;
      for (std::size_t k = 0; k < K; ++k) s.f[k] += w * functionals[e * K + k];
      ++s.touches;
    }
  }
  return s;
}

std::vector<double> laplace_em_functionals(const GridLayout& g, const TimeSeries& y, const LaplaceMedianParams& p) {
  LaplaceKernel kernel(p);
  return particle_functionals(g, y, kernel, 2, [&](const LaplaceSegState& s, int, int, double* out) {
    out[0] = lap_abs_moment(s, p.mu);
    out[1] = lap_energy_expectation(s);
  });
}

double tau_from_sums(const SegmentSums& s) { return s.f[0] / s.weight; }

double sigma_from_sums(const SegmentSums& s, const LaplaceMedianParams& p, int n) {
  // sum_l |y_l - x| = sigma * (energy - |x - mu| / tau)
  const double m1 = p.sigma * s.f[1] - p.sigma / p.tau * s.f[0];
  return m1 / n;
}

double tau_surrogate(const SegmentSums& s, double tau) { return -s.weight * std::log(2.0 * tau) - s.f[0] / tau; }

double sigma_surrogate(const SegmentSums& s, const LaplaceMedianParams& p, int n, double sigma) {
  const double m1 = p.sigma * s.f[1] - p.sigma / p.tau * s.f[0];
  return -n * std::log(2.0 * sigma) - m1 / sigma;
}

double em_step_tau(const BackwardTable& bt, const std::vector<double>& q_tilde, const TimeSeries& y,
                   const LaplaceMedianParams& p) {
  return tau_from_sums(accumulate_segments(bt, q_tilde, laplace_em_functionals(*bt.layout, y, p), 2));
}

double em_step_sigma(const BackwardTable& bt, const std::vector<double>& q_tilde, const TimeSeries& y,
                     const LaplaceMedianParams& p) {
  return sigma_from_sums(accumulate_segments(bt, q_tilde, laplace_em_functionals(*bt.layout, y, p), 2), p,
                         y.size());
}

std::vector<double> gaussian_mean_em_functionals(const GridLayout& g, const TimeSeries& y,
                                                 const GaussianMeanParams& p) {
  GaussianMeanKernel kernel(p);
  double ref = 0.0, sd = 0.0, sd2 = 0.0;
  int len = 0;
  return particle_functionals(g, y, kernel, 2, [&](const GaussianMeanState& s, int j, int i, double* out) {
    if (i == GridLayout::row_first(j)) {
      ref = y(i);
      sd = sd2 = 0.0;
      len = 0;
    }
    const double d = y(i) - ref;
    sd += d;
    sd2 += d * d;
    ++len;
    const double a = s.mean - ref;
    out[0] = (s.mean - p.mu0) * (s.mean - p.mu0) + s.var;
    out[1] = sd2 - 2.0 * a * sd + len * a * a + len * s.var;
  });
}

std::vector<double> gaussian_var_em_functionals(const GridLayout& g, const TimeSeries& y, const GaussianVarParams& p) {
  GaussianVarKernel kernel(p);
  double sy = 0.0;
  int len = 0;
  return particle_functionals(g, y, kernel, 3, [&](const GaussianVarState& s, int j, int i, double* out) {
    if (i == GridLayout::row_first(j)) {
      sy = 0.0;
      len = 0;
    }
    sy += y(i);
    ++len;
    const double inv = s.alpha / s.beta;
    out[0] = inv;
    out[1] = inv * sy;
    out[2] = inv * len;
  });
}

ModelConfig em_update(const TimeSeries& data, const ModelConfig& model, const ForwardResult& fwd,
                      const BackwardTable& bt, const std::vector<double>& q_tilde,
                      const std::vector<std::string>& targets) {
  ModelConfig next = model;
  const int n = data.size();
  for (const auto& t : targets) {
    if (t != "q" && t != "tau" && t != "sigma" && t != "mu") throw UsageError("unknown EM target '" + t + "'");
  }
  if (has_target(targets, "q")) {
    if (std::holds_alternative<GeometricPrior>(model.length_prior)) {
      next.length_prior = GeometricPrior{em_step_geometric(q_tilde)};
    } else if (const auto* nb = std::get_if<NegBinPrior>(&model.length_prior)) {
      next.length_prior = NegBinPrior{em_step_negbin(bt, q_tilde, nb->r, nb->q), nb->r};
    } else {
      next.length_prior = PerTimepointPrior{em_step_per_timepoint(q_tilde)};
    }
  }
  const bool heights = has_target(targets, "tau") || has_target(targets, "sigma") || has_target(targets, "mu");
  if (!heights) return next;

  if (const auto* lp = std::get_if<LaplaceMedianParams>(&model.observation)) {
    if (has_target(targets, "mu")) throw UsageError("mu is not estimated for the Laplace model; use the data median");
    const auto sums = accumulate_segments(bt, q_tilde, laplace_em_functionals(*fwd.layout, data, *lp), 2);
    auto p = *lp;
    if (has_target(targets, "tau")) p.tau = tau_from_sums(sums);
    if (has_target(targets, "sigma")) p.sigma = sigma_from_sums(sums, *lp, n);
    next.observation = p;
  } else if (const auto* gm = std::get_if<GaussianMeanParams>(&model.observation)) {
    if (has_target(targets, "mu")) throw UsageError("mu0 is held fixed for the Gaussian mean model");
    const auto sums = accumulate_segments(bt, q_tilde, gaussian_mean_em_functionals(*fwd.layout, data, *gm), 2);
    auto p = *gm;
    if (has_target(targets, "tau")) p.tau0 = std::sqrt(sums.f[0] / sums.weight);
    if (has_target(targets, "sigma")) p.sigma = std::sqrt(sums.f[1] / n);
    next.observation = p;
  } else {
    const auto& gv = std::get<GaussianVarParams>(model.observation);
    if (has_target(targets, "sigma")) throw UsageError("the Gaussian variance model has no sigma; use tau (beta) or mu");
    const auto sums = accumulate_segments(bt, q_tilde, gaussian_var_em_functionals(*fwd.layout, data, gv), 3);
    auto p = gv;
    if (has_target(targets, "tau")) p.beta = gv.alpha * sums.weight / sums.f[0];
    if (has_target(targets, "mu")) p.mu = sums.f[1] / sums.f[2];
    next.observation = p;
  }
  return next;
}

std::vector<double> theta_of(const ModelConfig& model, const std::vector<std::string>& targets) {
  std::vector<double> th;
  for (const auto& t : targets) {
    if (t == "q") {
      if (const auto* g = std::get_if<GeometricPrior>(&model.length_prior)) th.push_back(g->q);
      else if (const auto* nb = std::get_if<NegBinPrior>(&model.length_prior)) th.push_back(nb->q);
      else {
        const auto& s = std::get<PerTimepointPrior>(model.length_prior).survival;
        th.insert(th.end(), s.begin(), s.end());
      }
    } else if (t == "tau") {
      const auto& ob = model.observation;
      if (const auto* lp = std::get_if<LaplaceMedianParams>(&ob)) th.push_back(lp->tau);
      else if (const auto* gm = std::get_if<GaussianMeanParams>(&ob)) th.push_back(gm->tau0);
      else th.push_back(std::get<GaussianVarParams>(ob).beta);
    } else if (t == "sigma") {
      const auto& ob = model.observation;
      if (const auto* lp = std::get_if<LaplaceMedianParams>(&ob)) th.push_back(lp->sigma);
      else if (const auto* gm = std::get_if<GaussianMeanParams>(&ob)) th.push_back(gm->sigma);
    } else if (t == "mu") {
      if (const auto* gv = std::get_if<GaussianVarParams>(&model.observation)) th.push_back(gv->mu);
    }
  }
  return th;
}

namespace {

struct Pass {
  ForwardResult fwd;
  BackwardTable bt;
  std::vector<double> q_tilde;
};

Pass run_pass(const TimeSeries& data, const ModelConfig& model, const FilterOptions& opt) {
  Pass p;
  p.fwd = filter(data, model, opt);
  p.bt = backward_weights(p.fwd);
  p.q_tilde = changepoint_marginals(p.bt);
  return p;
}

double max_rel_change(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    m = std::max(m, std::abs(a[k] - b[k]) / std::max(std::abs(b[k]), 1e-12));
  }
  return m;
}

}  // namespace

EMTrace em_run(const TimeSeries& data, const ModelConfig& model, const std::vector<std::string>& targets,
               const EmConfig& config) {
  if (targets.empty()) throw UsageError("EM needs at least one target");
  if (config.max_iter < 1 || !(config.tol > 0.0) || config.osc_window < 2) throw UsageError("invalid EM settings");
  EMTrace trace;
  trace.targets = targets;

  Pass pass = run_pass(data, model, config.filter);
  trace.iterates.push_back({model, theta_of(model, targets), pass.fwd.log_marginal_likelihood(),
                            expected_count(pass.q_tilde)});

  for (int step = 0; step < config.max_iter; ++step) {
    ModelConfig next;
    try {
      next = em_update(data, trace.iterates.back().model, pass.fwd, pass.bt, pass.q_tilde, targets);
      pass = run_pass(data, next, config.filter);
    } catch (const NumericError& e) {
      throw NumericError("EM iterate " + std::to_string(step + 1) + ": " + e.what());
    }
    trace.iterates.push_back(
        {next, theta_of(next, targets), pass.fwd.log_marginal_likelihood(), expected_count(pass.q_tilde)});

    const std::size_t L = trace.iterates.size();
    const auto& th = trace.iterates[L - 1].theta;
    if (max_rel_change(th, trace.iterates[L - 2].theta) < config.tol) {
      trace.converged = true;
      break;
    }
    const std::size_t from = L - 1 > static_cast<std::size_t>(config.osc_window) ? L - 1 - config.osc_window : 0;
    for (std::size_t k = from; k + 2 < L; ++k) {
      if (max_rel_change(th, trace.iterates[k].theta) < config.tol) {
        trace.oscillation_detected = true;
        break;
      }
    }
    if (trace.oscillation_detected) break;
  }
  trace.best = trace.iterates.size() - 1;
  if (trace.oscillation_detected) {
    for (std::size_t k = 0; k < trace.iterates.size(); ++k) {
      if (trace.iterates[k].loglik > trace.iterates[trace.best].loglik) trace.best = k;
    }
  }
  return trace;
}

}  // namespace cpx
