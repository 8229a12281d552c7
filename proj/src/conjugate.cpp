#include "cpx/conjugate.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "cpx/error.hpp"

namespace cpx {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_finite(double y) {
  if (!std::isfinite(y)) throw UsageError("non-finite observation");
}

std::array<double, 3> shift_raw_moments(const std::array<double, 3>& raw, double shift) {
  // E[(X-s)^m] from raw moments
  const double m1 = raw[0], m2 = raw[1], m3 = raw[2], s = shift;
  return {m1 - s, m2 - 2 * s * m1 + s * s, m3 - 3 * s * m2 + 3 * s * s * m1 - s * s * s};
}

}  // namespace

ConjugateParams conj_prior(const ConjugateFamily& family) {
  if (const auto* g = std::get_if<GaussianMeanParams>(&family)) {
    const double t2 = g->tau0 * g->tau0;
    return {g->sigma * g->sigma / t2, g->mu0 / t2};
  }
  const auto& v = std::get<GaussianVarParams>(family);
  return {2.0 * (v.alpha + 1.0), v.beta};
}

double conj_log_normalizer(const ConjugateParams& s, const ConjugateFamily& family) {
  if (const auto* g = std::get_if<GaussianMeanParams>(&family)) {
    const double s2 = g->sigma * g->sigma;
    return 0.5 * (kLog2Pi + std::log(s2 / s.nu)) + s.chi * s.chi * s2 / (2.0 * s.nu);
  }
  const double alpha = s.nu / 2.0 - 1.0;
  return std::lgamma(alpha) - alpha * std::log(s.chi);
}

ConjugateUpdate conj_update(const ConjugateParams& s, double y, const ConjugateFamily& family) {
  check_finite(y);
  double log_h = 0.0, t = 0.0;
  if (const auto* g = std::get_if<GaussianMeanParams>(&family)) {
    const double s2 = g->sigma * g->sigma;
    log_h = -0.5 * (kLog2Pi + std::log(s2)) - y * y / (2.0 * s2);
    t = y / s2;
  } else {
    const auto& v = std::get<GaussianVarParams>(family);
    log_h = -0.5 * kLog2Pi;
    t = 0.5 * (y - v.mu) * (y - v.mu);
  }
  ConjugateParams next{s.nu + 1.0, s.chi + t};
  const double lp = log_h - conj_log_normalizer(s, family) + conj_log_normalizer(next, family);
  return {next, lp};
}

double conj_moment(const ConjugateParams& s, const ConjugateFamily& family, int m) {
  if (m < 1 || m > 3) throw UsageError("moment order must be 1, 2 or 3");
  if (const auto* g = std::get_if<GaussianMeanParams>(&family)) {
    GaussianMeanKernel k(*g);
    return k.moments_about(k.from_conjugate(s), 0.0)[static_cast<std::size_t>(m - 1)];
  }
  const double alpha = s.nu / 2.0 - 1.0, beta = s.chi;
  if (!(alpha > m)) {
    throw UsageError("inverse-gamma moment of order " + std::to_string(m) + " requires alpha > " + std::to_string(m));
  }
  double value = 1.0;
  for (int k = 1; k <= m; ++k) value *= beta / (alpha - k);
  return value;
}

GaussianMeanKernel::GaussianMeanKernel(const GaussianMeanParams& p) : p_(p), sig2_(p.sigma * p.sigma) {
  validate(ObservationFamily{p});
}

double GaussianMeanKernel::absorb(State& s, double y) const {
  const double pv = s.var + sig2_;
  const double d = y - s.mean;
  const double lp = -0.5 * (kLog2Pi + std::log(pv)) - d * d / (2.0 * pv);
  const double gain = s.var / pv;
  s.mean += gain * d;
  s.var = s.var * sig2_ / pv;
  return lp;
}

std::array<double, 3> GaussianMeanKernel::moments_about(const State& s, double shift) const {
  const double a = s.mean - shift;
  return {a, a * a + s.var, a * a * a + 3.0 * a * s.var};
}

double GaussianMeanKernel::sample(const State& s, Rng& rng) const {
  std::normal_distribution<double> z(0.0, 1.0);
  return s.mean + std::sqrt(s.var) * z(rng);
}

ConjugateParams GaussianMeanKernel::to_conjugate(const State& s) const {
  return {sig2_ / s.var, s.mean / s.var};
}

GaussianMeanKernel::State GaussianMeanKernel::from_conjugate(const ConjugateParams& c) const {
  const double var = sig2_ / c.nu;
  return {c.chi * var, var};
}

GaussianVarKernel::GaussianVarKernel(const GaussianVarParams& p) : p_(p) { validate(ObservationFamily{p}); }

double GaussianVarKernel::absorb(State& s, double y) const {
  const double d = 0.5 * (y - p_.mu) * (y - p_.mu);
  const double a1 = s.alpha + 0.5, b1 = s.beta + d;
  const double lp = std::lgamma(a1) - std::lgamma(s.alpha) + s.alpha * std::log(s.beta) - a1 * std::log(b1) -
                    0.5 * kLog2Pi;
  s.alpha = a1;
  s.beta = b1;
  return lp;
}

std::array<double, 3> GaussianVarKernel::moments_about(const State& s, double shift) const {
  if (!(s.alpha > 3.0)) throw UsageError("inverse-gamma third moment requires alpha > 3");
  const double a = s.alpha, b = s.beta;
  const double m1 = b / (a - 1.0);
  const double m2 = m1 * b / (a - 2.0);
  const double m3 = m2 * b / (a - 3.0);
  return shift_raw_moments({m1, m2, m3}, shift);
}

double GaussianVarKernel::sample(const State& s, Rng& rng) const {
  std::gamma_distribution<double> g(s.alpha, 1.0);
  return s.beta / g(rng);
}

ConjugateParams GaussianVarKernel::to_conjugate(const State& s) const { return {2.0 * (s.alpha + 1.0), s.beta}; }

GaussianVarKernel::State GaussianVarKernel::from_conjugate(const ConjugateParams& c) const {
  return {c.nu / 2.0 - 1.0, c.chi};
}

}  // namespace cpx
