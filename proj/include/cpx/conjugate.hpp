#pragma once

#include <array>
#include <variant>

#include "cpx/model.hpp"
#include "cpx/rng.hpp"

namespace cpx {

using ConjugateFamily = std::variant<GaussianMeanParams, GaussianVarParams>;

// Natural-parameter view of a conjugate posterior.
//   Gaussian mean, known sigma: g(x) ~ exp(chi x - nu x^2 / (2 sigma^2)), T(y) = y / sigma^2
//   Gaussian variance, known mu: g(x) ~ x^(-nu/2) exp(-chi / x),        T(y) = (y - mu)^2 / 2
struct ConjugateParams {
  double nu;
  double chi;
};

struct ConjugateUpdate {
  ConjugateParams state;
  double log_predictive;
};

ConjugateParams conj_prior(const ConjugateFamily& family);
// Log normalizer A~(nu, chi) of the prior kernel.
double conj_log_normalizer(const ConjugateParams& s, const ConjugateFamily& family);
ConjugateUpdate conj_update(const ConjugateParams& s, double y, const ConjugateFamily& family);
// E[X^m], m in {1,2,3}.
double conj_moment(const ConjugateParams& s, const ConjugateFamily& family, int m);

// Hot-path kernels. Each kernel has a small State, absorbs one observation at
// a time and returns ln r_ji.

struct GaussianMeanState {
  double mean;
  double var;
};

class GaussianMeanKernel {
 public:
  using State = GaussianMeanState;
  explicit GaussianMeanKernel(const GaussianMeanParams& p);

  State prior() const { return {p_.mu0, p_.tau0 * p_.tau0}; }
  double absorb(State& s, double y) const;
  // E[(X - shift)^m] for m = 1..3
  std::array<double, 3> moments_about(const State& s, double shift) const;
  double sample(const State& s, Rng& rng) const;
  ConjugateParams to_conjugate(const State& s) const;
  State from_conjugate(const ConjugateParams& c) const;
  const GaussianMeanParams& params() const { return p_; }

 private:
  GaussianMeanParams p_;
  double sig2_;
};

struct GaussianVarState {
  double alpha;
  double beta;
};

class GaussianVarKernel {
 public:
  using State = GaussianVarState;
  explicit GaussianVarKernel(const GaussianVarParams& p);

  State prior() const { return {p_.alpha, p_.beta}; }
  double absorb(State& s, double y) const;
  // Throws UsageError when alpha <= 3 (third moment undefined).
  std::array<double, 3> moments_about(const State& s, double shift) const;
  double sample(const State& s, Rng& rng) const;
  ConjugateParams to_conjugate(const State& s) const;
  State from_conjugate(const ConjugateParams& c) const;
  const GaussianVarParams& params() const { return p_; }

 private:
  GaussianVarParams p_;
};

}  // namespace cpx
