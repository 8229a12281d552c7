#pragma once

#include <array>
#include <optional>
#include <vector>

#include "cpx/model.hpp"
#include "cpx/rng.hpp"

namespace cpx {

struct Breakpoint {
  double z;  // location
  double w;  // inverse scale
};

// Posterior height law of a Laplace change-in-median segment,
//   density ~ exp(-E(x)),  E(x) = sum_l w_l |x - z_l|.
class LaplaceSegState {
 public:
  LaplaceSegState() = default;
  static LaplaceSegState prior(double mu, double tau);
  static LaplaceSegState from_breakpoints(std::vector<Breakpoint> bps);

  const std::vector<Breakpoint>& breakpoints() const { return bp_; }
  double total_weight() const { return total_w_; }
  double log_z0() const { return log_z0_; }
  // -min E, the stabilizer pulled out of every integral.
  double stabilizer() const { return stabilizer_; }

  // Inserts (y, w) and refreshes the cached partition function.
  void insert(double y, double w);

 private:
  void refresh();

  std::vector<Breakpoint> bp_;
  double total_w_ = 0.0;
  double log_z0_ = 0.0;
  double stabilizer_ = 0.0;
};

// Inserts y with inverse scale 1/sigma; returns ln r = ln Z_new - ln Z_old - ln(2 sigma).
double lap_insert(LaplaceSegState& s, double y, double sigma);

// ln of the integral of exp(-E). `stabilizer` overrides the default -min E.
double lap_log_partition(const LaplaceSegState& s, std::optional<double> stabilizer = std::nullopt);
double lap_mode(const LaplaceSegState& s);
double lap_moment(const LaplaceSegState& s, int m);
// E[(X - shift)^m] for m = 1..3
std::array<double, 3> lap_moments_about(const LaplaceSegState& s, double shift);
double lap_abs_moment(const LaplaceSegState& s, double center);
double lap_energy_expectation(const LaplaceSegState& s);
double lap_sample_height(const LaplaceSegState& s, Rng& rng);

// J_p(lam, w) = int_0^w t^p exp(-lam t) dt for p = 0..P (P <= 3). w may be +inf when lam > 0.
void incomplete_exp_moments(double lam, double w, int P, double* out);

class LaplaceKernel {
 public:
  using State = LaplaceSegState;
  explicit LaplaceKernel(const LaplaceMedianParams& p);

  State prior() const { return LaplaceSegState::prior(p_.mu, p_.tau); }
  double absorb(State& s, double y) const { return lap_insert(s, y, p_.sigma); }
  std::array<double, 3> moments_about(const State& s, double shift) const { return lap_moments_about(s, shift); }
  double sample(const State& s, Rng& rng) const { return lap_sample_height(s, rng); }
  const LaplaceMedianParams& params() const { return p_; }

 private:
  LaplaceMedianParams p_;
};

}  // namespace cpx
