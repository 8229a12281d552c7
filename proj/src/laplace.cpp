#include "cpx/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cpx/error.hpp"

namespace cpx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Stop walking a side once exp(-g) drops below e^-80 relative to the mode.
constexpr double kTailCut = 80.0;

struct Mode {
  std::size_t k;  // index of the weighted-median breakpoint
  double x;
  double energy;  // E(x) at the mode
};

Mode find_mode(const std::vector<Breakpoint>& bp, double W) {
  double cum = 0.0;
  std::size_t k = 0;
  for (; k + 1 < bp.size(); ++k) {
    cum += bp[k].w;
    if (2.0 * cum >= W) break;
  }
  const double x = bp[k].z;
  double e = 0.0;
  for (const auto& b : bp) e += b.w * std::abs(x - b.z);
  return {k, x, e};
}

// One linear piece of the energy, parameterized from its end nearer the mode:
// x = near + dir * t, t in [0, width], E(x) - E(mode) = g + lam * t.
struct Piece {
  double near;
  int dir;
  double g;
  double lam;
  double width;
};

template <class F>
void walk(const std::vector<Breakpoint>& bp, double W, const Mode& md, F&& visit) {
  const std::size_t L = bp.size();
  // cumw(k) = sum_{l <= k} w_l, evaluated left to right so the sign tests agree with find_mode.
  double cum = 0.0;
  for (std::size_t l = 0; l <= md.k; ++l) cum += bp[l].w;

  double g = 0.0;
  bool cut = false;
  double c = cum;
  for (std::size_t k = md.k; k + 1 < L; ++k) {
    if (g > kTailCut) {
      cut = true;
      break;
    }
    const double lam = std::max(0.0, 2.0 * c - W);
    const double width = bp[k + 1].z - bp[k].z;
    visit(Piece{bp[k].z, +1, g, lam, width});
    g += lam * width;
    c += bp[k + 1].w;
  }
  if (!cut && g <= kTailCut) visit(Piece{bp[L - 1].z, +1, g, W, kInf});

  g = 0.0;
  cut = false;
  c = cum - bp[md.k].w;  // cumw(k*-1)
  for (std::size_t k = md.k; k >= 1; --k) {
    if (g > kTailCut) {
      cut = true;
      break;
    }
    const double lam = std::max(0.0, W - 2.0 * c);
    const double width = bp[k].z - bp[k - 1].z;
    visit(Piece{bp[k].z, -1, g, lam, width});
    g += lam * width;
    c -= bp[k - 1].w;
  }
  if (!cut && g <= kTailCut) visit(Piece{bp[0].z, -1, g, W, kInf});
}

constexpr double kBinom[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};

// int over the piece of (x - ref)^p exp(-(g + lam t)) dx for p = 0..P
void piece_moments(const Piece& pc, double ref, int P, double* out) {
  double J[4];
  incomplete_exp_moments(pc.lam, pc.width, P, J);
  const double scale = std::exp(-pc.g);
  const double delta = pc.near - ref;
  double dpow[4] = {1.0, delta, delta * delta, delta * delta * delta};
  for (int p = 0; p <= P; ++p) {
    double acc = 0.0;
    double sgn = 1.0;
    for (int q = 0; q <= p; ++q) {
      acc += kBinom[p][q] * dpow[p - q] * sgn * J[q];
      sgn *= pc.dir;
    }
    out[p] = scale * acc;
  }
}

void check_state(const LaplaceSegState& s) {
  if (s.breakpoints().empty()) throw UsageError("laplace state has no breakpoints");
}

}  // namespace

void incomplete_exp_moments(double lam, double w, int P, double* out) {
  if (std::isinf(w)) {
    double f = 1.0 / lam;
    for (int p = 0; p <= P; ++p) {
      out[p] = f;
      f *= (p + 1) / lam;
    }
    return;
  }
  if (lam == 0.0 || w == 0.0) {
    double wp = w;
    for (int p = 0; p <= P; ++p) {
      out[p] = wp / (p + 1);
      wp *= w;
    }
    return;
  }
  const double x = lam * w;
  const double ex = std::exp(-x);
  out[0] = -std::expm1(-x) / lam;
  double wp = w;
  double fact = 1.0;
  for (int p = 1; p <= P; ++p) {
    wp *= w;
    fact *= p;
    if (x < p + 1.0) {
      double term = 1.0 / (p + 1), sum = term;
      for (int k = 1; k < 500; ++k) {
        term *= x / (p + 1 + k);
        sum += term;
        if (term < 1e-17 * sum) break;
      }
      out[p] = ex * wp * sum;
    } else {
      double term = 1.0, partial = 1.0;
      for (int k = 1; k <= p; ++k) {
        term *= x / k;
        partial += term;
      }
      out[p] = fact / std::pow(lam, p + 1) * (1.0 - ex * partial);
    }
  }
}

LaplaceSegState LaplaceSegState::prior(double mu, double tau) {
  if (!(tau > 0.0) || !std::isfinite(mu)) throw UsageError("laplace prior needs finite mu and tau > 0");
  return from_breakpoints({{mu, 1.0 / tau}});
}

LaplaceSegState LaplaceSegState::from_breakpoints(std::vector<Breakpoint> bps) {
  if (bps.empty()) throw UsageError("laplace state needs at least one breakpoint");
  for (const auto& b : bps) {
    if (!std::isfinite(b.z) || !(b.w > 0.0) || !std::isfinite(b.w)) {
      throw UsageError("breakpoints need finite locations and positive inverse scales");
    }
  }
  std::stable_sort(bps.begin(), bps.end(), [](const Breakpoint& a, const Breakpoint& b) { return a.z < b.z; });
  LaplaceSegState s;
  s.bp_ = std::move(bps);
  s.total_w_ = 0.0;
  for (const auto& b : s.bp_) s.total_w_ += b.w;
  s.refresh();
  return s;
}

void LaplaceSegState::insert(double y, double w) {
  if (!std::isfinite(y)) throw UsageError("non-finite observation");
  auto pos = std::upper_bound(bp_.begin(), bp_.end(), y, [](double v, const Breakpoint& b) { return v < b.z; });
  bp_.insert(pos, Breakpoint{y, w});
  total_w_ += w;
  refresh();
}

void LaplaceSegState::refresh() {
  const Mode md = find_mode(bp_, total_w_);
  double s0 = 0.0;
  walk(bp_, total_w_, md, [&](const Piece& pc) {
    double J0;
    incomplete_exp_moments(pc.lam, pc.width, 0, &J0);
    s0 += std::exp(-pc.g) * J0;
  });
  stabilizer_ = -md.energy;
  log_z0_ = -md.energy + std::log(s0);
}

double lap_insert(LaplaceSegState& s, double y, double sigma) {
  const double old = s.log_z0();
  s.insert(y, 1.0 / sigma);
  const double lp = s.log_z0() - old - std::log(2.0 * sigma);
  if (!std::isfinite(lp)) throw NumericError("non-finite laplace predictive");
  return lp;
}

double lap_log_partition(const LaplaceSegState& s, std::optional<double> stabilizer) {
  check_state(s);
  const auto& bp = s.breakpoints();
  const Mode md = find_mode(bp, s.total_weight());
  const double m = stabilizer.value_or(-md.energy);
  // exp(-E(x) - m) = exp(-(g + E_mode + m))
  const double offset = md.energy + m;
  double acc = 0.0;
  walk(bp, s.total_weight(), md, [&](const Piece& pc) {
    double J0;
    incomplete_exp_moments(pc.lam, pc.width, 0, &J0);
    acc += std::exp(-(pc.g + offset)) * J0;
  });
  return m + std::log(acc);
}

double lap_mode(const LaplaceSegState& s) {
  check_state(s);
  return find_mode(s.breakpoints(), s.total_weight()).x;
}

std::array<double, 3> lap_moments_about(const LaplaceSegState& s, double shift) {
  check_state(s);
  const auto& bp = s.breakpoints();
  const Mode md = find_mode(bp, s.total_weight());
  double S[4] = {0, 0, 0, 0};
  walk(bp, s.total_weight(), md, [&](const Piece& pc) {
    double out[4];
    piece_moments(pc, md.x, 3, out);
    for (int p = 0; p < 4; ++p) S[p] += out[p];
  });
  const double mu[4] = {1.0, S[1] / S[0], S[2] / S[0], S[3] / S[0]};
  const double d = md.x - shift;
  const double dp[4] = {1.0, d, d * d, d * d * d};
  std::array<double, 3> res{};
  for (int m = 1; m <= 3; ++m) {
    double acc = 0.0;
    for (int p = 0; p <= m; ++p) acc += kBinom[m][p] * dp[m - p] * mu[p];
    res[static_cast<std::size_t>(m - 1)] = acc;
  }
  return res;
}

double lap_moment(const LaplaceSegState& s, int m) {
  if (m < 1 || m > 3) throw UsageError("moment order must be 1, 2 or 3");
  return lap_moments_about(s, 0.0)[static_cast<std::size_t>(m - 1)];
}

double lap_abs_moment(const LaplaceSegState& s, double center) {
  check_state(s);
  const auto& bp = s.breakpoints();
  const Mode md = find_mode(bp, s.total_weight());
  double S0 = 0.0, S1 = 0.0;
  // sign of (x - center), constant on each piece handed in
  auto add_signed = [&](const Piece& pc, double sign) {
    double out[2];
    piece_moments(pc, center, 1, out);
    S0 += out[0];
    S1 += sign * out[1];
  };
  walk(bp, s.total_weight(), md, [&](const Piece& pc) {
    const double lo = pc.dir > 0 ? pc.near : pc.near - pc.width;
    const double hi = pc.dir > 0 ? pc.near + pc.width : pc.near;
    if (center > lo && center < hi) {
      // near side first, then the part beyond the center
      const double w1 = std::abs(center - pc.near);
      add_signed(Piece{pc.near, pc.dir, pc.g, pc.lam, w1}, -pc.dir);
      add_signed(Piece{center, pc.dir, pc.g + pc.lam * w1, pc.lam, pc.width - w1}, pc.dir);
    } else {
      add_signed(pc, lo >= center ? 1.0 : -1.0);
    }
  });
  return S1 / S0;
}

double lap_energy_expectation(const LaplaceSegState& s) {
  check_state(s);
  const auto& bp = s.breakpoints();
  const Mode md = find_mode(bp, s.total_weight());
  double S0 = 0.0, Sg = 0.0;
  walk(bp, s.total_weight(), md, [&](const Piece& pc) {
    double J[2];
    incomplete_exp_moments(pc.lam, pc.width, 1, J);
    const double scale = std::exp(-pc.g);
    S0 += scale * J[0];
    Sg += scale * (pc.g * J[0] + pc.lam * J[1]);
  });
  return md.energy + Sg / S0;
}

double lap_sample_height(const LaplaceSegState& s, Rng& rng) {
  check_state(s);
  const auto& bp = s.breakpoints();
  const Mode md = find_mode(bp, s.total_weight());
  std::vector<Piece> pieces;
  std::vector<double> mass;
  double total = 0.0;
  walk(bp, s.total_weight(), md, [&](const Piece& pc) {
    double J0;
    incomplete_exp_moments(pc.lam, pc.width, 0, &J0);
    const double m = std::exp(-pc.g) * J0;
    if (m <= 0.0) return;
    pieces.push_back(pc);
    mass.push_back(m);
    total += m;
  });
  double u = uniform01(rng) * total;
  std::size_t pick = pieces.size() - 1;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    if (u < mass[k]) {
      pick = k;
      break;
    }
    u -= mass[k];
  }
  const Piece& pc = pieces[pick];
  const double v = uniform01(rng);
  double t;
  if (pc.lam == 0.0) {
    t = v * pc.width;
  } else if (std::isinf(pc.width)) {
    t = -std::log1p(-v) / pc.lam;
  } else {
    t = -std::log1p(v * std::expm1(-pc.lam * pc.width)) / pc.lam;
    t = std::min(t, pc.width);
  }
  return pc.near + pc.dir * t;
}

LaplaceKernel::LaplaceKernel(const LaplaceMedianParams& p) : p_(p) { validate(ObservationFamily{p}); }

}  // namespace cpx
