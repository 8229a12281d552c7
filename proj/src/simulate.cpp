#include "cpx/simulate.hpp"

#include <cmath>
#include <random>

#include "cpx/error.hpp"

namespace cpx {

ChangepointConfig uniform_k_changepoints(int n, int k, Rng& rng) {
  if (n < 1 || k < 1 || k > n) throw UsageError("uniform_k_changepoints needs 0 < k <= n");
  ChangepointConfig out;
  int placed = 0;
  for (int i = 1; i <= n && placed < k; ++i) {
    const double p = static_cast<double>(k - placed) / (n - i + 1);
    if (uniform01(rng) < p) {
      out.push_back(i);
      ++placed;
    }
  }
  return out;
}

double draw(const Law& law, Rng& rng) {
  if (law.scale == 0.0) return law.loc;
  if (law.kind == Law::Kind::Normal) {
    std::normal_distribution<double> z(0.0, 1.0);
    return law.loc + law.scale * z(rng);
  }
  const double e = -std::log1p(-uniform01(rng));
  return uniform01(rng) < 0.5 ? law.loc - law.scale * e : law.loc + law.scale * e;
}

SimulatedSeries gen_piecewise(const PiecewiseSpec& spec, Rng& rng) {
  const int n = spec.n;
  if (n < 1) throw UsageError("simulation needs n >= 1");
  if (spec.height.scale < 0.0 || spec.noise.scale < 0.0) throw UsageError("scales must be nonnegative");
  const int chosen = static_cast<int>(spec.k.has_value()) + static_cast<int>(spec.geometric_q.has_value()) +
                     static_cast<int>(spec.taus.has_value());
  if (chosen != 1) throw UsageError("give exactly one of k, geometric_q or explicit changepoints");
  const int lo = spec.allow_first ? 1 : 2;

  SimulatedSeries sim;
  if (spec.k) {
    const int slots = n - lo + 1;
    if (*spec.k > slots) throw UsageError("more changepoints than admissible positions");
    if (*spec.k > 0) {
      for (int t : uniform_k_changepoints(slots, *spec.k, rng)) sim.taus.push_back(t + lo - 1);
    }
  } else if (spec.geometric_q) {
    const double q = *spec.geometric_q;
    if (!(q > 0.0 && q < 1.0)) throw UsageError("geometric_q must lie in (0,1)");
    for (int i = lo; i <= n; ++i) {
      if (uniform01(rng) < q) sim.taus.push_back(i);
    }
  } else {
    sim.taus = *spec.taus;
    validate_config(sim.taus, n);
    if (!spec.allow_first && !sim.taus.empty() && sim.taus.front() == 1) {
      throw UsageError("changepoint at timepoint 1 requires allow_first");
    }
  }

  std::vector<double> y(static_cast<std::size_t>(n));
  std::size_t next = 0;
  double h = draw(spec.height, rng);
  sim.segment_heights.push_back(h);
  for (int i = 1; i <= n; ++i) {
    if (next < sim.taus.size() && sim.taus[next] == i) {
      if (i > 1) {
        h = draw(spec.height, rng);
        sim.segment_heights.push_back(h);
      }
      ++next;
    }
    Law noise = spec.noise;
    noise.loc += h;
    y[static_cast<std::size_t>(i - 1)] = draw(noise, rng);
  }
  sim.data = TimeSeries(std::move(y));
  return sim;
}

PiecewiseSpec preset_spec(const std::string& name) {
  PiecewiseSpec s;
  if (name == "emstudy") {
    s.n = 4050;
    s.k = 12;
    s.height = {Law::Kind::Laplace, 0.0, 10.0};
    s.noise = {Law::Kind::Laplace, 0.0, 1.0};
  } else if (name == "intro") {
    s.n = 550;
    s.geometric_q = 3.0 / 550.0;
    s.height = {Law::Kind::Normal, 0.0, 5.0};
    s.noise = {Law::Kind::Normal, 0.0, 1.0};
  } else {
    throw UsageError("unknown preset '" + name + "'");
  }
  return s;
}

}  // namespace cpx
