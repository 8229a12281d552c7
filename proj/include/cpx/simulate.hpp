#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cpx/model.hpp"
#include "cpx/posterior.hpp"
#include "cpx/rng.hpp"

namespace cpx {

// Uniform draw over all k-subsets of {1..n}.
ChangepointConfig uniform_k_changepoints(int n, int k, Rng& rng);

struct Law {
  enum class Kind { Normal, Laplace } kind = Kind::Normal;
  double loc = 0.0;
  double scale = 1.0;  // standard deviation (Normal) or scale b (Laplace)
};

double draw(const Law& law, Rng& rng);

struct PiecewiseSpec {
  int n = 100;
  // Exactly one of k, geometric_q, taus selects the changepoints.
  std::optional<int> k;
  std::optional<double> geometric_q;
  std::optional<ChangepointConfig> taus;
  Law height;
  Law noise;
  bool allow_first = false;  // permit a changepoint at timepoint 1
};

struct SimulatedSeries {
  TimeSeries data;
  ChangepointConfig taus;
  std::vector<double> segment_heights;  // one per segment, first segment included
};

SimulatedSeries gen_piecewise(const PiecewiseSpec& spec, Rng& rng);

// "emstudy": n=4050, k=12, heights Laplace(0,10), noise Laplace(0,1).
// "intro":   n=550, geometric q=3/550, heights N(0,25), noise N(0,1).
PiecewiseSpec preset_spec(const std::string& name);

}  // namespace cpx
