#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "cpx/forward.hpp"
#include "cpx/rng.hpp"

namespace cpx {

// c~_ji = P(C_i = j | C_{i+1} = i+1, y_1:i) for i < n, and c_jn for i = n,
// on the same sparse index as the forward grid.
struct BackwardTable {
  std::shared_ptr<const GridLayout> layout;
  std::vector<double> value;

  int n() const { return layout->n(); }
  std::optional<double> at(int j, int i) const;
};

// Sorted changepoint locations in 1..n.
using ChangepointConfig = std::vector<int>;

struct ConfigLikelihood {
  double log_prob;
  bool touches_pruned;  // some needed c~ entry was pruned; log_prob is -inf
};

struct MapResult {
  ChangepointConfig config;
  double log_prob;
};

BackwardTable backward_weights(const ForwardResult& fwd, const HazardTable& hazard);
BackwardTable backward_weights(const ForwardResult& fwd);

ConfigLikelihood config_log_likelihood(const BackwardTable& bt, const ChangepointConfig& cfg);
MapResult map_segmentation(const BackwardTable& bt);
ChangepointConfig sample_changepoints(const BackwardTable& bt, Rng& rng);
// One height per timepoint, constant within each segment of cfg.
std::vector<double> sample_heights(const ChangepointConfig& cfg, const TimeSeries& data, const ModelConfig& model,
                                   Rng& rng);
double entropy(const BackwardTable& bt);

void validate_config(const ChangepointConfig& cfg, int n);

}  // namespace cpx
