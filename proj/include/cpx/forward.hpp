#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "cpx/grid.hpp"
#include "cpx/kernel.hpp"
#include "cpx/model.hpp"

namespace cpx {

// Order in which live particles are visited within a column. Pruning compares
// each candidate with the partial normalizer accumulated so far, so the order
// matters once T' > 0.
enum class SumOrder { NewestFirst, OldestFirst };

struct FilterOptions {
  // Overrides ModelConfig::prune when set.
  std::optional<PruneConfig> prune;
  bool ignore_model_prune = false;
  SumOrder order = SumOrder::NewestFirst;
};

struct ForwardResult {
  std::shared_ptr<const GridLayout> layout;
  std::vector<double> weight;         // c_ji per grid entry
  std::vector<double> log_norm;       // ln Z_i at index i-1
  std::vector<int> particle_counts;   // live particles after step i, index i-1
  std::vector<SegmentState> final_states;  // aligned with column n
  std::shared_ptr<const HazardTable> hazard;
  ModelConfig model;
  int clamped_steps = 0;

  int n() const { return layout->n(); }
  double log_marginal_likelihood() const;
  std::size_t total_particles() const { return weight.size(); }
};

ForwardResult filter(const TimeSeries& data, const ModelConfig& model, const FilterOptions& options = {});
ForwardResult filter_pruned(const TimeSeries& data, const ModelConfig& model, int T, double Tprime);
double log_marginal_likelihood(const ForwardResult& result);

}  // namespace cpx
