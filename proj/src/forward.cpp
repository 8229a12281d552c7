#include "cpx/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cpx/error.hpp"

namespace cpx {

namespace {

template <class K>
void run(const TimeSeries& y, const K& kernel, const HazardTable& hz, const std::optional<PruneConfig>& prune,
         SumOrder order, ForwardResult& out) {
  using State = typename K::State;
  const int n = y.size();
  auto layout = std::make_shared<GridLayout>(n);

  std::vector<int> live_j{0};
  std::vector<double> live_c{1.0};
  std::vector<State> live_s{kernel.prior()};

  std::vector<double> lr, cq;
  std::vector<char> keep;
  std::vector<int> next_j;
  std::vector<double> next_d;
  std::vector<State> next_s;
  out.log_norm.assign(static_cast<std::size_t>(n), 0.0);
  out.particle_counts.assign(static_cast<std::size_t>(n), 0);

  for (int i = 1; i <= n; ++i) {
    const double yi = y(i);
    const std::size_t L = live_j.size();
    lr.resize(L);
    cq.resize(L);
    keep.assign(L, 0);

    State born = kernel.prior();
    const double lr_born = kernel.absorb(born, yi);
    if (!std::isfinite(lr_born)) {
      throw NumericError("non-finite predictive at (j,i)=(" + std::to_string(i) + "," + std::to_string(i) + ")");
    }
    double M = lr_born;
    for (std::size_t k = 0; k < L; ++k) {
      lr[k] = kernel.absorb(live_s[k], yi);
      if (!std::isfinite(lr[k])) {
        throw NumericError("non-finite predictive at (j,i)=(" + std::to_string(live_j[k]) + "," +
                           std::to_string(i) + ")");
      }
      cq[k] = live_c[k] * hz.survival(live_j[k], i);
      if (cq[k] > 0.0) M = std::max(M, lr[k] + std::log(cq[k]));
    }

    // Survival mass over every particle alive at i-1, pruned or not, so the
    // changepoint prior 1 - ell never absorbs the mass of dropped particles.
    double Z = 0.0, ell = 0.0;
    for (std::size_t k = 0; k < L; ++k) ell += cq[k];
    auto visit = [&](std::size_t k) {
      const double d = cq[k] * std::exp(lr[k] - M);
      const bool retain = !prune || (i - live_j[k] < prune->T) || (d >= Z * prune->Tprime);
      if (retain) {
        keep[k] = 1;
        Z += d;
        lr[k] = d;  // reuse as storage for d_ji
      }
    };
    if (order == SumOrder::NewestFirst) {
      for (std::size_t k = L; k-- > 0;) visit(k);
    } else {
      for (std::size_t k = 0; k < L; ++k) visit(k);
    }
    double rest = 1.0 - ell;
    if (rest < 0.0) {
      rest = 0.0;
      ++out.clamped_steps;
    }
    const double d_born = rest * std::exp(lr_born - M);
    Z += d_born;
    if (!(Z > 0.0) || !std::isfinite(Z)) {
      throw NumericError("normalizer vanished at timepoint " + std::to_string(i));
    }

    next_j.clear();
    next_d.clear();
    next_s.clear();
    for (std::size_t k = 0; k < L; ++k) {
      if (!keep[k]) continue;
      next_j.push_back(live_j[k]);
      next_d.push_back(lr[k] / Z);
      next_s.push_back(std::move(live_s[k]));
    }
    next_j.push_back(i);
    next_d.push_back(d_born / Z);
    next_s.push_back(std::move(born));

    layout->append_column(next_j);
    out.weight.insert(out.weight.end(), next_d.begin(), next_d.end());
    out.log_norm[static_cast<std::size_t>(i - 1)] = M + std::log(Z);
    out.particle_counts[static_cast<std::size_t>(i - 1)] = static_cast<int>(next_j.size());

    std::swap(live_j, next_j);
    std::swap(live_c, next_d);
    std::swap(live_s, next_s);
  }
  layout->build_rows();
  out.layout = std::move(layout);
  out.final_states.clear();
  out.final_states.reserve(live_s.size());
  for (auto& s : live_s) out.final_states.emplace_back(std::move(s));
}

}  // namespace

double ForwardResult::log_marginal_likelihood() const {
  return std::accumulate(log_norm.begin(), log_norm.end(), 0.0);
}

double log_marginal_likelihood(const ForwardResult& result) { return result.log_marginal_likelihood(); }

ForwardResult filter(const TimeSeries& data, const ModelConfig& model, const FilterOptions& options) {
  model.validate();
  std::optional<PruneConfig> prune = options.prune;
  if (!prune && !options.ignore_model_prune) prune = model.prune;
  if (prune) validate(*prune);

  ForwardResult out;
  out.model = model;
  out.hazard = std::make_shared<const HazardTable>(model.length_prior, data.size());
  with_kernel(model.observation, [&](const auto& kernel) { run(data, kernel, *out.hazard, prune, options.order, out); });
  return out;
}

ForwardResult filter_pruned(const TimeSeries& data, const ModelConfig& model, int T, double Tprime) {
  FilterOptions opt;
  opt.prune = PruneConfig{T, Tprime};
  return filter(data, model, opt);
}

}  // namespace cpx
