#include "cpx/posterior.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cpx/error.hpp"

namespace cpx {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

std::optional<double> BackwardTable::at(int j, int i) const {
  if (i == 0 && j == 0) return 1.0;
  const auto e = layout->find(j, i);
  if (!e) return std::nullopt;
  return value[*e];
}

BackwardTable backward_weights(const ForwardResult& fwd, const HazardTable& hazard) {
  const GridLayout& g = *fwd.layout;
  const int n = g.n();
  BackwardTable bt{fwd.layout, std::vector<double>(fwd.weight.size(), 0.0)};
  for (int i = 1; i < n; ++i) {
    double den = 0.0;
    for (std::size_t e = g.col_begin(i); e < g.col_end(i); ++e) {
      const double v = fwd.weight[e] * (1.0 - hazard.survival(g.start_of(e), i + 1));
      bt.value[e] = v;
      den += v;
    }
    if (!std::isfinite(den)) throw NumericError("non-finite changepoint mass at timepoint " + std::to_string(i + 1));
    if (den > 0.0) {
      for (std::size_t e = g.col_begin(i); e < g.col_end(i); ++e) bt.value[e] /= den;
    } else {
      // A changepoint at i+1 is impossible; the column is never reached, keep c_ji.
      for (std::size_t e = g.col_begin(i); e < g.col_end(i); ++e) bt.value[e] = fwd.weight[e];
    }
  }
  for (std::size_t e = g.col_begin(n); e < g.col_end(n); ++e) bt.value[e] = fwd.weight[e];
  return bt;
}

BackwardTable backward_weights(const ForwardResult& fwd) { return backward_weights(fwd, *fwd.hazard); }

void validate_config(const ChangepointConfig& cfg, int n) {
  for (std::size_t k = 0; k < cfg.size(); ++k) {
    if (cfg[k] < 1 || cfg[k] > n) throw UsageError("changepoint outside 1..n");
    if (k > 0 && cfg[k] <= cfg[k - 1]) throw UsageError("changepoints must be strictly increasing");
  }
}

ConfigLikelihood config_log_likelihood(const BackwardTable& bt, const ChangepointConfig& cfg) {
  const int n = bt.n();
  validate_config(cfg, n);
  double total = 0.0;
  auto factor = [&](int j, int i) {
    const auto v = bt.at(j, i);
    if (!v) return false;
    total += std::log(*v);
    return true;
  };
  bool ok = true;
  if (cfg.empty()) {
    ok = factor(0, n);
  } else {
    ok = factor(0, cfg.front() - 1);
    for (std::size_t k = 0; ok && k + 1 < cfg.size(); ++k) ok = factor(cfg[k], cfg[k + 1] - 1);
    if (ok) ok = factor(cfg.back(), n);
  }
  if (!ok) return {kNegInf, true};
  return {total, false};
}

MapResult map_segmentation(const BackwardTable& bt) {
  const GridLayout& g = *bt.layout;
  const int n = g.n();
  const auto N = static_cast<std::size_t>(n);
  std::vector<double> F(N + 1, kNegInf);
  std::vector<int> count(N + 1, 0), arg(N + 1, 0);
  F[0] = 0.0;
  for (int i = 1; i <= n; ++i) {
    double best = kNegInf;
    int best_count = std::numeric_limits<int>::max(), best_j = -1;
    for (std::size_t e = g.col_begin(i); e < g.col_end(i); ++e) {
      const int j = g.start_of(e);
      const double lv = std::log(bt.value[e]);
      double v;
      int c;
      if (j == 0) {
        v = lv;
        c = 0;
      } else {
        v = F[static_cast<std::size_t>(j - 1)] + lv;
        c = count[static_cast<std::size_t>(j - 1)] + 1;
      }
      // larger value, then fewer changepoints, then later start (j ascending here)
      const bool better = best_j < 0 || v > best || (v == best && (c < best_count || c == best_count));
      if (better) {
        best = v;
        best_count = c;
        best_j = j;
      }
    }
    F[static_cast<std::size_t>(i)] = best;
    count[static_cast<std::size_t>(i)] = best_count;
    arg[static_cast<std::size_t>(i)] = best_j;
  }
  MapResult res;
  res.log_prob = F[N];
  for (int i = n; i >= 1;) {
    const int j = arg[static_cast<std::size_t>(i)];
    if (j <= 0) break;
    res.config.push_back(j);
    i = j - 1;
  }
  std::reverse(res.config.begin(), res.config.end());
  return res;
}

ChangepointConfig sample_changepoints(const BackwardTable& bt, Rng& rng) {
  const GridLayout& g = *bt.layout;
  ChangepointConfig cfg;
  int i = g.n();
  while (i > 0) {
    const double u = uniform01(rng);
    double s = 0.0;
    int pick = -1;
    const std::size_t b = g.col_begin(i);
    for (std::size_t e = g.col_end(i); e-- > b;) {
      s += bt.value[e];
      if (s >= u) {
        pick = g.start_of(e);
        break;
      }
    }
    if (pick < 0) pick = g.start_of(b);  // rounding left the partial sum short of u
    if (pick == 0) break;
    cfg.push_back(pick);
    i = pick - 1;
  }
  std::reverse(cfg.begin(), cfg.end());
  return cfg;
}

std::vector<double> sample_heights(const ChangepointConfig& cfg, const TimeSeries& data, const ModelConfig& model,
                                   Rng& rng) {
  const int n = data.size();
  validate_config(cfg, n);
  std::vector<int> starts;
  if (cfg.empty() || cfg.front() != 1) starts.push_back(1);
  starts.insert(starts.end(), cfg.begin(), cfg.end());
  std::vector<double> heights(static_cast<std::size_t>(n), 0.0);
  with_kernel(model.observation, [&](const auto& kernel) {
    for (std::size_t k = 0; k < starts.size(); ++k) {
      const int a = starts[k];
      const int b = k + 1 < starts.size() ? starts[k + 1] - 1 : n;
      const auto state = segment_state(kernel, data, a, b);
      const double x = kernel.sample(state, rng);
      for (int l = a; l <= b; ++l) heights[static_cast<std::size_t>(l - 1)] = x;
    }
  });
  return heights;
}

double entropy(const BackwardTable& bt) {
  const GridLayout& g = *bt.layout;
  const int n = g.n();
  std::vector<double> e(static_cast<std::size_t>(n) + 1, 0.0);  // e[i] for i = 0..n, e_{-1} = 0
  for (int i = 1; i <= n; ++i) {
    double acc = 0.0;
    for (std::size_t k = g.col_begin(i); k < g.col_end(i); ++k) {
      const double c = bt.value[k];
      if (c <= 0.0) continue;
      const int j = g.start_of(k);
      const double prev = j <= 1 ? 0.0 : e[static_cast<std::size_t>(j - 1)];
      acc += c * (prev + std::log(c));
    }
    e[static_cast<std::size_t>(i)] = acc;
  }
  return -e[static_cast<std::size_t>(n)];
}

}  // namespace cpx
