#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace cpx {

// Observations y_1..y_n. Accessors are 1-based to match the index
// conventions used everywhere else (segment (j, i) covers y_max(j,1)..y_i).
class TimeSeries {
 public:
  TimeSeries() = default;
  explicit TimeSeries(std::vector<double> values);

  int size() const { return static_cast<int>(values_.size()); }
  double operator()(int i) const { return values_[static_cast<std::size_t>(i - 1)]; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

struct GeometricPrior {
  double q;
};

struct NegBinPrior {
  double q;
  int r;
};

// Survival probability per timepoint, shared by all segments:
// survival[i-1] = P(C_i = C_{i-1}).
struct PerTimepointPrior {
  std::vector<double> survival;
};

using LengthPrior = std::variant<GeometricPrior, NegBinPrior, PerTimepointPrior>;

void validate(const LengthPrior& prior);

// q' = q / (r (1 - q)), success probability of the geometric first segment.
double residual_success_prob(double q, int r);

// Tail quantities of NB(l; q, r) = C(r-1+l, l) q^r (1-q)^l for l = 0..horizon.
//   ratio(d)     = S(d) / NB(d),  S(d) = sum_{l >= d} NB(l)
//   tail_mean(c) = E[l | l >= c]
class NegBinTail {
 public:
  NegBinTail(double q, int r, int horizon);

  int horizon() const { return horizon_; }
  double ratio(int d) const { return ratio_[static_cast<std::size_t>(d)]; }
  double tail_mean(int c) const;
  // S(d) / S(d-1) for d >= 1.
  double gap_survival(int d) const;
  // NB(d) / NB(d-1)
  double rho(int d) const;

 private:
  double q_;
  int r_;
  int horizon_;
  std::vector<double> ratio_;
  std::vector<double> first_moment_;  // sum_{l>=d} l NB(l) / NB(d)
};

// Survival ratios q_ji of the segment-length process up to horizon n.
class HazardTable {
 public:
  HazardTable(const LengthPrior& prior, int n);

  int horizon() const { return n_; }
  // q_ji for 0 <= j < i <= n.
  double survival(int j, int i) const {
    if (per_timepoint_) return gap_[static_cast<std::size_t>(i)];
    return j == 0 ? first_ : gap_[static_cast<std::size_t>(i - j)];
  }
  double gap_survival(int d) const;
  double first_row(int i) const;

 private:
  int n_;
  bool per_timepoint_ = false;
  double first_ = 0.0;
  // gap_[d] for stationary priors, gap_[i] (survival at timepoint i) otherwise
  std::vector<double> gap_;
};

struct GaussianMeanParams {
  double sigma;
  double mu0;
  double tau0;
};

struct GaussianVarParams {
  double mu;
  double alpha;
  double beta;
};

struct LaplaceMedianParams {
  double mu;
  double tau;
  double sigma;
};

using ObservationFamily = std::variant<GaussianMeanParams, GaussianVarParams, LaplaceMedianParams>;

struct PruneConfig {
  int T = 1;
  double Tprime = 0.0;
};

struct ModelConfig {
  LengthPrior length_prior = GeometricPrior{0.01};
  ObservationFamily observation = GaussianMeanParams{1.0, 0.0, 1.0};
  std::optional<PruneConfig> prune;

  void validate() const;
};

void validate(const ObservationFamily& family);
void validate(const PruneConfig& prune);

ModelConfig model_from_json(const nlohmann::json& doc);
nlohmann::json model_to_json(const ModelConfig& model);
ModelConfig load_model(const std::string& path);

std::string family_name(const ObservationFamily& family);

}  // namespace cpx
