#include "cpx/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cpx/error.hpp"

namespace cpx {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

TimeSeries::TimeSeries(std::vector<double> values) : values_(std::move(values)) {
  require(!values_.empty(), "time series must contain at least one observation");
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      throw UsageError("non-finite observation at position " + std::to_string(k + 1));
    }
  }
}

void validate(const LengthPrior& prior) {
  std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GeometricPrior>) {
          require(p.q > 0.0 && p.q < 1.0, "geometric q must lie in (0,1)");
        } else if constexpr (std::is_same_v<P, NegBinPrior>) {
          require(p.r >= 1, "negative binomial r must be a positive integer");
          require(p.q > 0.0 && p.q < 1.0, "negative binomial q must lie in (0,1)");
          require(p.q <= static_cast<double>(p.r) / (p.r + 1.0),
                  "negative binomial q must not exceed r/(r+1)");
        } else {
          require(!p.survival.empty(), "per-timepoint prior needs survival values");
          for (double s : p.survival) {
            require(s >= 0.0 && s <= 1.0, "per-timepoint survival must lie in [0,1]");
          }
        }
      },
      prior);
}

double residual_success_prob(double q, int r) {
  require(r >= 1, "r must be a positive integer");
  require(q > 0.0 && q < 1.0, "q must lie in (0,1)");
  require(q <= static_cast<double>(r) / (r + 1.0), "q must not exceed r/(r+1)");
  return std::min(1.0, q / (r * (1.0 - q)));
}

NegBinTail::NegBinTail(double q, int r, int horizon) : q_(q), r_(r), horizon_(horizon) {
  require(q > 0.0 && q < 1.0, "q must lie in (0,1)");
  require(r >= 1, "r must be a positive integer");
  require(horizon >= 0, "horizon must be nonnegative");
  const auto D = static_cast<std::size_t>(horizon);
  ratio_.assign(D + 1, 0.0);
  first_moment_.assign(D + 1, 0.0);

  // Direct summation at the top of the table.
  double term = 1.0, sum = 1.0, msum = static_cast<double>(horizon);
  for (long long k = 1;; ++k) {
    const double rho_k = rho(horizon + static_cast<int>(k));
    term *= rho_k;
    sum += term;
    msum += static_cast<double>(horizon + k) * term;
    if (rho_k < 1.0 && term < 1e-18 * sum && static_cast<double>(horizon + k) * term < 1e-18 * msum) break;
    if (k > 400'000'000LL) throw NumericError("negative binomial tail sum did not converge");
  }
  ratio_[D] = sum;
  first_moment_[D] = msum;
  for (int d = horizon; d >= 1; --d) {
    const double rd = rho(d);
    ratio_[static_cast<std::size_t>(d - 1)] = 1.0 + rd * ratio_[static_cast<std::size_t>(d)];
    first_moment_[static_cast<std::size_t>(d - 1)] = (d - 1) + rd * first_moment_[static_cast<std::size_t>(d)];
  }
}

double NegBinTail::rho(int d) const { return (1.0 - q_) * (r_ + d - 1.0) / d; }

double NegBinTail::tail_mean(int c) const {
  require(c >= 0 && c <= horizon_, "tail cutoff outside the table");
  return first_moment_[static_cast<std::size_t>(c)] / ratio_[static_cast<std::size_t>(c)];
}

double NegBinTail::gap_survival(int d) const {
  return rho(d) * ratio_[static_cast<std::size_t>(d)] / ratio_[static_cast<std::size_t>(d - 1)];
}

HazardTable::HazardTable(const LengthPrior& prior, int n) : n_(n) {
  require(n >= 1, "horizon must be positive");
  validate(prior);
  const auto N = static_cast<std::size_t>(n);
  gap_.assign(N + 1, 1.0);
  if (const auto* g = std::get_if<GeometricPrior>(&prior)) {
    std::fill(gap_.begin() + 1, gap_.end(), 1.0 - g->q);
    first_ = 1.0 - g->q;
  } else if (const auto* nb = std::get_if<NegBinPrior>(&prior)) {
    NegBinTail tail(nb->q, nb->r, n);
    for (int d = 1; d <= n; ++d) gap_[static_cast<std::size_t>(d)] = tail.gap_survival(d);
    first_ = 1.0 - residual_success_prob(nb->q, nb->r);
  } else {
    const auto& pt = std::get<PerTimepointPrior>(prior);
    require(pt.survival.size() >= N, "per-timepoint prior shorter than the series");
    per_timepoint_ = true;
    for (std::size_t i = 1; i <= N; ++i) gap_[i] = pt.survival[i - 1];
  }
}

double HazardTable::gap_survival(int d) const {
  require(!per_timepoint_, "per-timepoint hazards have no stationary gap survival");
  require(d >= 1 && d <= n_, "gap outside horizon");
  return gap_[static_cast<std::size_t>(d)];
}

double HazardTable::first_row(int i) const {
  require(i >= 1 && i <= n_, "timepoint outside horizon");
  return per_timepoint_ ? gap_[static_cast<std::size_t>(i)] : first_;
}

void validate(const ObservationFamily& family) {
  std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GaussianMeanParams>) {
          require(finite_positive(p.sigma) && finite_positive(p.tau0), "gaussian_mean scales must be positive");
          require(std::isfinite(p.mu0), "gaussian_mean mu0 must be finite");
        } else if constexpr (std::is_same_v<P, GaussianVarParams>) {
          require(finite_positive(p.alpha) && finite_positive(p.beta), "gaussian_var alpha and beta must be positive");
          require(std::isfinite(p.mu), "gaussian_var mu must be finite");
        } else {
          require(finite_positive(p.sigma) && finite_positive(p.tau), "laplace_median scales must be positive");
          require(std::isfinite(p.mu), "laplace_median mu must be finite");
        }
      },
      family);
}

void validate(const PruneConfig& prune) {
  require(prune.T >= 1, "prune.T must be at least 1");
  require(prune.Tprime >= 0.0 && std::isfinite(prune.Tprime), "prune.Tprime must be nonnegative");
}

void ModelConfig::validate() const {
  cpx::validate(length_prior);
  cpx::validate(observation);
  if (prune) cpx::validate(*prune);
}

std::string family_name(const ObservationFamily& family) {
  switch (family.index()) {
    case 0: return "gaussian_mean";
    case 1: return "gaussian_var";
    default: return "laplace_median";
  }
}

namespace {

double get_number(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj.at(key).is_number()) {
    throw UsageError(where + "." + key + " must be a number");
  }
  return obj.at(key).get<double>();
}

}  // namespace

ModelConfig model_from_json(const nlohmann::json& doc) {
  ModelConfig m;
  require(doc.is_object(), "model document must be a JSON object");
  require(doc.contains("length_prior") && doc["length_prior"].is_object(), "missing length_prior");
  require(doc.contains("observation") && doc["observation"].is_object(), "missing observation");

  const auto& lp = doc["length_prior"];
  const std::string kind = lp.value("kind", "");
  if (kind == "geometric") {
    m.length_prior = GeometricPrior{get_number(lp, "q", "length_prior")};
  } else if (kind == "negbin" || kind == "negative_binomial") {
    const double r = get_number(lp, "r", "length_prior");
    require(r >= 1 && std::floor(r) == r, "length_prior.r must be a positive integer");
    m.length_prior = NegBinPrior{get_number(lp, "q", "length_prior"), static_cast<int>(r)};
  } else if (kind == "per_timepoint") {
    require(lp.contains("survival") && lp["survival"].is_array(), "length_prior.survival must be an array");
    m.length_prior = PerTimepointPrior{lp["survival"].get<std::vector<double>>()};
  } else {
    throw UsageError("unknown length_prior.kind '" + kind + "'");
  }

  const auto& ob = doc["observation"];
  const std::string family = ob.value("family", "");
  require(ob.contains("params") && ob["params"].is_object(), "missing observation.params");
  const auto& p = ob["params"];
  const std::string where = "observation.params";
  if (family == "gaussian_mean") {
    m.observation = GaussianMeanParams{get_number(p, "sigma", where), get_number(p, "mu0", where),
                                       get_number(p, "tau0", where)};
  } else if (family == "gaussian_var") {
    m.observation = GaussianVarParams{get_number(p, "mu", where), get_number(p, "alpha", where),
                                      get_number(p, "beta", where)};
  } else if (family == "laplace_median") {
    m.observation = LaplaceMedianParams{get_number(p, "mu", where), get_number(p, "tau", where),
                                        get_number(p, "sigma", where)};
  } else {
    throw UsageError("unknown observation.family '" + family + "'");
  }

  if (doc.contains("prune") && !doc["prune"].is_null()) {
    const auto& pr = doc["prune"];
    const double T = get_number(pr, "T", "prune");
    require(T >= 1 && std::floor(T) == T, "prune.T must be a positive integer");
    m.prune = PruneConfig{static_cast<int>(T), get_number(pr, "Tprime", "prune")};
  }
  m.validate();
  return m;
}

nlohmann::json model_to_json(const ModelConfig& m) {
  nlohmann::json doc;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GeometricPrior>) {
          doc["length_prior"] = {{"kind", "geometric"}, {"q", p.q}};
        } else if constexpr (std::is_same_v<P, NegBinPrior>) {
          doc["length_prior"] = {{"kind", "negbin"}, {"q", p.q}, {"r", p.r}};
        } else {
          doc["length_prior"] = {{"kind", "per_timepoint"}, {"survival", p.survival}};
        }
      },
      m.length_prior);
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        nlohmann::json params;
        if constexpr (std::is_same_v<P, GaussianMeanParams>) {
          params = {{"sigma", p.sigma}, {"mu0", p.mu0}, {"tau0", p.tau0}};
        } else if constexpr (std::is_same_v<P, GaussianVarParams>) {
          params = {{"mu", p.mu}, {"alpha", p.alpha}, {"beta", p.beta}};
        } else {
          params = {{"mu", p.mu}, {"tau", p.tau}, {"sigma", p.sigma}};
        }
        doc["observation"] = {{"family", family_name(m.observation)}, {"params", params}};
      },
      m.observation);
  if (m.prune) doc["prune"] = {{"T", m.prune->T}, {"Tprime", m.prune->Tprime}};
  return doc;
}

ModelConfig load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open model file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("malformed model file " + path + ": " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace cpx
