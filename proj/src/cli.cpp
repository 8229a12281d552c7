#include "cpx/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <thread>

#include "cpx/credible.hpp"
#include "cpx/em.hpp"
#include "cpx/error.hpp"
#include "cpx/forward.hpp"
#include "cpx/io.hpp"
#include "cpx/pointwise.hpp"
#include "cpx/posterior.hpp"
#include "cpx/simulate.hpp"

namespace cpx {

namespace {

// Output sink: a file, or `fallback` for "-" / empty.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      os_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw UsageError("cannot write " + path);
      os_ = file_.get();
    }
    os_->precision(17);
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_;
};

PruneConfig parse_prune(const std::string& spec) {
  const auto c = spec.find(',');
  if (c == std::string::npos) throw UsageError("--prune expects T,Tprime");
  PruneConfig p;
  try {
    std::size_t used = 0;
    p.T = std::stoi(spec.substr(0, c), &used);
    p.Tprime = std::stod(spec.substr(c + 1));
  } catch (const std::exception&) {
    throw UsageError("--prune expects T,Tprime");
  }
  validate(p);
  return p;
}

std::pair<int, int> parse_window(const std::string& spec) {
  const auto c = spec.find(':');
  if (c == std::string::npos) throw UsageError("--window expects lo:hi");
  try {
    return {std::stoi(spec.substr(0, c)), std::stoi(spec.substr(c + 1))};
  } catch (const std::exception&) {
    throw UsageError("--window expects lo:hi");
  }
}

unsigned threads_cap() {
  unsigned t = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CPX_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) t = std::min(t, static_cast<unsigned>(v));
  }
  return t;
}

struct Common {
  std::string data, model, prune;
  FilterOptions options() const {
    FilterOptions o;
    if (!prune.empty()) o.prune = parse_prune(prune);
    return o;
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--data", c.data, "series CSV (one value per line, - for stdin)")->required();
  app->add_option("--model", c.model, "model JSON")->required();
  app->add_option("--prune", c.prune, "pruning thresholds T,Tprime");
}

unsigned long long resolve_seed(const std::optional<unsigned long long>& seed, std::ostream& err) {
  if (seed) return *seed;
  std::random_device rd;
  const unsigned long long s = (static_cast<unsigned long long>(rd()) << 32) ^ rd();
  err << "seed " << s << "\n";
  return s;
}

}  // namespace

int run_pipeline(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact inference for Bayesian changepoint models"};
  app.require_subcommand(1);

  Common common;
  std::string out_path, runlength_path, samples_path, targets, param, range, window, preset, truth_path, ilp_path,
      logprob_path;
  int draws = 0, resync = 512, max_iter = 200, osc_window = 8, n_override = 0, k_override = 0, n_hint = 0;
  double alpha = 0.05, tol = 1e-6;
  bool all_steps = false;
  std::optional<unsigned long long> seed;

  auto* c_filter = app.add_subcommand("filter", "forward filter: log normalizers and particle counts");
  add_common(c_filter, common);
  c_filter->add_option("--out", out_path, "forward JSON");
  c_filter->add_option("--runlength", runlength_path, "run-length table CSV (i,j,c)");

  auto* c_map = app.add_subcommand("map", "MAP segmentation");
  add_common(c_map, common);
  c_map->add_option("--out", out_path);

  auto* c_sample = app.add_subcommand("sample", "exact posterior changepoint samples");
  add_common(c_sample, common);
  c_sample->add_option("--draws", draws)->required();
  c_sample->add_option("--seed", seed);
  c_sample->add_option("--out", out_path);
  c_sample->add_option("--logprobs", logprob_path, "per-draw log posterior probabilities");

  auto* c_entropy = app.add_subcommand("entropy", "entropy of the changepoint posterior");
  add_common(c_entropy, common);

  auto* c_marg = app.add_subcommand("marginals", "changepoint probabilities and height moments");
  add_common(c_marg, common);
  c_marg->add_option("--out", out_path);
  c_marg->add_option("--resync", resync, "exact resynchronization interval (0 disables)");

  auto* c_em = app.add_subcommand("em", "EM parameter estimation");
  add_common(c_em, common);
  c_em->add_option("--targets", targets, "comma-separated subset of q,tau,sigma,mu")->required();
  c_em->add_option("--out", out_path);
  c_em->add_option("--tol", tol);
  c_em->add_option("--max-iter", max_iter);
  c_em->add_option("--osc-window", osc_window);

  auto* c_grid = app.add_subcommand("loglik-grid", "marginal log-likelihood over a parameter grid");
  add_common(c_grid, common);
  c_grid->add_option("--param", param, "q, tau or sigma")->required();
  c_grid->add_option("--range", range, "a:b:steps")->required();
  c_grid->add_option("--out", out_path);

  auto* c_cred = app.add_subcommand("credible", "greedy simultaneous credible regions");
  c_cred->add_option("--samples", samples_path)->required();
  c_cred->add_option("--out", out_path);
  c_cred->add_option("--ilp", ilp_path, "also export the ILP for --alpha");
  c_cred->add_option("--alpha", alpha);
  c_cred->add_option("--n", n_hint, "number of timepoints (default: from the samples header)");
  c_cred->add_flag("--all-steps", all_steps, "emit every ladder step instead of the alpha grid");

  auto* c_ilp = app.add_subcommand("ilp-export", "write the sample based problem as an LP file");
  c_ilp->add_option("--samples", samples_path)->required();
  c_ilp->add_option("--alpha", alpha)->required();
  c_ilp->add_option("--out", out_path)->required();
  c_ilp->add_option("--n", n_hint);

  auto* c_imp = app.add_subcommand("importance", "smallest alpha whose region avoids a window");
  c_imp->add_option("--samples", samples_path)->required();
  c_imp->add_option("--window", window, "lo:hi")->required();
  c_imp->add_option("--n", n_hint);

  auto* c_sim = app.add_subcommand("simulate", "generate piecewise-constant data");
  c_sim->add_option("--preset", preset, "emstudy or intro")->required();
  c_sim->add_option("--seed", seed);
  c_sim->add_option("--out", out_path);
  c_sim->add_option("--truth", truth_path);
  c_sim->add_option("--n", n_override);
  c_sim->add_option("--k", k_override);

  auto* c_median = app.add_subcommand("median", "data median (robust choice of mu)");
  c_median->add_option("--data", common.data)->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    auto forward = [&]() {
      const TimeSeries data = ingest_csv(common.data);
      const ModelConfig model = load_model(common.model);
      return std::make_pair(data, filter(data, model, common.options()));
    };

    if (c_filter->parsed()) {
      auto [data, fwd] = forward();
      nlohmann::json doc;
      doc["n"] = data.size();
      doc["loglik"] = fwd.log_marginal_likelihood();
      doc["log_norm"] = fwd.log_norm;
      doc["particle_counts"] = fwd.particle_counts;
      doc["total_particles"] = fwd.total_particles();
      doc["clamped_steps"] = fwd.clamped_steps;
      doc["model"] = model_to_json(fwd.model);
      Sink s(out_path, out);
      *s << doc.dump(2) << "\n";
      if (!runlength_path.empty()) {
        Sink r(runlength_path, out);
        *r << "i,j,c\n";
        const auto& g = *fwd.layout;
        for (int i = 1; i <= g.n(); ++i) {
          for (std::size_t e = g.col_begin(i); e < g.col_end(i); ++e) {
            *r << i << ',' << g.start_of(e) << ',' << fwd.weight[e] << '\n';
          }
        }
      }
    } else if (c_map->parsed()) {
      auto [data, fwd] = forward();
      const auto res = map_segmentation(backward_weights(fwd));
      nlohmann::json doc{{"changepoints", res.config}, {"count", res.config.size()}, {"log_prob", res.log_prob}};
      Sink s(out_path, out);
      *s << doc.dump(2) << "\n";
    } else if (c_sample->parsed()) {
      if (draws < 1) throw UsageError("--draws must be at least 1");
      auto [data, fwd] = forward();
      const auto bt = backward_weights(fwd);
      const auto sd = resolve_seed(seed, err);
      Rng rng = make_rng(sd);
      std::vector<ChangepointConfig> all;
      all.reserve(static_cast<std::size_t>(draws));
      for (int k = 0; k < draws; ++k) all.push_back(sample_changepoints(bt, rng));
      Sink s(out_path, out);
      write_samples(*s, data.size(), all, sd);
      if (!logprob_path.empty()) {
        Sink lp(logprob_path, out);
        for (const auto& c : all) *lp << config_log_likelihood(bt, c).log_prob << "\n";
      }
    } else if (c_entropy->parsed()) {
      auto [data, fwd] = forward();
      out.precision(17);
      out << entropy(backward_weights(fwd)) << "\n";
    } else if (c_marg->parsed()) {
      auto [data, fwd] = forward();
      const auto bt = backward_weights(fwd);
      TrajectoryOptions opt;
      opt.resync_every = resync;
      const auto rep = marginal_report(data, fwd, bt, opt);
      Sink s(out_path, out);
      *s << "i,q_tilde,mean,sd,skew,band_lo,band_hi\n";
      for (std::size_t i = 0; i < rep.q_tilde.size(); ++i) {
        *s << i + 1 << ',' << rep.q_tilde[i] << ',' << rep.mean[i] << ',' << rep.sd[i] << ',' << rep.skew[i] << ','
           << rep.band_lo[i] << ',' << rep.band_hi[i] << '\n';
      }
      if (rep.clamped_variances > 0) err << "clamped variances: " << rep.clamped_variances << "\n";
    } else if (c_em->parsed()) {
      const TimeSeries data = ingest_csv(common.data);
      const ModelConfig model = load_model(common.model);
      std::vector<std::string> tg;
      std::stringstream ss(targets);
      for (std::string t; std::getline(ss, t, ',');) {
        if (!t.empty()) tg.push_back(t);
      }
      EmConfig cfg;
      cfg.tol = tol;
      cfg.max_iter = max_iter;
      cfg.osc_window = osc_window;
      cfg.filter = common.options();
      const auto trace = em_run(data, model, tg, cfg);
      nlohmann::json doc;
      doc["targets"] = trace.targets;
      doc["converged"] = trace.converged;
      doc["oscillation_detected"] = trace.oscillation_detected;
      doc["best"] = trace.best;
      for (const auto& it : trace.iterates) {
        doc["iterates"].push_back({{"theta", it.theta},
                                   {"loglik", it.loglik},
                                   {"expected_count", it.expected_count},
                                   {"model", model_to_json(it.model)}});
      }
      doc["final_model"] = model_to_json(trace.final_model());
      Sink s(out_path, out);
      *s << doc.dump(2) << "\n";
    } else if (c_grid->parsed()) {
      const TimeSeries data = ingest_csv(common.data);
      const ModelConfig model = load_model(common.model);
      double a = 0, b = 0;
      int steps = 0;
      {
        std::stringstream ss(range);
        std::string p1, p2, p3;
        std::getline(ss, p1, ':');
        std::getline(ss, p2, ':');
        std::getline(ss, p3, ':');
        try {
          a = std::stod(p1);
          b = std::stod(p2);
          steps = std::stoi(p3);
        } catch (const std::exception&) {
          throw UsageError("--range expects a:b:steps");
        }
        if (steps < 1) throw UsageError("--range needs at least one step");
      }
      std::vector<ModelConfig> models;
      std::vector<double> values;
      for (int k = 0; k < steps; ++k) {
        const double v = steps == 1 ? a : a + (b - a) * k / (steps - 1);
        ModelConfig m = model;
        if (param == "q") {
          if (auto* g = std::get_if<GeometricPrior>(&m.length_prior)) g->q = v;
          else if (auto* nb = std::get_if<NegBinPrior>(&m.length_prior)) nb->q = v;
          else throw UsageError("q grid needs a geometric or negative binomial prior");
        } else if (param == "sigma" || param == "tau") {
          std::visit(
              [&](auto& p) {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, LaplaceMedianParams>) {
                  (param == "sigma" ? p.sigma : p.tau) = v;
                } else if constexpr (std::is_same_v<P, GaussianMeanParams>) {
                  (param == "sigma" ? p.sigma : p.tau0) = v;
                } else {
                  if (param == "sigma") throw UsageError("gaussian_var has no sigma");
                  p.beta = v;
                }
              },
              m.observation);
        } else {
          throw UsageError("--param must be q, tau or sigma");
        }
        m.validate();
        models.push_back(m);
        values.push_back(v);
      }
      std::vector<double> ll(models.size());
      std::vector<std::size_t> counts(models.size());
      std::vector<std::string> failures(models.size());
      const auto opt = common.options();
      auto work = [&](std::size_t from, std::size_t stride) {
        for (std::size_t k = from; k < models.size(); k += stride) {
          try {
            const auto fwd = filter(data, models[k], opt);
            ll[k] = fwd.log_marginal_likelihood();
            counts[k] = map_segmentation(backward_weights(fwd)).config.size();
          } catch (const std::exception& e) {
            failures[k] = e.what();
          }
        }
      };
      const unsigned nt = std::min<unsigned>(threads_cap(), static_cast<unsigned>(models.size()));
      std::vector<std::thread> pool;
      for (unsigned t = 1; t < nt; ++t) pool.emplace_back(work, t, nt);
      work(0, nt);
      for (auto& t : pool) t.join();
      for (const auto& f : failures) {
        if (!f.empty()) throw NumericError(f);
      }
      Sink s(out_path, out);
      *s << "param,loglik,map_count\n";
      for (std::size_t k = 0; k < models.size(); ++k) *s << values[k] << ',' << ll[k] << ',' << counts[k] << '\n';
    } else if (c_cred->parsed()) {
      const auto samples = read_samples(samples_path, n_hint);
      const auto ladder = greedy_ladder(samples);
      Sink s(out_path, out);
      *s << "coverage,region\n";
      if (all_steps) {
        for (std::size_t k = 0; k < ladder.steps.size(); ++k) {
          *s << ladder.steps[k].coverage << ",\"" << join(ladder.region(k)) << "\"\n";
        }
      } else {
        for (int k = 1; k <= 29; ++k) {
          const auto r = region_for_alpha(ladder, k / 30.0);
          *s << coverage_fraction(r, samples) << ",\"" << join(r) << "\"\n";
        }
      }
      if (!ilp_path.empty()) export_ilp(samples, alpha, ilp_path);
    } else if (c_ilp->parsed()) {
      const auto samples = read_samples(samples_path, n_hint);
      export_ilp(samples, alpha, out_path);
    } else if (c_imp->parsed()) {
      const auto samples = read_samples(samples_path, n_hint);
      const auto [lo, hi] = parse_window(window);
      if (lo > hi) throw UsageError("window must satisfy lo <= hi");
      Region w;
      for (int t = lo; t <= hi; ++t) w.push_back(t);
      out.precision(17);
      out << importance(greedy_ladder(samples), w) << "\n";
    } else if (c_sim->parsed()) {
      PiecewiseSpec spec = preset_spec(preset);
      if (n_override > 0) spec.n = n_override;
      if (k_override > 0) {
        spec.k = k_override;
        spec.geometric_q.reset();
      }
      const auto sd = resolve_seed(seed, err);
      Rng rng = make_rng(sd);
      const auto sim = gen_piecewise(spec, rng);
      Sink s(out_path, out);
      for (double v : sim.data.values()) *s << v << "\n";
      if (!truth_path.empty()) {
        nlohmann::json t{{"preset", preset},
                         {"seed", sd},
                         {"n", spec.n},
                         {"changepoints", sim.taus},
                         {"segment_heights", sim.segment_heights}};
        Sink ts(truth_path, out);
        *ts << t.dump(2) << "\n";
      }
    } else if (c_median->parsed()) {
      out.precision(17);
      out << median(ingest_csv(common.data).values()) << "\n";
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int run_pipeline(int argc, char** argv) {
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return run_pipeline(args, std::cout, std::cerr);
}

}  // namespace cpx
