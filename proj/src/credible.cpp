#include "cpx/credible.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cpx/error.hpp"

namespace cpx {

void SampleSet::validate() const {
  if (n < 1) throw UsageError("sample set needs n >= 1");
  for (const auto& s : samples) {
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s[k] < 1 || s[k] > n) throw UsageError("sample element outside 1..n");
      if (k > 0 && s[k] <= s[k - 1]) throw UsageError("sample elements must be sorted and unique");
    }
  }
}

int required_count(int m, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in [0,1]");
  const double need = m * (1.0 - alpha);
  return static_cast<int>(std::ceil(need - 1e-9 * std::max(1.0, need)));
}

double coverage_fraction(const Region& A, const SampleSet& s) {
  if (s.m() == 0) throw UsageError("empty sample set");
  std::vector<char> in(static_cast<std::size_t>(s.n) + 1, 0);
  for (int a : A) {
    if (a >= 1 && a <= s.n) in[static_cast<std::size_t>(a)] = 1;
  }
  int count = 0;
  for (const auto& smp : s.samples) {
    if (std::all_of(smp.begin(), smp.end(), [&](int t) { return in[static_cast<std::size_t>(t)] != 0; })) ++count;
  }
  return static_cast<double>(count) / s.m();
}

Region RegionLadder::region(std::size_t step) const {
  std::vector<char> gone(static_cast<std::size_t>(n) + 1, 0);
  for (std::size_t k = 0; k < steps.at(step).removed; ++k) gone[static_cast<std::size_t>(removal_order[k])] = 1;
  Region r;
  for (int t = 1; t <= n; ++t) {
    if (!gone[static_cast<std::size_t>(t)]) r.push_back(t);
  }
  return r;
}

RegionLadder greedy_ladder(const SampleSet& s, const GreedyOptions& options) {
  s.validate();
  const int n = s.n, m = s.m();
  if (m == 0) throw UsageError("empty sample set");
  const auto N = static_cast<std::size_t>(n);
  std::vector<std::vector<int>> members(N + 1);
  for (int k = 0; k < m; ++k) {
    for (int t : s.samples[static_cast<std::size_t>(k)]) members[static_cast<std::size_t>(t)].push_back(k);
  }
  std::vector<int> count(N + 1, 0);
  for (std::size_t t = 1; t <= N; ++t) count[t] = static_cast<int>(members[t].size());
  std::vector<char> alive(static_cast<std::size_t>(m), 1), in(N + 1, 1);
  int live = m;
  std::size_t ops = 0;

  RegionLadder ladder;
  ladder.n = n;
  ladder.m = m;
  std::vector<LadderStep> raw{{1.0, 0}};
  for (int step = 0; step < n; ++step) {
    int pick = -1;
    for (int t = 1; t <= n; ++t) {
      ++ops;
      if (in[static_cast<std::size_t>(t)] && (pick < 0 || count[static_cast<std::size_t>(t)] < count[static_cast<std::size_t>(pick)])) {
        pick = t;
      }
    }
    in[static_cast<std::size_t>(pick)] = 0;
    ladder.removal_order.push_back(pick);
    for (int k : members[static_cast<std::size_t>(pick)]) {
      if (!alive[static_cast<std::size_t>(k)]) continue;
      alive[static_cast<std::size_t>(k)] = 0;
      --live;
      for (int u : s.samples[static_cast<std::size_t>(k)]) {
        --count[static_cast<std::size_t>(u)];
        ++ops;
      }
    }
    raw.push_back({static_cast<double>(live) / m, ladder.removal_order.size()});

    if (options.verify) {
      Region A;
      for (int t = 1; t <= n; ++t) {
        if (in[static_cast<std::size_t>(t)]) A.push_back(t);
      }
      const double cov = coverage_fraction(A, s);
      if (cov != static_cast<double>(live) / m) throw NumericError("greedy coverage bookkeeping mismatch");
      for (int t = 1; t <= n; ++t) {
        int c = 0;
        for (int k : members[static_cast<std::size_t>(t)]) c += alive[static_cast<std::size_t>(k)];
        if (c != count[static_cast<std::size_t>(t)]) throw NumericError("greedy membership count mismatch");
      }
    }
  }
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (k + 1 < raw.size() && raw[k + 1].coverage == raw[k].coverage) continue;
    ladder.steps.push_back(raw[k]);
  }
  if (options.operations) *options.operations += ops;
  return ladder;
}

Region region_for_alpha(const RegionLadder& ladder, double alpha) {
  const int need = required_count(ladder.m, alpha);
  std::size_t best = 0;
  for (std::size_t k = 0; k < ladder.steps.size(); ++k) {
    const auto covered = static_cast<int>(std::lround(ladder.steps[k].coverage * ladder.m));
    if (covered >= need) best = k;
  }
  return ladder.region(best);
}

Region brute_force_sbp(const SampleSet& s, double alpha) {
  s.validate();
  const int n = s.n, m = s.m();
  if (n > 22) throw UsageError("brute-force SBP supports n <= 22");
  if (m == 0) throw UsageError("empty sample set");
  const int need = required_count(m, alpha);
  const std::size_t full = std::size_t{1} << n;
  // cover[A] = number of samples contained in A (subset-sum transform)
  std::vector<std::int32_t> cover(full, 0);
  for (const auto& smp : s.samples) {
    std::size_t mask = 0;
    for (int t : smp) mask |= std::size_t{1} << (t - 1);
    ++cover[mask];
  }
  for (int b = 0; b < n; ++b) {
    const std::size_t bit = std::size_t{1} << b;
    for (std::size_t A = 0; A < full; ++A) {
      if (A & bit) cover[A] += cover[A ^ bit];
    }
  }
  // sizes ascending, combinations in lexicographic order
  for (int k = 0; k <= n; ++k) {
    std::vector<int> idx(static_cast<std::size_t>(k));
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
      std::size_t mask = 0;
      for (int v : idx) mask |= std::size_t{1} << v;
      if (cover[mask] >= need) {
        Region r;
        for (int v : idx) r.push_back(v + 1);
        return r;
      }
      int p = k - 1;
      while (p >= 0 && idx[static_cast<std::size_t>(p)] == n - k + p) --p;
      if (p < 0) break;
      ++idx[static_cast<std::size_t>(p)];
      for (int q = p + 1; q < k; ++q) idx[static_cast<std::size_t>(q)] = idx[static_cast<std::size_t>(q - 1)] + 1;
    }
  }
  throw NumericError("no region satisfies the coverage requirement");
}

namespace {

void write_terms(std::ostream& out, const std::vector<std::pair<std::string, double>>& terms) {
  int on_line = 0;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const double c = terms[k].second;
    if (k > 0 || c < 0) out << (c < 0 ? " - " : " + ");
    const double a = std::abs(c);
    if (a != 1.0) out << a << ' ';
    out << terms[k].first;
    if (++on_line == 12 && k + 1 < terms.size()) {
      out << "\n   ";
      on_line = 0;
    }
  }
}

}  // namespace

void export_ilp(const SampleSet& s, double alpha, std::ostream& out) {
  s.validate();
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in [0,1]");
  const int n = s.n, m = s.m();
  out.precision(17);
  out << "\\ sample based problem: n=" << n << " m=" << m << " alpha=" << alpha << "\n";
  out << "Minimize\n obj: ";
  std::vector<std::pair<std::string, double>> obj;
  for (int i = 1; i <= n; ++i) obj.emplace_back("U" + std::to_string(i), 1.0);
  write_terms(out, obj);
  out << "\nSubject To\n";
  std::vector<std::pair<std::string, double>> cov;
  for (int j = 1; j <= m; ++j) cov.emplace_back("F" + std::to_string(j), 1.0);
  out << " cover: ";
  write_terms(out, cov);
  out << " >= " << required_count(m, alpha) << "\n";
  std::vector<std::vector<int>> members(static_cast<std::size_t>(n) + 1);
  for (int j = 0; j < m; ++j) {
    for (int t : s.samples[static_cast<std::size_t>(j)]) members[static_cast<std::size_t>(t)].push_back(j + 1);
  }
  for (int i = 1; i <= n; ++i) {
    const auto& D = members[static_cast<std::size_t>(i)];
    if (D.empty()) continue;
    // sum_{j in D} (1 - F_j) >= |D| (1 - U_i)  <=>  |D| U_i - sum_{j in D} F_j >= 0
    std::vector<std::pair<std::string, double>> terms{{"U" + std::to_string(i), static_cast<double>(D.size())}};
    for (int j : D) terms.emplace_back("F" + std::to_string(j), -1.0);
    out << " t" << i << ": ";
    write_terms(out, terms);
    out << " >= 0\n";
  }
  out << "Binaries\n";
  for (int i = 1; i <= n; ++i) out << " U" << i << "\n";
  for (int j = 1; j <= m; ++j) out << " F" << j << "\n";
  out << "End\n";
}

void export_ilp(const SampleSet& s, double alpha, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  export_ilp(s, alpha, out);
}

namespace {

std::string lower(std::string v) {
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return v;
}

bool is_number(const std::string& t) {
  if (t.empty()) return false;
  char* end = nullptr;
  std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

// Parses "[+|-] [coef] var ..." tokens into terms.
std::vector<std::pair<std::string, double>> parse_terms(const std::vector<std::string>& toks) {
  std::vector<std::pair<std::string, double>> terms;
  double sign = 1.0, coef = 1.0;
  bool have_coef = false;
  for (const auto& t : toks) {
    if (t == "+") continue;
    if (t == "-") {
      sign = -sign;
      continue;
    }
    if (is_number(t)) {
      coef = std::strtod(t.c_str(), nullptr);
      have_coef = true;
      continue;
    }
    terms.emplace_back(t, sign * (have_coef ? coef : 1.0));
    sign = 1.0;
    coef = 1.0;
    have_coef = false;
  }
  return terms;
}

}  // namespace

LpProblem parse_lp(std::istream& in) {
  LpProblem lp;
  enum class Sec { None, Objective, Constraints, Binaries, Done } sec = Sec::None;
  std::vector<std::string> pending;  // tokens of the current objective or constraint
  std::string pending_name;

  auto flush_constraint = [&]() {
    if (pending.empty()) return;
    auto it = std::find_if(pending.begin(), pending.end(), [](const std::string& t) {
      return t == ">=" || t == "<=" || t == "=" || t == "=>" || t == "=<";
    });
    if (it == pending.end() || it + 1 == pending.end() || !is_number(*(it + 1))) {
      throw UsageError("malformed LP constraint '" + pending_name + "'");
    }
    LpConstraint c;
    c.name = pending_name;
    c.terms = parse_terms(std::vector<std::string>(pending.begin(), it));
    c.sense = (*it == "=>") ? ">=" : (*it == "=<") ? "<=" : *it;
    c.rhs = std::strtod((it + 1)->c_str(), nullptr);
    lp.constraints.push_back(std::move(c));
    pending.clear();
    pending_name.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    if (auto p = line.find('\\'); p != std::string::npos) line.resize(p);
    std::istringstream ls(line);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (toks.empty()) continue;
    const std::string head = lower(toks[0]);
    const std::string two = toks.size() > 1 ? head + " " + lower(toks[1]) : head;
    if (head == "minimize" || head == "maximize" || head == "min" || head == "max") {
      sec = Sec::Objective;
      lp.minimize = head[1] == 'i';
      continue;
    }
    if (two == "subject to" || head == "st" || head == "s.t.") {
      if (sec == Sec::Objective) {
        lp.objective = parse_terms(pending);
        pending.clear();
      }
      sec = Sec::Constraints;
      continue;
    }
    if (head == "binaries" || head == "binary" || head == "bin") {
      flush_constraint();
      sec = Sec::Binaries;
      continue;
    }
    if (head == "end") {
      flush_constraint();
      sec = Sec::Done;
      continue;
    }
    for (std::size_t k = 0; k < toks.size(); ++k) {
      std::string t = toks[k];
      if (!t.empty() && t.back() == ':' && (sec == Sec::Objective || sec == Sec::Constraints)) {
        if (sec == Sec::Constraints) {
          flush_constraint();
          pending_name = t.substr(0, t.size() - 1);
        }
        continue;
      }
      if (sec == Sec::Binaries) {
        lp.binaries.push_back(t);
      } else if (sec == Sec::Objective || sec == Sec::Constraints) {
        pending.push_back(t);
      }
    }
  }
  if (sec != Sec::Done) throw UsageError("LP file lacks End");
  return lp;
}

Region bonferroni_region(const std::vector<double>& marginals, double alpha) {
  const double cut = alpha / static_cast<double>(marginals.size());
  Region r;
  for (std::size_t i = 0; i < marginals.size(); ++i) {
    if (marginals[i] > cut) r.push_back(static_cast<int>(i) + 1);
  }
  return r;
}

Region pointwise_lower_set(const std::vector<double>& marginals, double alpha) {
  Region r;
  for (std::size_t i = 0; i < marginals.size(); ++i) {
    if (marginals[i] > alpha) r.push_back(static_cast<int>(i) + 1);
  }
  return r;
}

Region joined_hdr(const SampleSet& s, const std::vector<double>& logprobs, double alpha) {
  if (logprobs.size() != s.samples.size()) throw UsageError("one log-probability per sample is required");
  const int take = required_count(s.m(), alpha);
  std::vector<std::size_t> order(s.samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return logprobs[a] > logprobs[b]; });
  std::vector<char> in(static_cast<std::size_t>(s.n) + 1, 0);
  for (int k = 0; k < take; ++k) {
    for (int t : s.samples[order[static_cast<std::size_t>(k)]]) in[static_cast<std::size_t>(t)] = 1;
  }
  Region r;
  for (int t = 1; t <= s.n; ++t) {
    if (in[static_cast<std::size_t>(t)]) r.push_back(t);
  }
  return r;
}

double importance(const RegionLadder& ladder, const Region& window) {
  if (window.empty()) throw UsageError("importance needs a nonempty window");
  std::vector<std::size_t> rank(static_cast<std::size_t>(ladder.n) + 1, 0);
  for (std::size_t k = 0; k < ladder.removal_order.size(); ++k) {
    rank[static_cast<std::size_t>(ladder.removal_order[k])] = k;
  }
  std::size_t need = 0;
  for (int t : window) {
    if (t < 1 || t > ladder.n) throw UsageError("window outside 1..n");
    need = std::max(need, rank[static_cast<std::size_t>(t)] + 1);
  }
  for (const auto& st : ladder.steps) {
    if (st.removed >= need) return 1.0 - st.coverage;
  }
  return 1.0;
}

}  // namespace cpx
