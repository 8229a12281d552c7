#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace cpx {

// Sorted subset of {1..n}.
using Region = std::vector<int>;

struct SampleSet {
  int n = 0;
  std::vector<std::vector<int>> samples;  // each sorted, elements in 1..n

  int m() const { return static_cast<int>(samples.size()); }
  void validate() const;
};

// Smallest integer count c with c / m >= 1 - alpha.
int required_count(int m, double alpha);

double coverage_fraction(const Region& A, const SampleSet& s);

struct LadderStep {
  double coverage;
  std::size_t removed;  // region = {1..n} minus the first `removed` timepoints of removal_order
};

// Nested regions produced by the greedy solver, one per distinct coverage level
// (the smallest region at that level), coverage strictly decreasing.
struct RegionLadder {
  int n = 0;
  int m = 0;
  std::vector<int> removal_order;
  std::vector<LadderStep> steps;

  Region region(std::size_t step) const;
};

struct GreedyOptions {
  // Recount coverage and membership counts from scratch after every removal.
  bool verify = false;
  // Elementary operations (scan steps and count updates) when set.
  std::size_t* operations = nullptr;
};

RegionLadder greedy_ladder(const SampleSet& s, const GreedyOptions& options = {});
// Last ladder region whose coverage is still >= 1 - alpha.
Region region_for_alpha(const RegionLadder& ladder, double alpha);

// Minimum-size region with coverage >= 1 - alpha, lexicographically smallest among ties. n <= 22.
Region brute_force_sbp(const SampleSet& s, double alpha);

void export_ilp(const SampleSet& s, double alpha, std::ostream& out);
void export_ilp(const SampleSet& s, double alpha, const std::string& path);

struct LpConstraint {
  std::string name;
  std::vector<std::pair<std::string, double>> terms;
  std::string sense;  // ">=", "<=" or "="
  double rhs = 0.0;
};

struct LpProblem {
  bool minimize = true;
  std::vector<std::pair<std::string, double>> objective;
  std::vector<LpConstraint> constraints;
  std::vector<std::string> binaries;
};

LpProblem parse_lp(std::istream& in);

Region bonferroni_region(const std::vector<double>& marginals, double alpha);
Region pointwise_lower_set(const std::vector<double>& marginals, double alpha);
Region joined_hdr(const SampleSet& s, const std::vector<double>& logprobs, double alpha);

// Smallest alpha whose ladder region avoids the window.
double importance(const RegionLadder& ladder, const Region& window);

}  // namespace cpx
