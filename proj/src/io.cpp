#include "cpx/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cpx/error.hpp"

namespace cpx {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& field, double& out) {
  if (field.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(field.c_str(), &end);
  return end == field.c_str() + field.size();
}

}  // namespace

TimeSeries parse_series(std::istream& in) {
  std::vector<double> values;
  std::string line;
  int lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    std::string field = trim(line);
    if (field.empty()) continue;
    if (auto c = field.find(','); c != std::string::npos) field = trim(field.substr(0, c));
    double v;
    const bool numeric = parse_double(field, v);
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw UsageError("line " + std::to_string(lineno) + ": cannot parse '" + field + "'");
    }
    first = false;
    if (!std::isfinite(v)) throw UsageError("line " + std::to_string(lineno) + ": non-finite value");
    values.push_back(v);
  }
  if (values.empty()) throw UsageError("no observations found");
  return TimeSeries(std::move(values));
}

TimeSeries ingest_csv(const std::string& path) {
  if (path == "-") return parse_series(std::cin);
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  return parse_series(in);
}

std::string join(const std::vector<int>& v, const char* sep) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += sep;
    s += std::to_string(v[k]);
  }
  return s;
}

void write_samples(std::ostream& out, int n, const std::vector<ChangepointConfig>& draws, unsigned long long seed) {
  out << "# n=" << n << " seed=" << seed << "\n";
  for (const auto& d : draws) out << join(d) << "\n";
}

SampleSet read_samples(std::istream& in, int n_hint) {
  SampleSet s;
  s.n = n_hint;
  int max_seen = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (!t.empty() && t[0] == '#') {
      if (auto p = t.find("n="); p != std::string::npos && s.n == 0) s.n = std::atoi(t.c_str() + p + 2);
      continue;
    }
    std::vector<int> sample;
    std::stringstream ss(t);
    for (std::string f; std::getline(ss, f, ',');) {
      f = trim(f);
      if (f.empty()) continue;
      char* end = nullptr;
      const long v = std::strtol(f.c_str(), &end, 10);
      if (end != f.c_str() + f.size() || v < 1) {
        throw UsageError("samples line " + std::to_string(lineno) + ": bad element '" + f + "'");
      }
      sample.push_back(static_cast<int>(v));
      max_seen = std::max(max_seen, static_cast<int>(v));
    }
    std::sort(sample.begin(), sample.end());
    sample.erase(std::unique(sample.begin(), sample.end()), sample.end());
    s.samples.push_back(std::move(sample));
  }
  if (s.n == 0) s.n = std::max(1, max_seen);
  if (s.samples.empty()) throw UsageError("no samples found");
  s.validate();
  return s;
}

SampleSet read_samples(const std::string& path, int n_hint) {
  if (path == "-") return read_samples(std::cin, n_hint);
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  return read_samples(in, n_hint);
}

}  // namespace cpx
