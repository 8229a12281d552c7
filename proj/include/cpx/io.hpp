#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cpx/credible.hpp"
#include "cpx/model.hpp"
#include "cpx/posterior.hpp"

namespace cpx {

// One value per line; a non-numeric first line is taken as a header.
TimeSeries parse_series(std::istream& in);
// "-" reads standard input.
TimeSeries ingest_csv(const std::string& path);

void write_samples(std::ostream& out, int n, const std::vector<ChangepointConfig>& draws, unsigned long long seed);
SampleSet read_samples(std::istream& in, int n_hint = 0);
SampleSet read_samples(const std::string& path, int n_hint = 0);

std::string join(const std::vector<int>& v, const char* sep = ",");

}  // namespace cpx
