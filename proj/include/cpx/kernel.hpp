#pragma once

#include <variant>

#include "cpx/conjugate.hpp"
#include "cpx/laplace.hpp"
#include "cpx/model.hpp"

namespace cpx {

using SegmentState = std::variant<GaussianMeanState, GaussianVarState, LaplaceSegState>;

// Calls f with the concrete kernel for `family`.
template <class F>
decltype(auto) with_kernel(const ObservationFamily& family, F&& f) {
  switch (family.index()) {
    case 0: return f(GaussianMeanKernel(std::get<0>(family)));
    case 1: return f(GaussianVarKernel(std::get<1>(family)));
    default: return f(LaplaceKernel(std::get<2>(family)));
  }
}

// Posterior height state H_ji of segment (j, i), rebuilt from the data.
template <class K>
typename K::State segment_state(const K& kernel, const TimeSeries& y, int j, int i) {
  auto s = kernel.prior();
  for (int l = j == 0 ? 1 : j; l <= i; ++l) kernel.absorb(s, y(l));
  return s;
}

}  // namespace cpx
