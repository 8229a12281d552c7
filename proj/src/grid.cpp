#include "cpx/grid.hpp"

#include <algorithm>

#include "cpx/error.hpp"

namespace cpx {

GridLayout::GridLayout(int n) : n_(n) {
  col_offset_.assign(2, 0);  // column 0 is empty
}

void GridLayout::append_column(const std::vector<int>& js) {
  ++columns_;
  if (columns_ > n_) throw UsageError("too many columns for grid");
  row_of_.insert(row_of_.end(), js.begin(), js.end());
  col_offset_.push_back(row_of_.size());
  rows_built_ = false;
}

void GridLayout::build_rows() {
  if (columns_ != n_) throw UsageError("grid incomplete");
  const auto N = static_cast<std::size_t>(n_);
  row_last_.assign(N + 1, -1);
  std::vector<std::size_t> count(N + 1, 0);
  for (int i = 1; i <= n_; ++i) {
    for (std::size_t e = col_begin(i); e < col_end(i); ++e) {
      const auto j = static_cast<std::size_t>(row_of_[e]);
      row_last_[j] = i;
      ++count[j];
    }
  }
  row_offset_.assign(N + 2, 0);
  for (std::size_t j = 0; j <= N; ++j) {
    if (row_last_[j] >= 0) {
      const auto len = static_cast<std::size_t>(row_last_[j] - row_first(static_cast<int>(j)) + 1);
      if (len != count[j]) throw NumericError("grid row is not contiguous");
    }
    row_offset_[j + 1] = row_offset_[j] + count[j];
  }
  row_entries_.assign(row_of_.size(), 0);
  for (int i = 1; i <= n_; ++i) {
    for (std::size_t e = col_begin(i); e < col_end(i); ++e) {
      const int j = row_of_[e];
      row_entries_[row_offset_[static_cast<std::size_t>(j)] + static_cast<std::size_t>(i - row_first(j))] = e;
    }
  }
  rows_built_ = true;
}

std::optional<std::size_t> GridLayout::find(int j, int i) const {
  if (i < 1 || i > columns_ || j < 0 || j > i) return std::nullopt;
  const auto b = row_of_.begin() + static_cast<std::ptrdiff_t>(col_begin(i));
  const auto en = row_of_.begin() + static_cast<std::ptrdiff_t>(col_end(i));
  const auto it = std::lower_bound(b, en, j);
  if (it == en || *it != j) return std::nullopt;
  return static_cast<std::size_t>(it - row_of_.begin());
}

}  // namespace cpx
