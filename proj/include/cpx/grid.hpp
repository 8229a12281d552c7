#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace cpx {

// Sparse upper-triangular index of live particles (j, i), 0 <= j <= i, 1 <= i <= n.
// Entries are stored column by column (ascending j within a column). A row index
// over the same entries is built once the grid is complete; rows are contiguous
// in i because a dropped particle is never revived.
class GridLayout {
 public:
  explicit GridLayout(int n);

  // Appends column i (must be the next column) with ascending starts js.
  void append_column(const std::vector<int>& js);
  void build_rows();

  int n() const { return n_; }
  std::size_t size() const { return row_of_.size(); }

  std::size_t col_begin(int i) const { return col_offset_[static_cast<std::size_t>(i)]; }
  std::size_t col_end(int i) const { return col_offset_[static_cast<std::size_t>(i) + 1]; }
  int start_of(std::size_t e) const { return row_of_[e]; }

  static int row_first(int j) { return j == 0 ? 1 : j; }
  // Last live i of row j, or -1 when the row is empty.
  int row_last(int j) const { return row_last_[static_cast<std::size_t>(j)]; }
  // Entry index of (j, i) for row_first(j) <= i <= row_last(j).
  std::size_t row_entry(int j, int i) const {
    return row_entries_[row_offset_[static_cast<std::size_t>(j)] + static_cast<std::size_t>(i - row_first(j))];
  }
  bool rows_built() const { return rows_built_; }

  std::optional<std::size_t> find(int j, int i) const;

 private:
  int n_;
  int columns_ = 0;
  std::vector<std::size_t> col_offset_;
  std::vector<int> row_of_;
  bool rows_built_ = false;
  std::vector<int> row_last_;
  std::vector<std::size_t> row_offset_;
  std::vector<std::size_t> row_entries_;
};

}  // namespace cpx
