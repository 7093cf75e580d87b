#include "cst/sparse.hpp"

#include <algorithm>
#include <string>

#include "cst/errors.hpp"
#include "cst/parallel.hpp"

namespace cst {

SparseOperator::SparseOperator(std::size_t n_rows, std::size_t n_cols)
    : n_rows_(n_rows), n_cols_(n_cols), row_ptr_(n_rows + 1, 0) {}

SparseOperator SparseOperator::from_rows(
    std::size_t n_cols, std::vector<std::vector<std::pair<std::uint32_t, double>>> rows) {
  SparseOperator op(rows.size(), n_cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto& row = rows[r];
    std::stable_sort(row.begin(), row.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 0; k < row.size();) {
      const std::uint32_t c = row[k].first;
      if (c >= n_cols) throw ShapeMismatch("column index out of range");
      double v = 0.0;
      for (; k < row.size() && row[k].first == c; ++k) v += row[k].second;
      op.col_idx_.push_back(c);
      op.values_.push_back(v);
    }
    op.row_ptr_[r + 1] = op.values_.size();
    row.clear();
    row.shrink_to_fit();
  }
  return op;
}

SparseOperator SparseOperator::from_triplets(std::size_t n_rows, std::size_t n_cols,
                                             std::vector<Triplet> triplets) {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(n_rows);
  for (const auto& t : triplets) {
    if (t.row >= n_rows) throw ShapeMismatch("row index out of range");
    rows[t.row].emplace_back(t.col, t.value);
  }
  return from_rows(n_cols, std::move(rows));
}

SparseOperator SparseOperator::from_csr(std::size_t n_rows, std::size_t n_cols,
                                        std::vector<std::uint64_t> row_ptr,
                                        std::vector<std::uint32_t> col_idx,
                                        std::vector<double> values) {
  if (row_ptr.size() != n_rows + 1 || row_ptr.front() != 0 || row_ptr.back() != values.size() ||
      col_idx.size() != values.size()) {
    throw FormatError("inconsistent CSR arrays");
  }
  for (std::size_t r = 0; r < n_rows; ++r) {
    if (row_ptr[r + 1] < row_ptr[r]) throw FormatError("row pointers decrease");
    for (std::uint64_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      if (col_idx[k] >= n_cols) throw FormatError("column index out of range");
      if (k > row_ptr[r] && col_idx[k] <= col_idx[k - 1]) throw FormatError("unsorted row");
    }
  }
  SparseOperator op(n_rows, n_cols);
  op.row_ptr_ = std::move(row_ptr);
  op.col_idx_ = std::move(col_idx);
  op.values_ = std::move(values);
  return op;
}

void SparseOperator::apply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != n_cols_ || y.size() != n_rows_) {
    throw ShapeMismatch("apply: expected " + std::to_string(n_cols_) + " -> " +
                        std::to_string(n_rows_) + ", got " + std::to_string(x.size()) + " -> " +
                        std::to_string(y.size()));
  }
  constexpr std::size_t chunk = 256;
  parallel_for((n_rows_ + chunk - 1) / chunk, [&](std::size_t c) {
    const std::size_t end = std::min(n_rows_, (c + 1) * chunk);
    for (std::size_t r = c * chunk; r < end; ++r) {
      double s = 0.0;
      for (std::uint64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * x[col_idx_[k]];
      y[r] = s;
    }
  });
}

void SparseOperator::apply_adjoint(std::span<const double> y, std::span<double> x) const {
  if (y.size() != n_rows_ || x.size() != n_cols_) {
    throw ShapeMismatch("apply_adjoint: expected " + std::to_string(n_rows_) + " -> " +
                        std::to_string(n_cols_) + ", got " + std::to_string(y.size()) + " -> " +
                        std::to_string(x.size()));
  }
  std::fill(x.begin(), x.end(), 0.0);
  for (std::size_t r = 0; r < n_rows_; ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    for (std::uint64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) x[col_idx_[k]] += values_[k] * yr;
  }
}

void SparseOperator::add_scaled(const SparseOperator& other, double s) {
  if (other.n_rows_ != n_rows_ || other.n_cols_ != n_cols_) throw ShapeMismatch("add_scaled: shapes differ");
  std::vector<std::uint64_t> rp(n_rows_ + 1, 0);
  std::vector<std::uint32_t> ci;
  std::vector<double> vals;
  ci.reserve(nnz() + other.nnz());
  vals.reserve(nnz() + other.nnz());
  for (std::size_t r = 0; r < n_rows_; ++r) {
    std::uint64_t a = row_ptr_[r];
    std::uint64_t b = other.row_ptr_[r];
    const std::uint64_t ae = row_ptr_[r + 1];
    const std::uint64_t be = other.row_ptr_[r + 1];
    while (a < ae || b < be) {
      if (b >= be || (a < ae && col_idx_[a] < other.col_idx_[b])) {
        ci.push_back(col_idx_[a]);
        vals.push_back(values_[a++]);
      } else if (a >= ae || other.col_idx_[b] < col_idx_[a]) {
        ci.push_back(other.col_idx_[b]);
        vals.push_back(s * other.values_[b++]);
      } else {
        ci.push_back(col_idx_[a]);
        vals.push_back(values_[a++] + s * other.values_[b++]);
      }
    }
    rp[r + 1] = vals.size();
  }
  row_ptr_ = std::move(rp);
  col_idx_ = std::move(ci);
  values_ = std::move(vals);
}

void SparseOperator::scale(double s) {
  for (double& v : values_) v *= s;
}

}  // namespace cst
