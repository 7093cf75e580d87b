#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "cst/linear_map.hpp"

namespace cst {

struct Triplet {
  std::uint64_t row;
  std::uint32_t col;
  double value;
};

/// Compressed-sparse-row matrix. Column indices are sorted within each row
/// and duplicates are merged on construction.
class SparseOperator final : public LinearMap {
 public:
  SparseOperator() = default;
  SparseOperator(std::size_t n_rows, std::size_t n_cols);

  /// Builds from triplets; entries with equal (row, col) are summed in input order.
  static SparseOperator from_triplets(std::size_t n_rows, std::size_t n_cols,
                                      std::vector<Triplet> triplets);

  /// Builds from per-row (col, value) lists, summing duplicates in list order.
  static SparseOperator from_rows(std::size_t n_cols,
                                  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows);

  [[nodiscard]] std::size_t rows() const override { return n_rows_; }
  [[nodiscard]] std::size_t cols() const override { return n_cols_; }
  [[nodiscard]] std::size_t nnz() const { return values_.size(); }

  void apply(std::span<const double> x, std::span<double> y) const override;
  void apply_adjoint(std::span<const double> y, std::span<double> x) const override;

  /// this += s * other (same shape).
  void add_scaled(const SparseOperator& other, double s);
  void scale(double s);

  [[nodiscard]] const std::vector<std::uint64_t>& row_ptr() const { return row_ptr_; }
  [[nodiscard]] const std::vector<std::uint32_t>& col_idx() const { return col_idx_; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }

  /// Assembles from raw CSR arrays after validating them.
  static SparseOperator from_csr(std::size_t n_rows, std::size_t n_cols,
                                 std::vector<std::uint64_t> row_ptr,
                                 std::vector<std::uint32_t> col_idx, std::vector<double> values);

  /// Provenance: fingerprints, kind, sampling.
  nlohmann::json metadata = nlohmann::json::object();

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<std::uint64_t> row_ptr_{0};
  std::vector<std::uint32_t> col_idx_;
  std::vector<double> values_;
};

}  // namespace cst
