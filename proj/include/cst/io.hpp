#pragma once

#include <string>

#include "cst/image.hpp"
#include "cst/sparse.hpp"
#include "cst/spectrum.hpp"

namespace cst {

// All binary formats are little-endian and end with a u32 length followed by
// UTF-8 JSON metadata.
//
// Spectrum  "CSTS": u32 version, u32 n_src, n_det, n_bins, [v2: u32 n_levels],
//           f64 edges[n_bins+1], f64 ballistic[n_levels*n_src*n_det],
//           f64 counts[n_src*n_det*n_bins]. Version 1 has a single level.
// Operator  "CSTM": u32 version, u64 rows, cols, nnz, u64 row_ptr[rows+1],
//           u32 col_idx[nnz], f64 values[nnz].
// Image     "CSTI": u32 version, u32 n, f64 fov, f64 values[n*n].

void write_spectrum(const std::string& path, const Spectrum& spectrum);
Spectrum read_spectrum(const std::string& path);

void write_operator(const std::string& path, const SparseOperator& op);
SparseOperator read_operator(const std::string& path);

void write_image(const std::string& path, const DensityImage& image,
                 const nlohmann::json& metadata = nlohmann::json::object());
DensityImage read_image(const std::string& path, nlohmann::json* metadata = nullptr);

/// 16-bit binary PGM, linearly mapped from [lo, hi] (auto range when lo >= hi).
void write_pgm(const std::string& path, const DensityImage& image, double lo = 0.0, double hi = 0.0);

/// Long-format CSV: source, detector, bin, energy_lo, energy_hi, counts.
void write_spectrum_csv(const std::string& path, const Spectrum& spectrum);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace cst
