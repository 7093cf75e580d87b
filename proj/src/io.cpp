#include "cst/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cst/errors.hpp"

namespace cst {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot open " + path + " for writing");
  }
  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  template <class T>
  void put(T v) { raw(&v, sizeof v); }
  template <class T>
  void array(const std::vector<T>& v) { raw(v.data(), v.size() * sizeof(T)); }
  void metadata(const nlohmann::json& j) {
    const std::string s = j.dump();
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void close() {
    out_.close();
    if (!out_) throw Error("failed writing " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw Error("cannot open " + path);
  }
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(path_ + ": truncated file");
  }
  template <class T>
  T get() {
    T v;
    raw(&v, sizeof v);
    return v;
  }
  template <class T>
  std::vector<T> array(std::size_t n) {
    if (n > (std::size_t{1} << 34)) throw FormatError(path_ + ": implausible array length");
    std::vector<T> v(n);
    raw(v.data(), n * sizeof(T));
    return v;
  }
  void magic(const char* expected) {
    char m[4];
    raw(m, 4);
    if (std::memcmp(m, expected, 4) != 0) throw FormatError(path_ + ": bad magic, expected " + expected);
  }
  nlohmann::json metadata() {
    const auto len = get<std::uint32_t>();
    std::string s(len, '\0');
    raw(s.data(), len);
    if (in_.peek() != std::char_traits<char>::eof()) throw FormatError(path_ + ": trailing bytes");
    try {
      return nlohmann::json::parse(s);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path_ + ": bad metadata: " + e.what());
    }
  }

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace

void write_spectrum(const std::string& path, const Spectrum& sp) {
  Writer w(path);
  const bool multi = sp.has_ballistic() && sp.n_levels != 1;
  w.raw("CSTS", 4);
  w.put<std::uint32_t>(multi ? 2 : 1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sp.n_sources));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sp.n_detectors));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sp.n_bins()));
  if (multi) w.put<std::uint32_t>(static_cast<std::uint32_t>(sp.n_levels));
  w.array(sp.grid.edges);
  // A missing ballistic channel is stored as NaN so readers can tell.
  if (sp.has_ballistic()) {
    w.array(sp.ballistic);
  } else {
    w.array(std::vector<double>(sp.n_pairs(), std::nan("")));
  }
  w.array(sp.counts);
  w.metadata(sp.metadata);
  w.close();
}

Spectrum read_spectrum(const std::string& path) {
  Reader r(path);
  r.magic("CSTS");
  const auto version = r.get<std::uint32_t>();
  if (version != 1 && version != 2) throw FormatError(path + ": unsupported spectrum version");
  Spectrum sp;
  sp.n_sources = r.get<std::uint32_t>();
  sp.n_detectors = r.get<std::uint32_t>();
  const std::size_t nb = r.get<std::uint32_t>();
  sp.n_levels = version == 2 ? r.get<std::uint32_t>() : 1;
  sp.grid.edges = r.array<double>(nb + 1);
  sp.ballistic = r.array<double>(sp.n_levels * sp.n_sources * sp.n_detectors);
  if (std::all_of(sp.ballistic.begin(), sp.ballistic.end(), [](double v) { return std::isnan(v); })) {
    sp.ballistic.clear();
  }
  sp.counts = r.array<double>(sp.n_sources * sp.n_detectors * nb);
  sp.metadata = r.metadata();
  sp.grid.validate();
  return sp;
}

void write_operator(const std::string& path, const SparseOperator& op) {
  Writer w(path);
  w.raw("CSTM", 4);
  w.put<std::uint32_t>(1);
  w.put<std::uint64_t>(op.rows());
  w.put<std::uint64_t>(op.cols());
  w.put<std::uint64_t>(op.nnz());
  w.array(op.row_ptr());
  w.array(op.col_idx());
  w.array(op.values());
  w.metadata(op.metadata);
  w.close();
}

SparseOperator read_operator(const std::string& path) {
  Reader r(path);
  r.magic("CSTM");
  if (r.get<std::uint32_t>() != 1) throw FormatError(path + ": unsupported operator version");
  const auto rows = r.get<std::uint64_t>();
  const auto cols = r.get<std::uint64_t>();
  const auto nnz = r.get<std::uint64_t>();
  auto rp = r.array<std::uint64_t>(rows + 1);
  auto ci = r.array<std::uint32_t>(nnz);
  auto vals = r.array<double>(nnz);
  auto meta = r.metadata();
  SparseOperator op = SparseOperator::from_csr(rows, cols, std::move(rp), std::move(ci), std::move(vals));
  op.metadata = std::move(meta);
  return op;
}

void write_image(const std::string& path, const DensityImage& image, const nlohmann::json& metadata) {
  Writer w(path);
  w.raw("CSTI", 4);
  w.put<std::uint32_t>(1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(image.n));
  w.put<double>(image.fov);
  w.array(image.values);
  w.metadata(metadata);
  w.close();
}

DensityImage read_image(const std::string& path, nlohmann::json* metadata) {
  Reader r(path);
  r.magic("CSTI");
  if (r.get<std::uint32_t>() != 1) throw FormatError(path + ": unsupported image version");
  DensityImage img;
  img.n = r.get<std::uint32_t>();
  img.fov = r.get<double>();
  img.values = r.array<double>(img.n * img.n);
  auto meta = r.metadata();
  if (metadata) *metadata = std::move(meta);
  return img;
}

void write_pgm(const std::string& path, const DensityImage& image, double lo, double hi) {
  if (!(hi > lo)) {
    const auto [mn, mx] = std::minmax_element(image.values.begin(), image.values.end());
    lo = *mn;
    hi = *mx > *mn ? *mx : *mn + 1.0;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "P5\n" << image.n << ' ' << image.n << "\n65535\n";
  for (double v : image.values) {
    const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(t * 65535.0));
    const unsigned char be[2] = {static_cast<unsigned char>(q >> 8), static_cast<unsigned char>(q & 0xff)};
    out.write(reinterpret_cast<const char*>(be), 2);
  }
  if (!out) throw Error("failed writing " + path);
}

void write_spectrum_csv(const std::string& path, const Spectrum& sp) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "source,detector,bin,energy_lo_MeV,energy_hi_MeV,counts\n";
  out << std::setprecision(17);
  for (std::size_t s = 0; s < sp.n_sources; ++s) {
    for (std::size_t d = 0; d < sp.n_detectors; ++d) {
      for (std::size_t b = 0; b < sp.n_bins(); ++b) {
        out << s << ',' << d << ',' << b << ',' << sp.grid.edges[b] << ',' << sp.grid.edges[b + 1] << ','
            << sp.at(s, d, b) << '\n';
      }
    }
  }
  if (!out) throw Error("failed writing " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path);
}

}  // namespace cst
