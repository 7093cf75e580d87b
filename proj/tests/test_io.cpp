#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cst/errors.hpp"
#include "cst/io.hpp"
#include "cst/phantom.hpp"
#include "oracles.hpp"

using namespace cst;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "cst_test_io";
  fs::create_directories(dir);
  return dir;
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void put_bytes(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

Spectrum sample_spectrum(std::size_t levels, bool ballistic) {
  oracle::Gen gen(113 + levels);
  Spectrum s(3, 4, EnergyGrid::default_grid(10));
  for (double& c : s.counts) c = gen.uniform(0, 100);
  s.n_levels = levels;
  if (ballistic) {
    s.ballistic.resize(levels * s.n_pairs());
    for (double& b : s.ballistic) b = gen.uniform(0, 1);
  }
  s.metadata["note"] = "sample";
  return s;
}

// Checks that every way of damaging a valid file is reported.
template <class Reader>
void check_corruption(const fs::path& good, Reader read) {
  const std::string ok = bytes(good);
  const fs::path bad = good.string() + ".bad";

  put_bytes(bad, ok.substr(0, ok.size() / 2));
  CHECK_THROWS_AS(read(bad.string()), FormatError);

  std::string magic = ok;
  magic[0] = 'X';
  put_bytes(bad, magic);
  CHECK_THROWS_AS(read(bad.string()), FormatError);

  put_bytes(bad, ok + "junk");
  CHECK_THROWS_AS(read(bad.string()), FormatError);

  CHECK_THROWS_AS(read((scratch_dir() / "does_not_exist").string()), Error);
}

}  // namespace

TEST_CASE("spectrum files round trip byte for byte") {
  const fs::path dir = scratch_dir();
  for (std::size_t levels : {1, 2}) {
    for (bool ballistic : {true, false}) {
      const Spectrum s = sample_spectrum(levels, ballistic);
      const fs::path a = dir / "a.csts", b = dir / "b.csts";
      write_spectrum(a.string(), s);
      const Spectrum back = read_spectrum(a.string());
      CHECK(back.counts == s.counts);
      CHECK(back.grid == s.grid);
      CHECK(back.ballistic == s.ballistic);
      CHECK(back.metadata == s.metadata);
      if (ballistic) CHECK(back.n_levels == levels);
      write_spectrum(b.string(), back);
      CHECK(bytes(a) == bytes(b));
      // Version 2 carries the level count.
      CHECK(static_cast<unsigned char>(bytes(a)[4]) == (ballistic && levels == 2 ? 2 : 1));
    }
  }
  write_spectrum((dir / "c.csts").string(), sample_spectrum(1, true));
  check_corruption(dir / "c.csts", [](const std::string& p) { return read_spectrum(p); });
}

TEST_CASE("operator files round trip byte for byte") {
  oracle::Gen gen(127);
  std::vector<Triplet> t;
  for (int k = 0; k < 300; ++k) t.push_back({gen.index(40), static_cast<std::uint32_t>(gen.index(25)), gen.uniform(-1, 1)});
  SparseOperator op = SparseOperator::from_triplets(40, 25, t);
  op.metadata["kind"] = "test";
  const fs::path a = scratch_dir() / "a.cstm", b = scratch_dir() / "b.cstm";
  write_operator(a.string(), op);
  const SparseOperator back = read_operator(a.string());
  CHECK(back.row_ptr() == op.row_ptr());
  CHECK(back.col_idx() == op.col_idx());
  CHECK(back.values() == op.values());
  CHECK(back.metadata == op.metadata);
  write_operator(b.string(), back);
  CHECK(bytes(a) == bytes(b));
  check_corruption(a, [](const std::string& p) { return read_operator(p); });
}

TEST_CASE("image files round trip byte for byte") {
  const DensityImage img = thorax_phantom(48);
  const fs::path a = scratch_dir() / "a.csti", b = scratch_dir() / "b.csti";
  write_image(a.string(), img, {{"what", "thorax"}});
  nlohmann::json meta;
  const DensityImage back = read_image(a.string(), &meta);
  CHECK(back.n == img.n);
  CHECK(back.fov == img.fov);
  CHECK(back.values == img.values);
  CHECK(meta.at("what") == "thorax");
  write_image(b.string(), back, meta);
  CHECK(bytes(a) == bytes(b));
  check_corruption(a, [](const std::string& p) { return read_image(p); });
}

TEST_CASE("exports") {
  const fs::path dir = scratch_dir();
  const DensityImage img = two_disk_phantom(20);
  write_pgm((dir / "img.pgm").string(), img);
  const std::string pgm = bytes(dir / "img.pgm");
  const std::string header = "P5\n20 20\n65535\n";
  REQUIRE(pgm.size() == header.size() + 2 * 20 * 20);
  CHECK(pgm.substr(0, header.size()) == header);

  const Spectrum s = sample_spectrum(1, true);
  write_spectrum_csv((dir / "s.csv").string(), s);
  std::ifstream in(dir / "s.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 1 + s.counts.size());

  write_text_file((dir / "t.txt").string(), "hello\n");
  CHECK(read_text_file((dir / "t.txt").string()) == "hello\n");
}
