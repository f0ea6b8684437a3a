#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <fstream>

#include "rdmd/io.hpp"
#include "test_util.hpp"

using namespace rdmd;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("rdmd_io_" + name)).string();
}

SnapshotMatrix random_snapshots(Rng& rng, Eigen::Index m, Eigen::Index n) {
  SnapshotMatrix X;
  X.times = testutil::random_rvector(rng, m);
  X.values = testutil::random_cmatrix(rng, m, n, 1e3);
  X.values(0, 0) = Complex(-0.0, -0.0);
  X.values(m - 1, n - 1) = Complex(1e-300, -5e300);
  return X;
}

void write_text(const std::string& path, const std::string& s) {
  std::ofstream(path, std::ios::binary) << s;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::invalid_input;
}

}  // namespace

TEST_CASE("complex literal round trip") {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const Complex z = testutil::cnormal(rng, std::pow(10.0, 20.0 * (rng.uniform() - 0.5)));
    CHECK(parse_complex(format_complex(z)) == z);
  }
  CHECK(parse_complex("1+0i") == Complex(1, 0));
  CHECK(parse_complex("0.5+0.5i") == Complex(0.5, 0.5));
  CHECK(parse_complex("-2") == Complex(-2, 0));
  CHECK(parse_complex("3i") == Complex(0, 3));
  CHECK(parse_complex("1-i") == Complex(1, -1));
  CHECK(parse_complex("1e-3-2.5e2i") == Complex(1e-3, -250));
  CHECK(parse_complex(" 4+1i ") == Complex(4, 1));
  for (const char* bad : {"", "abc", "1+2", "1+2k", "1+2i3"}) CHECK_THROWS_AS(parse_complex(bad), Error);
}

TEST_CASE("CSV format example") {
  const auto X = parse_snapshots_csv("t,s1\n0,1+0i\n0.1,0.5+0.5i\n");
  REQUIRE(X.rows() == 2);
  REQUIRE(X.cols() == 1);
  CHECK(X.times(0) == 0.0);
  CHECK(X.times(1) == 0.1);
  CHECK(X.values(0, 0) == Complex(1.0, 0.0));
  CHECK(X.values(1, 0) == Complex(0.5, 0.5));
  // Spaces after commas and CRLF endings are tolerated.
  const auto Y = parse_snapshots_csv("t, s1, s2\r\n0, 1+0i, 2\r\n");
  CHECK(Y.values(0, 1) == Complex(2.0, 0.0));
}

TEST_CASE("CSV errors report line numbers") {
  auto message = [](const std::string& text) {
    try {
      parse_snapshots_csv(text);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::parse);
      return std::string(e.what());
    }
    FAIL("expected an error");
    return std::string();
  };
  CHECK(message("x,s1\n0,1\n").find("line 1") != std::string::npos);
  CHECK(message("t,s2\n0,1\n").find("line 1") != std::string::npos);
  CHECK(message("t,s1\n").find("line 2") != std::string::npos);
  CHECK(message("t,s1\n0,1\n1,2,3\n").find("line 3") != std::string::npos);
  CHECK(message("t,s1\n0,1\n1,2\nz,1\n").find("line 4") != std::string::npos);
  CHECK(message("t,s1\n0,1\n0.1,1+2j3\n").find("line 3") != std::string::npos);
  CHECK(message("").find("line 1") != std::string::npos);
}

TEST_CASE("binary round trip is bit-identical") {
  Rng rng(5);
  const auto X = random_snapshots(rng, 7, 4);
  const std::string path = temp_path("rt.bin");
  save_snapshots_binary(X, path);
  const auto Y = load_snapshots(path);
  CHECK(std::memcmp(X.times.data(), Y.times.data(), sizeof(double) * 7) == 0);
  CHECK(std::memcmp(X.values.data(), Y.values.data(), sizeof(Complex) * 28) == 0);
  CHECK(std::filesystem::file_size(path) == 5 + 16 + 8 * 7 + 16 * 28);
  std::filesystem::remove(path);
}

TEST_CASE("binary layout is little-endian row-major") {
  SnapshotMatrix X;
  X.times = RVector::LinSpaced(2, 0.0, 1.0);
  X.values.resize(2, 2);
  X.values << Complex(1, 2), Complex(3, 4), Complex(5, 6), Complex(7, 8);
  const std::string path = temp_path("layout.bin");
  save_snapshots_binary(X, path);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(bytes.substr(0, 5) == "RDMD1");
  CHECK(static_cast<unsigned char>(bytes[5]) == 2);
  CHECK(static_cast<unsigned char>(bytes[13]) == 2);
  double v[8];
  std::memcpy(v, bytes.data() + 5 + 16 + 16, sizeof v);
  for (int i = 0; i < 8; ++i) CHECK(v[i] == i + 1.0);
  std::filesystem::remove(path);
}

TEST_CASE("CSV and binary cross round trip") {
  Rng rng(6);
  const auto X = random_snapshots(rng, 6, 3);
  const std::string csv = temp_path("cross.csv"), bin = temp_path("cross.bin");
  save_snapshots_csv(X, csv);
  const auto A = load_snapshots(csv);
  save_snapshots_binary(A, bin);
  const auto B = load_snapshots(bin);
  CHECK((A.times - X.times).cwiseAbs().maxCoeff() <= 1e-15 * X.times.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < 3; ++j)
    for (Eigen::Index i = 0; i < 6; ++i) {
      CHECK(std::abs(B.values(i, j) - X.values(i, j)) <= 1e-15 * std::abs(X.values(i, j)));
    }
  CHECK(B.values == A.values);
  std::filesystem::remove(csv);
  std::filesystem::remove(bin);
}

TEST_CASE("binary format errors") {
  CHECK(kind_of([] { parse_snapshots_binary("RDMX1"); }) == ErrorKind::format);
  std::string header = "RDMD1";
  for (int b = 0; b < 8; ++b) header.push_back(b == 0 ? 2 : 0);
  CHECK(kind_of([&] { parse_snapshots_binary(header); }) == ErrorKind::format);
  for (int b = 0; b < 8; ++b) header.push_back(b == 0 ? 1 : 0);
  CHECK(kind_of([&] { parse_snapshots_binary(header + std::string(10, '\0')); }) == ErrorKind::format);
  const std::string path = temp_path("badmagic.bin");
  write_text(path, "RDMD2garbage");
  CHECK(kind_of([&] { load_snapshots(path); }) == ErrorKind::format);
  std::filesystem::remove(path);
  CHECK(kind_of([] { load_snapshots("/nonexistent/path/file.csv"); }) == ErrorKind::invalid_input);
}
