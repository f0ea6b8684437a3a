#include "rdmd/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace rdmd {

namespace {

constexpr std::string_view kMagic = "RDMD1";

Error parse_error(std::size_t line, const std::string& msg) {
  return Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + msg);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_real(std::string_view text, double& out) {
  const std::string s(text);
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) buf.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void put_f64(std::string& buf, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  put_u64(buf, bits);
}

std::uint64_t get_u64(std::string_view bytes, std::size_t& pos) {
  if (pos + 8 > bytes.size()) throw Error(ErrorKind::format, "binary snapshot file is truncated");
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + b])) << (8 * b);
  pos += 8;
  return v;
}

double get_f64(std::string_view bytes, std::size_t& pos) {
  const std::uint64_t bits = get_u64(bytes, pos);
  double x;
  std::memcpy(&x, &bits, sizeof x);
  return x;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::invalid_input, "cannot write '" + path + "'");
  out << contents;
  if (!out) throw Error(ErrorKind::invalid_input, "write to '" + path + "' failed");
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_complex(const Complex& z) {
  std::string s = format_double(z.real());
  s += std::signbit(z.imag()) ? '-' : '+';
  s += format_double(std::abs(z.imag()));
  s += 'i';
  return s;
}

Complex parse_complex(std::string_view text) {
  const std::string s(trim(text));
  if (s.empty()) throw Error(ErrorKind::parse, "empty complex literal");
  const char* begin = s.c_str();
  char* end = nullptr;
  const double first = std::strtod(begin, &end);
  if (end == begin) throw Error(ErrorKind::parse, "bad complex literal '" + s + "'");
  std::string_view rest(end);
  if (rest.empty()) return {first, 0.0};
  if (rest == "i" || rest == "j") return {0.0, first};
  if (rest.front() != '+' && rest.front() != '-') throw Error(ErrorKind::parse, "bad complex literal '" + s + "'");
  const char* im_begin = end;
  const double second = std::strtod(im_begin, &end);
  if (end == im_begin) {
    // "a+i" / "a-i"
    if (std::string_view(im_begin) == "+i") return {first, 1.0};
    if (std::string_view(im_begin) == "-i") return {first, -1.0};
    throw Error(ErrorKind::parse, "bad complex literal '" + s + "'");
  }
  const std::string_view tail(end);
  if (tail != "i" && tail != "j") throw Error(ErrorKind::parse, "bad complex literal '" + s + "'");
  return {first, second};
}

SnapshotMatrix parse_snapshots_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    lines.push_back(text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw parse_error(1, "missing header");

  const auto header = split_commas(lines[0]);
  if (header.size() < 2 || header[0] != "t") throw parse_error(1, "header must start with 't' followed by signal columns");
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c] != "s" + std::to_string(c))
      throw parse_error(1, "expected column 's" + std::to_string(c) + "', found '" + std::string(header[c]) + "'");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(header.size() - 1);
  const Eigen::Index m = static_cast<Eigen::Index>(lines.size() - 1);
  if (m < 1) throw parse_error(2, "no data rows");

  SnapshotMatrix out;
  out.times.resize(m);
  out.values.resize(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::size_t line_no = static_cast<std::size_t>(i) + 2;
    const auto fields = split_commas(lines[static_cast<std::size_t>(i) + 1]);
    if (static_cast<Eigen::Index>(fields.size()) != n + 1)
      throw parse_error(line_no, "expected " + std::to_string(n + 1) + " fields, found " + std::to_string(fields.size()));
    if (!parse_real(fields[0], out.times(i))) throw parse_error(line_no, "bad time value '" + std::string(fields[0]) + "'");
    for (Eigen::Index j = 0; j < n; ++j) {
      try {
        out.values(i, j) = parse_complex(fields[static_cast<std::size_t>(j) + 1]);
      } catch (const Error& e) {
        throw parse_error(line_no, e.what());
      }
    }
  }
  return out;
}

SnapshotMatrix parse_snapshots_binary(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw Error(ErrorKind::format, "missing RDMD1 magic");
  std::size_t pos = kMagic.size();
  const std::uint64_t m = get_u64(bytes, pos);
  const std::uint64_t n = get_u64(bytes, pos);
  const std::uint64_t expect = kMagic.size() + 16 + 8 * m + 16 * m * n;
  if (m == 0 || n == 0 || m > (1ULL << 32) || n > (1ULL << 32) || bytes.size() != expect)
    throw Error(ErrorKind::format, "binary snapshot size does not match its header");
  SnapshotMatrix out;
  out.times.resize(static_cast<Eigen::Index>(m));
  out.values.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < out.times.size(); ++i) out.times(i) = get_f64(bytes, pos);
  for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
      const double re = get_f64(bytes, pos);
      const double im = get_f64(bytes, pos);
      out.values(i, j) = Complex(re, im);
    }
  }
  return out;
}

SnapshotMatrix load_snapshots(const std::string& path) {
  const std::string contents = read_file(path);
  // Any RDMD prefix is treated as binary so a wrong version is a format error.
  if (contents.compare(0, 4, kMagic.substr(0, 4)) == 0) return parse_snapshots_binary(contents);
  return parse_snapshots_csv(contents);
}

void save_snapshots_csv(const SnapshotMatrix& data, const std::string& path) {
  std::string out = "t";
  for (Eigen::Index j = 0; j < data.cols(); ++j) out += ",s" + std::to_string(j + 1);
  out += '\n';
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    out += format_double(data.times(i));
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      out += ',';
      out += format_complex(data.values(i, j));
    }
    out += '\n';
  }
  write_file(path, out);
}

void save_snapshots_binary(const SnapshotMatrix& data, const std::string& path) {
  std::string buf(kMagic);
  put_u64(buf, static_cast<std::uint64_t>(data.rows()));
  put_u64(buf, static_cast<std::uint64_t>(data.cols()));
  for (Eigen::Index i = 0; i < data.rows(); ++i) put_f64(buf, data.times(i));
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      put_f64(buf, data.values(i, j).real());
      put_f64(buf, data.values(i, j).imag());
    }
  }
  write_file(path, buf);
}

void save_snapshots(const SnapshotMatrix& data, const std::string& path, SnapshotFormat format) {
  if (format == SnapshotFormat::binary)
    save_snapshots_binary(data, path);
  else
    save_snapshots_csv(data, path);
}

}  // namespace rdmd
