#pragma once

#include <string>
#include <string_view>

#include "rdmd/types.hpp"

namespace rdmd {

enum class SnapshotFormat { csv, binary };

/// Load by sniffing the `RDMD1` magic; anything else is parsed as CSV.
SnapshotMatrix load_snapshots(const std::string& path);

/// CSV: header `t,s1,...,sn`, then one row per sample, complex entries as `a+bi`.
void save_snapshots_csv(const SnapshotMatrix& data, const std::string& path);

/// Binary: `RDMD1`, u64 m, u64 n, m float64 times, then m*n (re, im) float64
/// pairs row-major; all little-endian.
void save_snapshots_binary(const SnapshotMatrix& data, const std::string& path);

void save_snapshots(const SnapshotMatrix& data, const std::string& path, SnapshotFormat format);

SnapshotMatrix parse_snapshots_csv(std::string_view text);
SnapshotMatrix parse_snapshots_binary(std::string_view bytes);

/// `a+bi` with 17 significant digits, round-trippable through parse_complex.
std::string format_complex(const Complex& z);
Complex parse_complex(std::string_view text);

/// Shortest-safe round-trip formatting of a double (17 significant digits).
std::string format_double(double x);

}  // namespace rdmd
