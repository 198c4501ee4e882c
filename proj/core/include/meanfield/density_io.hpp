#pragma once

#include <filesystem>
#include <iosfwd>

#include "meanfield/density.hpp"

namespace meanfield {

// Binary layout, all fields little-endian IEEE-754 binary64:
//   n, shape[0..n), box_lo[0..n), box_hi[0..n), values[cells] (row-major,
//   last axis fastest).
void write_binary(const GridDensity& mu, std::ostream& out);
GridDensity read_binary(std::istream& in);
void write_binary(const GridDensity& mu, const std::filesystem::path& path);
GridDensity read_binary(const std::filesystem::path& path);

/// One row per cell: x0,...,x{n-1},value
void write_csv(const GridDensity& mu, std::ostream& out);

}  // namespace meanfield
