#include "meanfield/density_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "meanfield/error.hpp"

namespace meanfield {

namespace {

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double get_f64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    throw Error(ErrorCode::kIo, "truncated density file");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

int get_count(std::istream& in, const char* what) {
  const double v = get_f64(in);
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e9) {
    throw Error(ErrorCode::kIo, std::string("invalid ") + what + " in density file");
  }
  return static_cast<int>(v);
}

}  // namespace

void write_binary(const GridDensity& mu, std::ostream& out) {
  const Grid& grid = mu.grid();
  put_f64(out, grid.dim());
  for (const Axis& a : grid.axes()) put_f64(out, a.size);
  for (const Axis& a : grid.axes()) put_f64(out, a.lo);
  for (const Axis& a : grid.axes()) put_f64(out, a.hi);
  for (double v : mu.values()) put_f64(out, v);
  if (!out) throw Error(ErrorCode::kIo, "failed writing density");
}

GridDensity read_binary(std::istream& in) {
  const int n = get_count(in, "dimension");
  std::vector<Axis> axes(static_cast<std::size_t>(n));
  for (Axis& a : axes) a.size = get_count(in, "shape");
  for (Axis& a : axes) a.lo = get_f64(in);
  for (Axis& a : axes) a.hi = get_f64(in);
  auto grid = Grid::make(std::move(axes));
  std::vector<double> values(grid->cells());
  for (double& v : values) v = get_f64(in);
  return GridDensity::from_normalized(std::move(grid), std::move(values));
}

void write_binary(const GridDensity& mu, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_binary(mu, out);
}

GridDensity read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return read_binary(in);
}

void write_csv(const GridDensity& mu, std::ostream& out) {
  const Grid& grid = mu.grid();
  for (int k = 0; k < grid.dim(); ++k) out << 'x' << k << ',';
  out << "value\n";
  out << std::setprecision(17);
  const auto v = mu.values();
  for (std::size_t i = 0; i < grid.cells(); ++i) {
    for (int k = 0; k < grid.dim(); ++k) out << grid.coord(i, k) << ',';
    out << v[i] << '\n';
  }
}

}  // namespace meanfield
