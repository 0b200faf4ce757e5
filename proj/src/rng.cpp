#include "sln/rng.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>

#include "sln/errors.hpp"

namespace sln {

namespace detail {
std::array<std::uint64_t, 64> sobol_directions(std::size_t j);
}

std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 33;
  z *= 0xff51afd7ed558ccdull;
  z ^= z >> 33;
  z *= 0xc4ceb9fe1a85ec53ull;
  z ^= z >> 33;
  return z;
}

double pseudo_uniform(std::uint64_t seed, std::uint64_t index, std::uint32_t coord) noexcept {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ index);
  h = mix64(h ^ (static_cast<std::uint64_t>(coord) + 1) * 0x9e3779b97f4a7c15ull);
  return (static_cast<double>(h >> 11) + 0.5) * 0x1p-53;
}

namespace {

constexpr double kLow = 0x1p-53;
constexpr double kHigh = 1.0 - 0x1p-53;

double clamp_unit(double u) noexcept { return u < kLow ? kLow : (u > kHigh ? kHigh : u); }

std::uint64_t sobol_point(const std::uint64_t* dirs, std::uint64_t index) noexcept {
  std::uint64_t g = index ^ (index >> 1);  // Gray code makes i-th point order-free
  std::uint64_t x = 0;
  while (g) {
    const int k = std::countr_zero(g);
    x ^= dirs[k];
    g &= g - 1;
  }
  return x;
}

}  // namespace

UniformStream::UniformStream(StreamKind k, int dim, std::uint64_t seed)
    : kind_(k), dim_(dim), seed_(seed) {
  if (dim < 1) throw DimensionMismatch("UniformStream: dim must be >= 1");
}

UniformStream UniformStream::make_pseudo(int dim, std::uint64_t seed) {
  return UniformStream(StreamKind::pseudo, dim, seed);
}

UniformStream UniformStream::make_sobol(int dim, std::uint64_t seed) {
  UniformStream s(StreamKind::sobol, dim, seed);
  s.dirs_.resize(static_cast<std::size_t>(dim) * 64);
  s.shift_.resize(static_cast<std::size_t>(dim));
  for (int j = 0; j < dim; ++j) {
    const auto v = detail::sobol_directions(static_cast<std::size_t>(j));
    std::copy(v.begin(), v.end(), s.dirs_.begin() + static_cast<std::size_t>(j) * 64);
    s.shift_[static_cast<std::size_t>(j)] = pseudo_uniform(seed, 0, static_cast<std::uint32_t>(j));
  }
  return s;
}

UniformStream UniformStream::make(StreamKind kind, int dim, std::uint64_t seed) {
  return kind == StreamKind::pseudo ? make_pseudo(dim, seed) : make_sobol(dim, seed);
}

void UniformStream::row(std::uint64_t index, std::span<double> out) const {
  if (kind_ == StreamKind::pseudo) {
    for (int j = 0; j < dim_; ++j)
      out[static_cast<std::size_t>(j)] = pseudo_uniform(seed_, index, static_cast<std::uint32_t>(j));
    return;
  }
  for (int j = 0; j < dim_; ++j) {
    const std::uint64_t x = sobol_point(dirs_.data() + static_cast<std::size_t>(j) * 64, index);
    double u = static_cast<double>(x) * 0x1p-64 + shift_[static_cast<std::size_t>(j)];
    if (u >= 1.0) u -= 1.0;
    out[static_cast<std::size_t>(j)] = clamp_unit(u);
  }
}

void UniformStream::raw_row(std::uint64_t index, std::span<double> out) const {
  if (kind_ == StreamKind::pseudo) {
    row(index, out);
    return;
  }
  for (int j = 0; j < dim_; ++j) {
    const std::uint64_t x = sobol_point(dirs_.data() + static_cast<std::size_t>(j) * 64, index);
    out[static_cast<std::size_t>(j)] = clamp_unit(static_cast<double>(x) * 0x1p-64);
  }
}

void UniformStream::next(std::span<double> out) { row(cursor_++, out); }

UniformStream UniformStream::sub(std::uint64_t tag, int dim) const {
  const std::uint64_t s = mix64(seed_ ^ (tag + 0x243f6a8885a308d3ull) * 0x9e3779b97f4a7c15ull);
  return make(kind_, dim, s);
}

}  // namespace sln
