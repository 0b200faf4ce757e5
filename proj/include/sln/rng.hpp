#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sln {

enum class StreamKind { pseudo, sobol };

namespace detail {
struct SobolTable;
}

// Counter-based uniform source. Both kinds allow O(1) random access to any
// row (a row = one replication's block of `dim` uniforms), which is what
// makes deterministic parallel replication possible: row(i) depends only on
// (seed, i, coordinate), never on call order.
//
//  - pseudo: a counter hash producing doubles in (0,1), never 0 or 1.
//  - sobol:  a 64-bit-precision low-discrepancy sequence with a random shift
//            modulo 1 (derived from the seed), clamped to
//            [2^-53, 1 - 2^-53]. Row i is point i of the shifted sequence.
class UniformStream {
 public:
  static UniformStream make_pseudo(int dim, std::uint64_t seed);
  static UniformStream make_sobol(int dim, std::uint64_t seed);  // DimTooLarge if dim exceeds the table
  static UniformStream make(StreamKind kind, int dim, std::uint64_t seed);

  int dim() const noexcept { return dim_; }
  StreamKind kind() const noexcept { return kind_; }
  std::uint64_t seed() const noexcept { return seed_; }

  // Fill out (size dim) with row `index`. Thread-safe, does not move the cursor.
  void row(std::uint64_t index, std::span<double> out) const;

  // Sobol only: row of the unshifted sequence (diagnostics); pseudo: same as row.
  void raw_row(std::uint64_t index, std::span<double> out) const;

  // Sequential interface: row(cursor), then cursor += 1.
  void next(std::span<double> out);
  std::uint64_t cursor() const noexcept { return cursor_; }
  void seek(std::uint64_t c) noexcept { cursor_ = c; }

  // Statistically independent derived stream (same kind), e.g. one per
  // randomization shift or per pilot phase.
  UniformStream sub(std::uint64_t tag, int dim) const;

  std::span<const double> shift() const noexcept { return shift_; }  // empty for pseudo

 private:
  UniformStream(StreamKind k, int dim, std::uint64_t seed);
  StreamKind kind_;
  int dim_;
  std::uint64_t seed_;
  std::uint64_t cursor_ = 0;
  std::vector<double> shift_;           // sobol: one offset per coordinate
  std::vector<std::uint64_t> dirs_;     // sobol: 64 direction numbers per coordinate
};

inline UniformStream pseudo_stream(std::uint64_t seed, int dim) {
  return UniformStream::make_pseudo(dim, seed);
}
inline UniformStream sobol_stream(int dim, std::uint64_t shift_seed) {
  return UniformStream::make_sobol(dim, shift_seed);
}

// The raw counter hash behind the pseudo stream: uniform in (0,1),
// determined by (seed, index, coord) alone.
double pseudo_uniform(std::uint64_t seed, std::uint64_t index, std::uint32_t coord) noexcept;

std::uint64_t mix64(std::uint64_t z) noexcept;

// Number of dimensions the loaded direction-number table supports.
std::size_t sobol_available_dims();

// Path the table is loaded from: the SLN_SOBOL_DIRECTIONS environment
// variable when set, else the file shipped in data/.
std::string sobol_directions_path();

}  // namespace sln
