#include <array>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sln/config.hpp"
#include "sln/errors.hpp"
#include "sln/rng.hpp"

namespace sln {
namespace detail {

// One row of the direction-number file: primitive-polynomial degree s,
// interior coefficient bits a, and the first s initial values m_i.
struct SobolRow {
  std::uint32_t s = 0;
  std::uint32_t a = 0;
  std::array<std::uint32_t, 24> m{};
};

struct SobolTable {
  std::vector<SobolRow> rows;  // rows[j] describes dimension j + 2
  static const SobolTable& instance();
};

namespace {

SobolTable load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SobolError("cannot open direction-number file: " + path);
  SobolTable t;
  std::string line;
  if (!std::getline(in, line)) throw SobolError("empty direction-number file: " + path);
  std::uint64_t expect_d = 2;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::uint64_t d;
    SobolRow row;
    if (!(ls >> d >> row.s >> row.a)) throw SobolError("malformed direction-number row: " + line);
    if (d != expect_d) throw SobolError("direction-number rows out of order at d=" + std::to_string(d));
    if (row.s == 0 || row.s > row.m.size())
      throw SobolError("unsupported polynomial degree in direction-number file");
    for (std::uint32_t i = 0; i < row.s; ++i) {
      if (!(ls >> row.m[i])) throw SobolError("short direction-number row: " + line);
      if (row.m[i] % 2 == 0 || row.m[i] >= (1u << (i + 1)))
        throw SobolError("invalid initial value in direction-number row: " + line);
    }
    t.rows.push_back(row);
    ++expect_d;
  }
  if (t.rows.empty()) throw SobolError("no rows in direction-number file: " + path);
  return t;
}

}  // namespace

const SobolTable& SobolTable::instance() {
  static SobolTable table = load_table(sobol_directions_path());
  return table;
}

// 64 direction numbers for 0-based coordinate j (coordinate 0 is the radical
// inverse; the rest follow the primitive-polynomial recurrence).
std::array<std::uint64_t, 64> sobol_directions(std::size_t j) {
  std::array<std::uint64_t, 64> v{};
  if (j == 0) {
    for (int k = 0; k < 64; ++k) v[k] = 1ull << (63 - k);
    return v;
  }
  const SobolTable& t = SobolTable::instance();
  if (j - 1 >= t.rows.size()) throw DimTooLarge("low-discrepancy dimension exceeds table");
  const SobolRow& row = t.rows[j - 1];
  const int s = static_cast<int>(row.s);
  for (int k = 0; k < s && k < 64; ++k) v[k] = static_cast<std::uint64_t>(row.m[k]) << (63 - k);
  for (int i = s; i < 64; ++i) {
    std::uint64_t x = v[i - s] ^ (v[i - s] >> s);
    for (int k = 1; k <= s - 1; ++k)
      if ((row.a >> (s - 1 - k)) & 1u) x ^= v[i - k];
    v[i] = x;
  }
  return v;
}

std::size_t sobol_table_dims() { return SobolTable::instance().rows.size() + 1; }

}  // namespace detail

std::string sobol_directions_path() {
  if (const char* env = std::getenv("SLN_SOBOL_DIRECTIONS"); env && *env) return env;
  return kDefaultSobolDirectionsPath;
}

std::size_t sobol_available_dims() { return detail::sobol_table_dims(); }

}  // namespace sln
