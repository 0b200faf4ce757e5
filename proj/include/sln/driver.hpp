#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "sln/rng.hpp"
#include "sln/stats.hpp"

namespace sln {

// How replications are executed. Results are identical for any thread count
// and for parallel vs serial: work is cut into fixed-size blocks, each block
// is accumulated sequentially, and block accumulators are merged in index
// order. The serial path uses the same blocking.
struct ExecPolicy {
  bool parallel = true;
  std::uint64_t block = 8192;
  int max_power = 2;
};

// A replication kernel: consumes one row of uniforms, returns one signed
// log-space sample. Estimators consume randomness only through this shape,
// so pseudo and low-discrepancy streams are interchangeable.
using KernelFn = std::function<LogValue(std::span<const double>)>;

template <class K>
LogAccumulator run_replications(const K& kernel, const UniformStream& stream,
                                std::uint64_t first, std::uint64_t n,
                                const ExecPolicy& pol = {}) {
  const int dim = stream.dim();
  const std::uint64_t bsz = pol.block ? pol.block : 8192;
  const std::uint64_t nblocks = n ? (n + bsz - 1) / bsz : 0;
  std::vector<LogAccumulator> parts(nblocks, LogAccumulator(pol.max_power));
  auto do_block = [&](std::uint64_t b) {
    LogAccumulator acc(pol.max_power);
    std::vector<double> u(static_cast<std::size_t>(dim));
    const std::uint64_t lo = first + b * bsz;
    const std::uint64_t hi = std::min(first + n, lo + bsz);
    for (std::uint64_t i = lo; i < hi; ++i) {
      stream.row(i, u);
      acc.add(kernel(std::span<const double>(u.data(), u.size())));
    }
    parts[b] = std::move(acc);
  };
  if (pol.parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(nblocks); ++b)
      do_block(static_cast<std::uint64_t>(b));
  } else {
    for (std::uint64_t b = 0; b < nblocks; ++b) do_block(b);
  }
  LogAccumulator total(pol.max_power);
  for (const auto& p : parts) total.merge(p);
  return total;
}

// n replications starting at the stream cursor (cursor advances by n);
// wall time measured inside.
LogEstimate run_estimate(const KernelFn& kernel, UniformStream& stream, std::uint64_t n,
                         const ExecPolicy& pol = {}, unsigned flags = 0);

// Randomized-sequence estimate: `shifts` independent randomizations of the
// given stream kind, n points each. The estimate is the average of the
// per-shift means; the error comes from their spread (unbiased, any kind).
LogEstimate rqmc_estimate(const KernelFn& kernel, int dim, StreamKind kind, int shifts,
                          std::uint64_t n, std::uint64_t seed, const ExecPolicy& pol = {});

// (n, RE%) pairs for a grid of sample sizes, each measured as in rqmc_estimate.
std::vector<std::pair<double, double>> convergence_points(
    const KernelFn& kernel, int dim, StreamKind kind, std::span<const std::uint64_t> n_grid,
    int shifts, std::uint64_t seed, const ExecPolicy& pol = {});

// Convenience: fit_loglog_slope(convergence_points(...)).
double convergence_slope(const KernelFn& kernel, int dim, StreamKind kind,
                         std::span<const std::uint64_t> n_grid, int shifts, std::uint64_t seed,
                         const ExecPolicy& pol = {});

}  // namespace sln
