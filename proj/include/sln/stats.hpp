#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace sln {

// A signed quantity stored as (sign, ln|value|). sign == 0 iff the value is 0,
// in which case log_abs is -inf.
struct LogValue {
  double log_abs = -std::numeric_limits<double>::infinity();
  int sign = 0;
};

LogValue log_value(double log_abs, int sign = 1);

// Signed logsumexp of a small fixed set of terms.
LogValue signed_lse(std::span<const LogValue> terms);

// Streaming power sums of signed values represented in log space.
// Accumulates sum v^p for p = 1..max_power (max_power in {1,2,4}) without
// ever leaving log space; magnitudes down to exp(-2000) and below are exact.
// Merging two accumulators gives the same result as accumulating the
// concatenated stream (up to roundoff), enabling deterministic block merges.
class LogAccumulator {
 public:
  explicit LogAccumulator(int max_power = 2);

  void add(LogValue v) noexcept;
  void add_log(double log_abs, int sign = 1) noexcept { add(log_value(log_abs, sign)); }

  void merge(const LogAccumulator& other);

  std::uint64_t count() const noexcept { return n_; }
  int max_power() const noexcept { return max_power_; }

  // ln|sum v^p| with sign; p <= max_power.
  LogValue log_sum(int power = 1) const;

  // ln|mean| with sign. Throws InsufficientData when empty.
  LogValue log_mean() const;

  // ln of the unbiased sample variance (n-1 divisor); -inf for a constant
  // sample. Requires max_power >= 2 and n >= 2 (InsufficientData otherwise).
  double log_var() const;

  // ln of the p-th central moment m_p = sum (v - mean)^p / n, p in {2,3,4}
  // (p up to max_power). m2, m4 are clamped at 0 from below; m3 is signed.
  LogValue log_central_moment(int p) const;

 private:
  struct Lse {  // streaming logsumexp with Kahan compensation
    double m = -std::numeric_limits<double>::infinity();
    double s = 0.0, c = 0.0;
    void add(double l) noexcept;
    void merge(const Lse& o) noexcept;
    double log() const noexcept;
  };
  int max_power_;
  std::uint64_t n_ = 0;
  Lse pos_[4], neg_[4];  // per power, split by sign
};

struct MeanVar {
  LogValue log_mean;
  double log_var;
};
MeanVar log_mean_var(const LogAccumulator& acc);

// Relative error in percent: 100 * sd(mean estimator) / |mean|.
// A zero mean (no positive mass, or exact cancellation) reports 100.
double relative_error(LogValue log_mean, double log_var, std::uint64_t n);

// Work-normalized relative variance: (RE/100)^2 * wall_seconds.
double wnrv(double re_percent, double wall_seconds);

// ln of the estimated variance of the sample variance S^2_n:
// (m4 - (n-3)/(n-1) m2^2) / n, clamped at 0 from below (-inf when the
// sample is constant). Requires max_power == 4 and n >= 4.
double sample_var_of_var(const LogAccumulator& acc);

enum EstimateFlags : unsigned {
  kFlagAllZero = 1u << 0,          // every replication was exactly zero
  kFlagOptimizerFallback = 1u << 1,  // tilt solver fell back to a safe default
  kFlagNoConvergence = 1u << 2,    // an inner solver hit its iteration cap
  kFlagZeroStrata = 1u << 3,       // some strata received no replications
  kFlagSingleComponent = 1u << 4,  // a mixture collapsed to one component
};

// Final form of every estimator's output.
struct LogEstimate {
  double log_mean = -std::numeric_limits<double>::infinity();  // natural log of |estimate|
  int sign = 0;
  double re_percent = 100.0;
  double wnrv = 0.0;
  std::uint64_t n = 0;
  double wall_seconds = 0.0;
  unsigned flags = 0;

  double log10_mean() const;
  double estimate() const;  // sign * exp(log_mean), 0 when sign == 0
};

LogEstimate make_estimate(const LogAccumulator& acc, double wall_seconds, unsigned flags = 0);
LogEstimate make_estimate_parts(LogValue log_mean, double log_var, std::uint64_t n,
                                double wall_seconds, unsigned flags = 0);

// Least-squares slope of ln(y) against ln(x); pairs with y <= 0 are skipped.
double fit_loglog_slope(std::span<const std::pair<double, double>> points);

}  // namespace sln
