#include "sln/stats.hpp"

#include <cmath>

#include "sln/errors.hpp"

namespace sln {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog10E = 0.4342944819032518276511289;

// ln|e^a - e^b| with sign, for a = ln of the positive part, b = ln of the
// negative part.
LogValue lse_diff(double lpos, double lneg) {
  if (lpos == -kInf && lneg == -kInf) return {};
  if (lpos == lneg) return {};  // exact cancellation
  if (lpos > lneg) {
    const double l = lpos + std::log1p(-std::exp(lneg - lpos));
    return {l, 1};
  }
  const double l = lneg + std::log1p(-std::exp(lpos - lneg));
  return {l, -1};
}

}  // namespace

LogValue log_value(double log_abs, int sign) {
  if (sign == 0 || log_abs == -kInf) return {};
  return {log_abs, sign > 0 ? 1 : -1};
}

LogValue signed_lse(std::span<const LogValue> terms) {
  double m = -kInf;
  for (const auto& t : terms)
    if (t.sign != 0 && t.log_abs > m) m = t.log_abs;
  if (m == -kInf) return {};
  double sp = 0.0, sn = 0.0;
  for (const auto& t : terms) {
    if (t.sign == 0) continue;
    (t.sign > 0 ? sp : sn) += std::exp(t.log_abs - m);
  }
  const double diff = sp - sn;
  if (diff == 0.0) return {};
  return {m + std::log(std::fabs(diff)), diff > 0 ? 1 : -1};
}

void LogAccumulator::Lse::add(double l) noexcept {
  if (l == -kInf) return;
  if (l <= m) {
    const double y = std::exp(l - m) - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  } else {
    const double scale = std::exp(m - l);  // 0 on the first value (m = -inf)
    s = s * scale + 1.0;
    c *= scale;
    m = l;
  }
}

void LogAccumulator::Lse::merge(const Lse& o) noexcept {
  if (o.s <= 0.0) return;
  if (s <= 0.0) {
    *this = o;
    return;
  }
  if (o.m <= m) {
    s += o.s * std::exp(o.m - m);
  } else {
    s = s * std::exp(m - o.m) + o.s;
    m = o.m;
  }
  c = 0.0;
}

double LogAccumulator::Lse::log() const noexcept {
  return s > 0.0 ? m + std::log(s) : -kInf;
}

LogAccumulator::LogAccumulator(int max_power) : max_power_(max_power) {
  if (max_power < 1 || max_power > 4) throw DomainError("LogAccumulator: max_power must be 1..4");
}

void LogAccumulator::add(LogValue v) noexcept {
  ++n_;
  if (v.sign == 0 || v.log_abs == -kInf) return;
  for (int p = 1; p <= max_power_; ++p) {
    const double lp = static_cast<double>(p) * v.log_abs;
    if (v.sign < 0 && (p & 1)) {
      neg_[p - 1].add(lp);
    } else {
      pos_[p - 1].add(lp);
    }
  }
}

void LogAccumulator::merge(const LogAccumulator& other) {
  if (other.max_power_ != max_power_)
    throw DimensionMismatch("LogAccumulator::merge: differing max_power");
  n_ += other.n_;
  for (int p = 0; p < max_power_; ++p) {
    pos_[p].merge(other.pos_[p]);
    neg_[p].merge(other.neg_[p]);
  }
}

LogValue LogAccumulator::log_sum(int power) const {
  if (power < 1 || power > max_power_) throw DomainError("LogAccumulator::log_sum: bad power");
  return lse_diff(pos_[power - 1].log(), neg_[power - 1].log());
}

LogValue LogAccumulator::log_mean() const {
  if (n_ == 0) throw InsufficientData("LogAccumulator::log_mean: empty");
  LogValue s = log_sum(1);
  if (s.sign == 0) return s;
  s.log_abs -= std::log(static_cast<double>(n_));
  return s;
}

double LogAccumulator::log_var() const {
  if (max_power_ < 2) throw InsufficientData("LogAccumulator::log_var: needs second moments");
  if (n_ < 2) throw InsufficientData("LogAccumulator::log_var: needs n >= 2");
  const LogValue s2 = log_sum(2);
  if (s2.sign == 0) return -kInf;  // every value was zero
  const LogValue s1 = log_sum(1);
  const double logn = std::log(static_cast<double>(n_));
  // Var = S2 (1 - e^{-delta}) / (n-1), delta = ln(n S2 / S1^2) >= 0
  double delta = s1.sign == 0 ? kInf : s2.log_abs + logn - 2.0 * s1.log_abs;
  if (delta < 0.0) delta = 0.0;  // roundoff guard; Cauchy-Schwarz gives >= 0
  const double factor = -std::expm1(-delta);
  if (factor <= 0.0) return -kInf;
  return s2.log_abs - std::log(static_cast<double>(n_ - 1)) + std::log(factor);
}

LogValue LogAccumulator::log_central_moment(int p) const {
  if (p < 2 || p > max_power_) throw DomainError("log_central_moment: power out of range");
  if (n_ == 0) throw InsufficientData("log_central_moment: empty");
  const double logn = std::log(static_cast<double>(n_));
  const LogValue mean = log_mean();
  const double lm = mean.log_abs;
  const int ms = mean.sign;
  auto raw = [&](int q) {
    LogValue v = log_sum(q);
    if (v.sign != 0) v.log_abs -= logn;  // q-th raw moment
    return v;
  };
  LogValue out;
  if (p == 2) {
    const LogValue t[] = {raw(2), {2.0 * lm, ms == 0 ? 0 : -1}};
    out = signed_lse(t);
    if (out.sign < 0) out = {};  // clamp: m2 >= 0
  } else if (p == 3) {
    const LogValue r3 = raw(3), r2 = raw(2);
    const LogValue t[] = {r3,
                          {std::log(3.0) + lm + r2.log_abs, -ms * r2.sign},
                          {std::log(2.0) + 3.0 * lm, ms}};
    out = signed_lse(t);
  } else {
    const LogValue r4 = raw(4), r3 = raw(3), r2 = raw(2);
    const LogValue t[] = {r4,
                          {std::log(4.0) + lm + r3.log_abs, -ms * r3.sign},
                          {std::log(6.0) + 2.0 * lm + r2.log_abs, r2.sign},
                          {std::log(3.0) + 4.0 * lm, ms == 0 ? 0 : -1}};
    out = signed_lse(t);
    if (out.sign < 0) out = {};  // clamp: m4 >= 0
  }
  return out;
}

MeanVar log_mean_var(const LogAccumulator& acc) { return {acc.log_mean(), acc.log_var()}; }

double relative_error(LogValue log_mean, double log_var, std::uint64_t n) {
  if (log_mean.sign == 0) return 100.0;
  if (log_var == -kInf) return 0.0;
  if (n == 0) return 100.0;
  return 100.0 * std::exp(0.5 * log_var - 0.5 * std::log(static_cast<double>(n)) - log_mean.log_abs);
}

double wnrv(double re_percent, double wall_seconds) {
  const double r = re_percent / 100.0;
  return r * r * wall_seconds;
}

double sample_var_of_var(const LogAccumulator& acc) {
  if (acc.max_power() < 4) throw InsufficientData("sample_var_of_var: needs fourth moments");
  const std::uint64_t n = acc.count();
  if (n < 4) throw InsufficientData("sample_var_of_var: needs n >= 4");
  const LogValue m4 = acc.log_central_moment(4);
  const LogValue m2 = acc.log_central_moment(2);
  if (m4.sign == 0 && m2.sign == 0) return -kInf;
  const double nd = static_cast<double>(n);
  const LogValue t[] = {m4, {2.0 * m2.log_abs + std::log((nd - 3.0) / (nd - 1.0)),
                             m2.sign == 0 ? 0 : -1}};
  const LogValue v = signed_lse(t);
  if (v.sign <= 0) return -kInf;  // estimator clamped at zero
  return v.log_abs - std::log(nd);
}

double LogEstimate::log10_mean() const { return log_mean * kLog10E; }

double LogEstimate::estimate() const {
  return sign == 0 ? 0.0 : static_cast<double>(sign) * std::exp(log_mean);
}

LogEstimate make_estimate(const LogAccumulator& acc, double wall_seconds, unsigned flags) {
  LogEstimate e;
  e.n = acc.count();
  e.wall_seconds = wall_seconds;
  e.flags = flags;
  if (e.n == 0) {
    e.flags |= kFlagAllZero;
    e.wnrv = wnrv(e.re_percent, wall_seconds);
    return e;
  }
  const LogValue mean = acc.log_mean();
  if (mean.sign == 0) {
    e.flags |= kFlagAllZero;
    e.re_percent = 100.0;  // zero-sample convention
    e.wnrv = wnrv(e.re_percent, wall_seconds);
    return e;
  }
  e.log_mean = mean.log_abs;
  e.sign = mean.sign;
  const double lv = e.n >= 2 ? acc.log_var() : kInf;
  e.re_percent = e.n >= 2 ? relative_error(mean, lv, e.n) : 100.0;
  e.wnrv = wnrv(e.re_percent, wall_seconds);
  return e;
}

LogEstimate make_estimate_parts(LogValue log_mean, double log_var, std::uint64_t n,
                                double wall_seconds, unsigned flags) {
  LogEstimate e;
  e.n = n;
  e.wall_seconds = wall_seconds;
  e.flags = flags;
  if (log_mean.sign == 0) {
    e.flags |= kFlagAllZero;
    e.wnrv = wnrv(e.re_percent, wall_seconds);
    return e;
  }
  e.log_mean = log_mean.log_abs;
  e.sign = log_mean.sign;
  e.re_percent = relative_error(log_mean, log_var, n);
  e.wnrv = wnrv(e.re_percent, wall_seconds);
  return e;
}

double fit_loglog_slope(std::span<const std::pair<double, double>> points) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int k = 0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) continue;
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++k;
  }
  if (k < 2) throw InsufficientData("fit_loglog_slope: fewer than 2 usable points");
  const double denom = k * sxx - sx * sx;
  if (denom == 0.0) throw InsufficientData("fit_loglog_slope: degenerate abscissae");
  return (k * sxy - sx * sy) / denom;
}

}  // namespace sln
