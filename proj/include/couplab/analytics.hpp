#pragma once

// Closed-form laws (vertical hitting tails, sech densities, success
// probabilities), empirical estimators (survival curves, histograms, total
// variation witnesses), and the statistics used to compare them (KS tests,
// standard errors, log-linear fits). Everything here is a pure function of
// immutable sample arrays.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "couplab/geometry.hpp"

namespace couplab {

// ---- Closed forms --------------------------------------------------------

// Density of the Levy area z_t of planar BM from the origin: (1/t) sech(pi z / t).
inline double levy_area_density(double t, double z) {
  return 1.0 / (t * std::cosh(kPi * z / t));
}

// CDF of the same law: 1/2 + (2/pi) arctan(tanh(pi z / (2t))).
inline double levy_area_cdf(double t, double z) {
  return 0.5 + (2.0 / kPi) * std::atan(std::tanh(0.5 * kPi * z / t));
}

// P(sigma_a > t) for the Heisenberg vertical coupling from the origin.
inline double heisenberg_tail_exact(double a, double t) {
  if (!(a > 0.0) || !(t > 0.0)) throw std::invalid_argument("heisenberg_tail_exact: need a>0, t>0");
  return (4.0 / kPi) * std::atan(std::tanh(0.5 * kPi * a / t));
}

// Large-t bracket 2a/t - (pi^2/3)(a/t)^3 < P(sigma_a > t) < 2a/t.
inline std::pair<double, double> heisenberg_tail_bounds(double a, double t) {
  double q = a / t;
  return {2.0 * q - (kPi * kPi / 3.0) * q * q * q, 2.0 * q};
}

// Probability that the hyperbolic mirror coupling ever succeeds, half-separation r.
inline double hyperbolic_success_prob(double r) {
  return 1.0 - (4.0 / kPi) * std::atan(std::tanh(0.5 * r));
}

// Asymptotic total variation floor for base half-separation r; complements the above.
inline double horizontal_tv_limit_sl2(double r) {
  return (4.0 / kPi) * std::atan(std::tanh(0.5 * r));
}

// Upper bound 2a/(alpha_n t) on the non-isotropic vertical coupling tail.
inline double nonisotropic_tail_bound(const std::vector<double>& weights, double a, double t) {
  if (weights.empty()) throw std::invalid_argument("nonisotropic_tail_bound: empty weights");
  return 2.0 * a / (weights.back() * t);
}

// Standard normal CDF. erfc is monotone and accurate to well below 1e-7.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// ---- Non-isotropic sech convolution --------------------------------------

// Density of z_t = sum alpha_i z^i_t as an n-fold convolution of scaled sech
// laws, tabulated on a uniform grid. The grid spacing is min(alpha) t / 200
// and the extent covers every factor down to 1e-12, so truncation and
// quadrature errors are far below the comparison tolerances.
class NonisotropicDensity {
 public:
  NonisotropicDensity(std::vector<double> weights, double t)
      : weights_(std::move(weights)), t_(t) {
    if (weights_.empty() || !(t > 0.0))
      throw std::invalid_argument("NonisotropicDensity: need weights and t>0");
    double extent = 0.0;
    for (double a : weights_) extent += (a * t_ / kPi) * std::log(2.0e12 / (a * t_) + 2.0);
    h_ = weights_.front() * t_ / 200.0;
    n_ = 2 * static_cast<std::size_t>(std::ceil(extent / h_)) + 1;
    z0_ = -h_ * static_cast<double>(n_ / 2);
    pdf_.assign(n_, 0.0);
    for (std::size_t k = 0; k < n_; ++k) pdf_[k] = factor(0, z0_ + h_ * k);
    std::vector<double> next(n_);
    for (std::size_t i = 1; i < weights_.size(); ++i) {
      for (std::size_t k = 0; k < n_; ++k) {
        double z = z0_ + h_ * k;
        double acc = 0.0;
        for (std::size_t j = 0; j < n_; ++j) acc += pdf_[j] * factor(i, z - (z0_ + h_ * j));
        next[k] = acc * h_;
      }
      pdf_.swap(next);
    }
    cdf_.assign(n_, 0.0);
    for (std::size_t k = 1; k < n_; ++k)
      cdf_[k] = cdf_[k - 1] + 0.5 * h_ * (pdf_[k - 1] + pdf_[k]);
  }

  // Pointwise density. For n >= 2 this is one exact convolution against the
  // tabulated (n-1)-fold grid, so off-grid points are not interpolated.
  double pdf(double z) const {
    if (weights_.size() == 1) return factor(0, z);
    // convolve the tabulated first n-1 factors with the analytic last factor
    double acc = 0.0;
    std::size_t last = weights_.size() - 1;
    if (weights_.size() == 2) {
      for (std::size_t j = 0; j < n_; ++j) acc += factor(0, z0_ + h_ * j) * factor(last, z - (z0_ + h_ * j));
      return acc * h_;
    }
    // n >= 3: pdf_ already includes the last factor; fall back to interpolation
    return interp(pdf_, z);
  }

  double cdf(double z) const {
    if (weights_.size() == 1) return 0.5 + (1.0 / kPi) * std::atan(std::sinh(kPi * z / (weights_[0] * t_)));
    if (z <= z0_) return 0.0;
    if (z >= z0_ + h_ * (n_ - 1)) return 1.0;
    return interp(cdf_, z);
  }

  double max_pdf() const { return *std::max_element(pdf_.begin(), pdf_.end()); }
  double total_mass() const { return cdf_.back(); }
  double grid_spacing() const { return h_; }

 private:
  double factor(std::size_t i, double z) const {
    double s = weights_[i] * t_;
    return 1.0 / (s * std::cosh(kPi * z / s));
  }
  double interp(const std::vector<double>& v, double z) const {
    double u = (z - z0_) / h_;
    if (u <= 0.0) return v.front();
    if (u >= static_cast<double>(n_ - 1)) return v.back();
    std::size_t k = static_cast<std::size_t>(u);
    double frac = u - static_cast<double>(k);
    return v[k] * (1.0 - frac) + v[k + 1] * frac;
  }

  std::vector<double> weights_;
  double t_, h_, z0_;
  std::size_t n_ = 0;
  std::vector<double> pdf_, cdf_;
};

inline double nonisotropic_density(const std::vector<double>& weights, double t, double z) {
  if (weights.size() == 1) return 1.0 / (weights[0] * t * std::cosh(kPi * z / (weights[0] * t)));
  NonisotropicDensity d(weights, t);
  return d.pdf(z);
}

// ---- Empirical estimators ------------------------------------------------

struct TailCurve {
  std::vector<double> t_grid;
  std::vector<double> survival;
  std::vector<double> stderr_;
  std::size_t n_samples = 0;
  std::size_t n_truncated = 0;
};

// Survival estimates from hitting times with right censoring at the horizon.
// A censored sample counts as surviving at every grid point (grid must not
// exceed the horizon, otherwise censoring would bias the estimate).
inline TailCurve empirical_tail(const std::vector<double>& times, const std::vector<char>& hit,
                                double horizon, const std::vector<double>& t_grid) {
  if (times.size() != hit.size()) throw std::invalid_argument("empirical_tail: size mismatch");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("empirical_tail: grid not increasing");
  if (!t_grid.empty() && t_grid.back() > horizon + 1e-12)
    throw std::invalid_argument("empirical_tail: grid beyond horizon");
  TailCurve c;
  c.t_grid = t_grid;
  c.n_samples = times.size();
  std::size_t n = times.size();
  for (std::size_t i = 0; i < n; ++i)
    if (!hit[i]) ++c.n_truncated;
  for (double t : t_grid) {
    std::size_t surv = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (!hit[i] || times[i] > t) ++surv;
    double p = n ? static_cast<double>(surv) / n : 0.0;
    c.survival.push_back(p);
    c.stderr_.push_back(n ? std::sqrt(p * (1.0 - p) / n) : 0.0);
  }
  return c;
}

struct DensityEstimate {
  std::vector<double> edges;    // bin edges, size nbins+1
  std::vector<std::size_t> counts;
  std::vector<double> heights;  // counts / (n * width)
  std::size_t n = 0, n_out_of_range = 0;
};

inline DensityEstimate make_histogram(const std::vector<double>& samples, double lo, double hi,
                                      std::size_t nbins) {
  if (!(hi > lo) || nbins == 0) throw std::invalid_argument("make_histogram: bad range");
  DensityEstimate d;
  d.n = samples.size();
  d.counts.assign(nbins, 0);
  double w = (hi - lo) / nbins;
  for (std::size_t k = 0; k <= nbins; ++k) d.edges.push_back(lo + w * k);
  for (double x : samples) {
    if (x < lo || x >= hi) {
      ++d.n_out_of_range;
      continue;
    }
    std::size_t k = static_cast<std::size_t>((x - lo) / w);
    if (k >= nbins) k = nbins - 1;
    ++d.counts[k];
  }
  for (std::size_t k = 0; k < nbins; ++k)
    d.heights.push_back(d.n ? d.counts[k] / (static_cast<double>(d.n) * w) : 0.0);
  return d;
}

// ---- Kolmogorov-Smirnov --------------------------------------------------

// One-sample KS distance against a cdf callable; sorts a copy of the input.
template <typename Cdf>
double ks_distance(std::vector<double> samples, Cdf&& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::sort(samples.begin(), samples.end());
  double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double f = cdf(samples[i]);
    d = std::max(d, std::max(f - i / n, (i + 1) / n - f));
  }
  return d;
}

// Asymptotic Kolmogorov survival Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0, sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-16) break;
  }
  return std::min(1.0, std::max(0.0, 2.0 * sum));
}

// One-sample p-value with Stephens' finite-n correction; requires n >= 1e3.
inline double ks_pvalue(double d, std::size_t n) {
  if (n < 1000) throw std::invalid_argument("ks_pvalue: n >= 1000 required for the asymptotic law");
  double sn = std::sqrt(static_cast<double>(n));
  return kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
}

struct KsResult {
  double distance = 0.0;
  double pvalue = 1.0;
};

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(i / na - j / nb));
  }
  double ne = na * nb / (na + nb);
  double sn = std::sqrt(ne);
  return {d, kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)};
}

// ---- Total variation witness ---------------------------------------------

// Membership in the witness set U: the half-space {z < a} for a Line fiber,
// the open semicircle (a - 2pi, a) for a Circle fiber. For the spherical
// total space this coincides with the hemisphere containing the origin, see
// the R4 overload below.
inline bool tv_witness_member(const SpaceSpec& spec, double a, double z) {
  if (spec.fiber == Fiber::Line) return z < a;
  double w = wrap_fiber(spec, z - a);  // in (-2pi, 2pi]
  return w > -kTwoPi && w < 0.0;
}

inline bool tv_witness_member_r4(double a, const R4Point& p) {
  return hemisphere_sign(a, p) > 0;
}

struct WitnessEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

// P(B_t in U) - P(B~_t in U) estimated from the two marginal sample sets.
inline WitnessEstimate empirical_tv_witness(const std::vector<double>& z, const std::vector<double>& z_tilde,
                                            const SpaceSpec& spec, double a) {
  if (z.empty() || z_tilde.empty()) throw std::invalid_argument("empirical_tv_witness: empty sample");
  double p1 = 0.0, p2 = 0.0;
  for (double v : z) p1 += tv_witness_member(spec, a, v) ? 1.0 : 0.0;
  for (double v : z_tilde) p2 += tv_witness_member(spec, a, v) ? 1.0 : 0.0;
  p1 /= static_cast<double>(z.size());
  p2 /= static_cast<double>(z_tilde.size());
  double se = std::sqrt(p1 * (1.0 - p1) / z.size() + p2 * (1.0 - p2) / z_tilde.size());
  return {p1 - p2, se};
}

// ---- Reflection principle ------------------------------------------------

// Membership in S+, the region beyond the barrier: {z >= a} for a Line fiber,
// the semicircle on the far side of the level set {a, a - 2pi} for a Circle
// fiber. P(sigma_a > t) = 1 - 2 P(z_t in S+) by the reflection principle for
// the time-changed vertical motion.
inline bool s_plus_member(const SpaceSpec& spec, double a, double z) {
  if (spec.fiber == Fiber::Line) return z >= a;
  return wrap_fiber(spec, z - a) > 0.0;
}

struct ReflectionCheck {
  double tail = 0.0;              // empirical P(sigma_a > t)
  double reflection_value = 0.0;  // 1 - 2 P(z_t in S+)
  double discrepancy = 0.0;
  double combined_se = 0.0;
};

// Matched-seed check of the reflection identity: survived[i] says whether
// path i still has sigma_a > t, z_at_t[i] is the same path's z_t.
inline ReflectionCheck reflection_principle_check(const SpaceSpec& spec, double a,
                                                  const std::vector<char>& survived,
                                                  const std::vector<double>& z_at_t) {
  if (survived.size() != z_at_t.size() || survived.empty())
    throw std::invalid_argument("reflection_principle_check: size mismatch");
  double n = static_cast<double>(survived.size());
  double tail = 0.0, plus = 0.0;
  for (std::size_t i = 0; i < survived.size(); ++i) {
    if (survived[i]) tail += 1.0;
    if (s_plus_member(spec, a, z_at_t[i])) plus += 1.0;
  }
  tail /= n;
  plus /= n;
  ReflectionCheck res;
  res.tail = tail;
  res.reflection_value = 1.0 - 2.0 * plus;
  res.discrepancy = res.tail - res.reflection_value;
  res.combined_se = std::sqrt(tail * (1.0 - tail) / n + 4.0 * plus * (1.0 - plus) / n);
  return res;
}

// ---- CLT check -----------------------------------------------------------

struct CltResult {
  double ks = 0.0;
  bool domination_ok = true;   // empirical F_t(x) >= Phi(x) - 3 SE on x in [0,2]
  double worst_margin = 0.0;   // min over the x grid of F_hat(x) - (Phi(x) - 3 SE)
};

inline CltResult clt_check_sl2(std::vector<double> z_samples, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("clt_check_sl2: t > 0 required");
  double s = std::sqrt(t);
  for (double& v : z_samples) v /= s;
  CltResult res;
  res.ks = ks_distance(z_samples, [](double x) { return normal_cdf(x); });
  std::sort(z_samples.begin(), z_samples.end());
  double n = static_cast<double>(z_samples.size());
  res.worst_margin = 1e300;
  for (int k = 0; k <= 40; ++k) {
    double x = 0.05 * k;
    double fhat = static_cast<double>(std::upper_bound(z_samples.begin(), z_samples.end(), x) -
                                      z_samples.begin()) / n;
    double phi = normal_cdf(x);
    double se = std::sqrt(phi * (1.0 - phi) / n);
    double margin = fhat - (phi - 3.0 * se);
    res.worst_margin = std::min(res.worst_margin, margin);
  }
  res.domination_ok = res.worst_margin >= 0.0;
  return res;
}

// ---- Rate fits -----------------------------------------------------------

struct FitResult {
  double prefactor = 0.0;  // C
  double rate = 0.0;       // c (decay rate for exp fits, exponent for power fits)
  double r2 = 0.0;
  double t_lo = 0.0, t_hi = 0.0;
  std::size_t n_points = 0;
};

namespace detail {

inline FitResult line_fit(const std::vector<double>& x, const std::vector<double>& y) {
  FitResult f;
  f.n_points = x.size();
  if (x.size() < 2) return f;
  double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i]; sy += y[i]; sxx += x[i] * x[i]; sxy += x[i] * y[i]; syy += y[i] * y[i];
  }
  double vx = sxx - sx * sx / n;
  double vy = syy - sy * sy / n;
  double cxy = sxy - sx * sy / n;
  if (vx <= 0.0) return f;
  double slope = cxy / vx;
  double intercept = (sy - slope * sx) / n;
  f.prefactor = std::exp(intercept);
  f.rate = slope;
  f.r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
  return f;
}

// Collect (transform(t), log survival) over the window, dropping points whose
// survival is below 10/N (resolution floor of the estimator).
template <typename Tf>
FitResult windowed_log_fit(const TailCurve& curve, double t_lo, double t_hi, Tf&& transform) {
  std::vector<double> xs, ys;
  double floor_p = curve.n_samples ? 10.0 / static_cast<double>(curve.n_samples) : 0.0;
  for (std::size_t i = 0; i < curve.t_grid.size(); ++i) {
    double t = curve.t_grid[i], p = curve.survival[i];
    if (t < t_lo || t > t_hi || p < floor_p || p <= 0.0) continue;
    xs.push_back(transform(t));
    ys.push_back(std::log(p));
  }
  FitResult f = line_fit(xs, ys);
  f.t_lo = t_lo;
  f.t_hi = t_hi;
  return f;
}

}  // namespace detail

// Fit survival ~ C e^{-c t}; rate is c > 0 for decaying curves.
inline FitResult exp_rate_fit(const TailCurve& curve, double t_lo, double t_hi) {
  FitResult f = detail::windowed_log_fit(curve, t_lo, t_hi, [](double t) { return t; });
  f.rate = -f.rate;
  return f;
}

// Fit survival ~ C t^p on a log-log scale; rate is the exponent p.
inline FitResult power_fit(const TailCurve& curve, double t_lo, double t_hi) {
  return detail::windowed_log_fit(curve, t_lo, t_hi, [](double t) { return std::log(t); });
}

inline double binomial_se(double p, std::size_t n) {
  return n ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0;
}

// ---- Vertical gradient estimator -----------------------------------------

// Bounded test functions for the gradient bound |grad_v P_t f| <= ||f||_inf / t.
enum class TestFunctionId { Constant, IndicatorBelow, SignShifted, CosZ, RadialBump };

struct TestFunction {
  TestFunctionId id;
  double param = 0.0;  // threshold / shift, unused for some ids
  double osc = 1.0;    // oscillation sup f - inf f; the coupled quotient is <= osc / t
  const char* name = "";

  double operator()(const TotalPoint& p) const {
    switch (id) {
      case TestFunctionId::Constant: return 1.0;
      case TestFunctionId::IndicatorBelow: return p.z < param ? 1.0 : 0.0;
      case TestFunctionId::SignShifted: return p.z > param ? 1.0 : (p.z < param ? -1.0 : 0.0);
      case TestFunctionId::CosZ: return std::cos(p.z);
      case TestFunctionId::RadialBump: return std::exp(-p.base.r * p.base.r);
    }
    return 0.0;
  }
};

// Bound carried per function: the coupled quotient satisfies
// |P_t f(2a) - P_t f(0)| / 2a <= osc(f) P(sigma_a > t) / 2a <= osc(f) / t.
// For {0,1}-valued f this is the 1/t bound, and the indicator saturates it.
inline std::vector<TestFunction> test_function_catalog(double a) {
  return {
      {TestFunctionId::Constant, 0.0, 0.0, "constant"},
      {TestFunctionId::IndicatorBelow, a, 1.0, "indicator_z_below_a"},
      {TestFunctionId::SignShifted, 0.5, 2.0, "sign_z_minus_half"},
      {TestFunctionId::CosZ, 0.0, 2.0, "cos_z"},
      {TestFunctionId::RadialBump, 0.0, 1.0, "radial_bump"},
  };
}

struct GradientEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

// Coupled difference quotient |E f(B~_t) - E f(B_t)| / (2a). The summands
// vanish on coupled paths, which is the variance reduction that makes the
// bound checkable at MC accuracy.
inline GradientEstimate gradient_difference_quotient(const std::vector<TotalPoint>& primary,
                                                     const std::vector<TotalPoint>& partner,
                                                     const TestFunction& f, double two_a) {
  if (primary.size() != partner.size() || primary.empty() || !(two_a > 0.0))
    throw std::invalid_argument("gradient_difference_quotient: bad input");
  double n = static_cast<double>(primary.size());
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < primary.size(); ++i) {
    double d = f(partner[i]) - f(primary[i]);
    sum += d;
    sumsq += d * d;
  }
  double mean = sum / n;
  double var = std::max(0.0, sumsq / n - mean * mean);
  return {std::fabs(mean) / two_a, std::sqrt(var / n) / two_a};
}

}  // namespace couplab
