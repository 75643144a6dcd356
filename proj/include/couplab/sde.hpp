#pragma once

// Numerical simulation of the base Brownian motion on each space form and of
// the vertical (stochastic area) coordinate, with deterministic per-path
// random streams and bridge-corrected first passage detection.
//
// Three schemes:
//   PolarEM          Euler-Maruyama on the polar SDEs; vertical increment
//                    coefficient(r) dW2. Falls back to the embedded step near
//                    coordinate singularities (r < r_min, and r > pi - r_min
//                    on the sphere).
//   EmbeddedGeodesic tangent Gaussian step + geodesic exponential in the
//                    embedded model; vertical increment = signed area of the
//                    swept geodesic triangle. Default: no coordinate
//                    singularities anywhere.
//   BesselClock      base as in EmbeddedGeodesic, but the vertical coordinate
//                    uses the decoupled representation z_t = z_0 + W_{S(t)}
//                    with an independent driver, which is exactly Brownian in
//                    the clock S. Preferred for long-horizon hitting runs.
//
// The clock S(t) = integral of area_rate(r_s) ds is accumulated with the
// midpoint rule in r per step.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "couplab/geometry.hpp"
#include "couplab/rng.hpp"

namespace couplab {

enum class Scheme { PolarEM, EmbeddedGeodesic, BesselClock };

struct PathConfig {
  double dt = 1e-3;
  double horizon = 10.0;
  std::uint64_t seed = 1;
  Scheme scheme = Scheme::EmbeddedGeodesic;
  bool bridge_correction = true;
  double r_min = 1e-3;

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("PathConfig: dt > 0 required");
    if (!(horizon >= dt)) throw std::invalid_argument("PathConfig: horizon >= dt required");
    if (!(r_min > 0.0 && r_min <= 0.1)) throw std::invalid_argument("PathConfig: r_min in (0, 0.1]");
  }
};

// Channel layout within a path's stream family.
namespace chan {
inline constexpr std::uint64_t radial = 0;
inline constexpr std::uint64_t angular = 1;
inline constexpr std::uint64_t vertical = 2;  // BesselClock driver
inline constexpr std::uint64_t bridge = 3;    // uniforms for bridge crossing decisions
inline constexpr std::uint64_t aux = 4;       // degenerate-axis draws etc.
inline constexpr std::uint64_t factor0 = 8;   // non-isotropic factor i uses factor0 + 2 i (+1)
}  // namespace chan

struct Trajectory {
  std::vector<double> times;
  std::vector<BasePoint> base;
  std::vector<double> z;      // wrapped for Circle fiber
  std::vector<double> clock;  // S(t), clock[0] = 0
};

struct HittingRecord {
  bool hit = false;
  double time = 0.0;  // horizon sentinel when hit = false
  std::size_t crossing_index = 0;
  double sub_step_fraction = 0.0;
};

namespace detail {

inline double polar_drift(const SpaceSpec& spec, double r) {
  switch (spec.base) {
    case Base::Euclidean: return 0.5 / r;
    case Base::Hyperbolic: return 0.5 / std::tanh(r);
    case Base::Spherical: return 0.5 / std::tan(r);
  }
  return 0.0;
}

inline double metric_coefficient(const SpaceSpec& spec, double r) {
  switch (spec.base) {
    case Base::Euclidean: return r;
    case Base::Hyperbolic: return std::sinh(r);
    case Base::Spherical: return std::sin(r);
  }
  return 0.0;
}

}  // namespace detail

// Geodesic step in the embedded model: move by the tangent vector
// dW1 * t_r + dW2 * t_theta and follow the geodesic. Defined everywhere,
// including r = 0 and the sphere poles (the frame there depends on the stored
// theta but the increment law is rotation invariant).
inline BasePoint embedded_step(const SpaceSpec& spec, const BasePoint& p, double dW1, double dW2) {
  double ct = std::cos(p.theta), st = std::sin(p.theta);
  switch (spec.base) {
    case Base::Euclidean: {
      std::array<double, 3> e{p.e[0] + dW1 * ct - dW2 * st, p.e[1] + dW1 * st + dW2 * ct, 0.0};
      return base_from_embedded(spec, e, p.theta);
    }
    case Base::Spherical: {
      std::array<double, 3> tr{std::cos(p.r) * ct, std::cos(p.r) * st, -std::sin(p.r)};
      std::array<double, 3> tt{-st, ct, 0.0};
      double norm = std::hypot(dW1, dW2);
      std::array<double, 3> e = p.e;
      if (norm > 0.0) {
        double c = std::cos(norm), s = std::sin(norm) / norm;
        for (int i = 0; i < 3; ++i) e[i] = c * p.e[i] + s * (dW1 * tr[i] + dW2 * tt[i]);
        double inv = 1.0 / std::sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
        for (auto& v : e) v *= inv;
      }
      return base_from_embedded(spec, e, p.theta);
    }
    case Base::Hyperbolic: {
      if (p.r > kHypEmbeddedRMax) {
        // Far from the origin the hyperboloid renormalization loses all
        // precision (cosh^2 r approaches 1/eps near r ~ 18), so evaluate the
        // same exact geodesic step intrinsically. With step length l and
        // direction angle psi from the outward radial,
        //   cosh r' = cosh r cosh l + sinh r sinh l cos psi
        //           = e^r (A + e^{-2r} B) / 2,
        //   A = cosh l + sinh l cos psi,  B = cosh l - sinh l cos psi,
        // both positive, and r' = arcosh is taken in log form. The turning
        // angle follows from the law of sines, sin dtheta = sinh l sin psi /
        // sinh r'; it is exponentially small here so asin is safe.
        double l = std::hypot(dW1, dW2);
        if (l == 0.0) return p;
        double cpsi = dW1 / l, spsi = dW2 / l;
        double chl = std::cosh(l), shl = std::sinh(l);
        double A = chl + shl * cpsi;
        double B = chl - shl * cpsi;
        double s = p.r + std::log(A + std::exp(-2.0 * p.r) * B);  // log(2 cosh r')
        double r_new =
            s - kLn2 + std::log1p(std::sqrt(std::max(0.0, 1.0 - 4.0 * std::exp(-2.0 * s))));
        double sh_new = std::sinh(r_new);
        double dtheta = std::isfinite(sh_new)
                            ? std::asin(std::max(-1.0, std::min(1.0, shl * spsi / sh_new)))
                            : 0.0;
        return make_base_point(spec, r_new, p.theta + dtheta);
      }
      std::array<double, 3> tr{std::cosh(p.r) * ct, std::cosh(p.r) * st, std::sinh(p.r)};
      std::array<double, 3> tt{-st, ct, 0.0};
      double norm = std::hypot(dW1, dW2);
      std::array<double, 3> e = p.e;
      if (norm > 0.0) {
        double c = std::cosh(norm), s = std::sinh(norm) / norm;
        for (int i = 0; i < 3; ++i) e[i] = c * p.e[i] + s * (dW1 * tr[i] + dW2 * tt[i]);
        double q = e[2] * e[2] - e[0] * e[0] - e[1] * e[1];
        double inv = 1.0 / std::sqrt(std::max(1e-300, q));
        for (auto& v : e) v *= inv;
      }
      return base_from_embedded(spec, e, p.theta);
    }
  }
  return p;
}

// One Euler-Maruyama step of the polar system, with the embedded fallback
// inside the pole guard bands.
inline BasePoint step_base(const SpaceSpec& spec, const BasePoint& p, double dW1, double dW2,
                           double dt, double r_min = 1e-3) {
  bool guard = p.r < r_min || (spec.base == Base::Spherical && p.r > kPi - r_min);
  if (guard) return embedded_step(spec, p, dW1, dW2);
  double r = p.r + dW1 + detail::polar_drift(spec, p.r) * dt;
  double theta = p.theta + dW2 / detail::metric_coefficient(spec, p.r);
  if (r < 0.0) {
    r = -r;
    theta += kPi;
  }
  if (spec.base == Base::Spherical && r > kPi) {
    r = kTwoPi - r;
    theta += kPi;
  }
  return make_base_point(spec, r, theta);
}

// Online simulator of one total-space path. Owns its random streams; the
// state after k calls to step() is a deterministic function of
// (spec, start, cfg, path_index).
class TotalPathSim {
 public:
  TotalPathSim(const SpaceSpec& spec, const TotalPoint& start, const PathConfig& cfg,
               std::uint64_t path_index)
      : spec_(spec),
        cfg_(cfg),
        g1_(cfg.seed, path_index, chan::radial),
        g2_(cfg.seed, path_index, chan::angular),
        g3_(cfg.seed, path_index, chan::vertical),
        p_(start.base),
        z_(start.z) {
    cfg.validate();
    spec.validate();
    n_steps_ = static_cast<std::size_t>(std::ceil(cfg.horizon / cfg.dt - 1e-9));
  }

  // Advances one step; returns false once the horizon is reached.
  bool step() {
    if (k_ >= n_steps_) return false;
    double dt = k_ + 1 == n_steps_ ? cfg_.horizon - t_ : cfg_.dt;
    double sdt = std::sqrt(dt);
    double dW1 = sdt * g1_.gaussian();
    double dW2 = sdt * g2_.gaussian();
    BasePoint prev = p_;
    z_prev_ = z_;
    switch (cfg_.scheme) {
      case Scheme::PolarEM:
        p_ = step_base(spec_, prev, dW1, dW2, dt, cfg_.r_min);
        z_ += vertical_coefficient(spec_, prev.r) * dW2;
        break;
      case Scheme::EmbeddedGeodesic:
        p_ = embedded_step(spec_, prev, dW1, dW2);
        z_ += swept_area_increment(spec_, prev, p_);
        break;
      case Scheme::BesselClock:
        p_ = embedded_step(spec_, prev, dW1, dW2);
        break;
    }
    double r_mid = 0.5 * (prev.r + p_.r);
    if (spec_.base == Base::Spherical) r_mid = std::min(r_mid, kPi - 1e-9);
    dS_ = area_rate(spec_, r_mid) * dt;
    clock_ += dS_;
    if (cfg_.scheme == Scheme::BesselClock) z_ += std::sqrt(dS_) * g3_.gaussian();
    t_ += dt;
    last_dt_ = dt;
    ++k_;
    return true;
  }

  const SpaceSpec& spec() const { return spec_; }
  const BasePoint& base() const { return p_; }
  double t() const { return t_; }
  double z_unwrapped() const { return z_; }
  double z_wrapped() const { return wrap_fiber(spec_, z_); }
  double z_prev() const { return z_prev_; }
  double clock() const { return clock_; }
  double last_dS() const { return dS_; }
  double last_dt() const { return last_dt_; }
  std::size_t step_index() const { return k_; }
  std::size_t n_steps() const { return n_steps_; }

 private:
  SpaceSpec spec_;
  PathConfig cfg_;
  RngStream g1_, g2_, g3_;
  BasePoint p_;
  double z_ = 0.0, z_prev_ = 0.0, clock_ = 0.0, dS_ = 0.0, t_ = 0.0, last_dt_ = 0.0;
  std::size_t k_ = 0, n_steps_ = 0;
};

inline Trajectory simulate_path(const SpaceSpec& spec, const TotalPoint& start,
                                const PathConfig& cfg, std::uint64_t path_index = 0) {
  TotalPathSim sim(spec, start, cfg, path_index);
  Trajectory traj;
  traj.times.push_back(0.0);
  traj.base.push_back(start.base);
  traj.z.push_back(wrap_fiber(spec, start.z));
  traj.clock.push_back(0.0);
  while (sim.step()) {
    traj.times.push_back(sim.t());
    traj.base.push_back(sim.base());
    traj.z.push_back(sim.z_wrapped());
    traj.clock.push_back(sim.clock());
  }
  return traj;
}

// Radial process plus clock only, for the decoupled z_t = z_0 + W_{S(t)}
// representation. Weights generalize the clock to S(t) = int (1/4) sum
// (alpha_i r^i_s)^2 ds with independent planar factors.
inline void simulate_bessel_clock(double start_r, const SpaceSpec& spec, const PathConfig& cfg,
                                  std::uint64_t path_index, std::vector<double>& r_path,
                                  std::vector<double>& clock_path) {
  cfg.validate();
  r_path.clear();
  clock_path.clear();
  if (spec.weights.empty()) {
    TotalPathSim sim(spec, TotalPoint{make_base_point(spec, start_r, 0.0), 0.0}, cfg, path_index);
    r_path.push_back(start_r);
    clock_path.push_back(0.0);
    while (sim.step()) {
      r_path.push_back(sim.base().r);
      clock_path.push_back(sim.clock());
    }
    return;
  }
  // non-isotropic: n independent planar factors from radius start_r each
  std::size_t n = spec.weights.size();
  std::vector<RngStream> gs;
  gs.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    gs.emplace_back(cfg.seed, path_index, chan::factor0 + 2 * i);
    gs.emplace_back(cfg.seed, path_index, chan::factor0 + 2 * i + 1);
  }
  std::vector<double> x(n, start_r), y(n, 0.0);
  double t = 0.0, S = 0.0;
  std::size_t n_steps = static_cast<std::size_t>(std::ceil(cfg.horizon / cfg.dt - 1e-9));
  r_path.push_back(start_r);
  clock_path.push_back(0.0);
  for (std::size_t k = 0; k < n_steps; ++k) {
    double dt = k + 1 == n_steps ? cfg.horizon - t : cfg.dt;
    double sdt = std::sqrt(dt);
    double rate = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double x0 = x[i], y0 = y[i];
      x[i] += sdt * gs[2 * i].gaussian();
      y[i] += sdt * gs[2 * i + 1].gaussian();
      double r2_mid = 0.5 * (x0 * x0 + y0 * y0 + x[i] * x[i] + y[i] * y[i]);
      rate += 0.25 * spec.weights[i] * spec.weights[i] * r2_mid;
    }
    S += rate * dt;
    t += dt;
    r_path.push_back(std::hypot(x[0], y[0]));  // first factor radius, for diagnostics
    clock_path.push_back(S);
  }
}

// ---- First passage detection --------------------------------------------

// Detects the first hit of the vertical level set: {a} for a Line fiber,
// {a + 2 pi k} for the Circle fiber (the two-point set {a, a - 2pi} on the
// circle). Operates on the unwrapped coordinate via u = z - a shifted into
// (-2pi, 0) between checks. With bridge correction, a crossing inside a
// non-crossing step is triggered with the Brownian-bridge probability
// exp(-2 d0 d1 / dS) computed in the clock variable.
class VerticalCrossingMonitor {
 public:
  VerticalCrossingMonitor(const SpaceSpec& spec, double a, bool bridge, std::uint64_t seed,
                          std::uint64_t path_index, double z_start)
      : circle_(spec.fiber == Fiber::Circle), a_(a), bridge_(bridge),
        u_(seed, path_index, chan::bridge) {
    if (!(a > 0.0)) throw std::invalid_argument("vertical level a must be positive");
    if (circle_ && !(2.0 * a <= kTwoPi))
      throw std::invalid_argument("Circle fiber requires 2a in (0, 2pi]");
    rel_ = z_start - a;
    if (circle_) {
      rel_ = std::fmod(rel_, kTwoPi);
      if (rel_ > 0.0) rel_ -= kTwoPi;  // into [-2pi, 0]
    }
    if (rel_ == 0.0) hit_at_start_ = true;
  }

  bool hit_at_start() const { return hit_at_start_; }

  // Feed one step (vertical increment dz over clock increment dS). Returns
  // true when the level set is first hit; fraction in [0,1] locates the
  // crossing inside the step.
  bool feed(double dz, double dS, double& fraction) {
    double u0 = rel_, u1 = rel_ + dz;
    rel_ = u1;
    // direct crossings
    if (u0 < 0.0) {
      if (u1 >= 0.0) {
        fraction = u1 > u0 ? -u0 / (u1 - u0) : 0.0;
        return true;
      }
      if (circle_ && u1 <= -kTwoPi) {
        fraction = u0 > u1 ? (u0 + kTwoPi) / (u0 - u1) : 0.0;
        return true;
      }
    } else if (u0 > 0.0) {  // Line fiber started above the level
      if (u1 <= 0.0) {
        fraction = u0 > u1 ? u0 / (u0 - u1) : 0.0;
        return true;
      }
    }
    // bridge correction: both endpoints strictly inside
    if (bridge_ && dS > 0.0) {
      double p = std::exp(2.0 * u0 * u1 / -dS);  // barrier at 0: d0 = -u0, d1 = -u1
      if (circle_) {
        double v0 = u0 + kTwoPi, v1 = u1 + kTwoPi;  // barrier at -2pi
        p += std::exp(2.0 * v0 * v1 / -dS);
      }
      if (p > 0.0 && u_.uniform() < std::min(1.0, p)) {
        // bridge touched the level inside the step; the path continues from u1
        fraction = 0.5;
        return true;
      }
    }
    if (circle_ && rel_ <= -kTwoPi) rel_ += kTwoPi;
    else if (circle_ && rel_ >= 0.0) rel_ -= kTwoPi;
    return false;
  }

 private:
  bool circle_;
  double a_;
  bool bridge_;
  RngStream u_;
  double rel_ = 0.0;
  bool hit_at_start_ = false;
};

// First passage over a precomputed trajectory (unwrapped z reconstructed from
// the wrapped storage is ambiguous, so this variant takes the unwrapped z
// series directly).
inline HittingRecord first_passage_vertical(const SpaceSpec& spec,
                                            const std::vector<double>& times,
                                            const std::vector<double>& z_unwrapped,
                                            const std::vector<double>& clock, double a,
                                            const PathConfig& cfg, std::uint64_t path_index = 0) {
  if (times.size() != z_unwrapped.size() || times.size() != clock.size() || times.empty())
    throw std::invalid_argument("first_passage_vertical: inconsistent series");
  VerticalCrossingMonitor mon(spec, a, cfg.bridge_correction, cfg.seed, path_index,
                              z_unwrapped.front());
  HittingRecord rec;
  if (mon.hit_at_start()) {
    rec.hit = true;
    rec.time = times.front();
    return rec;
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    double frac = 0.0;
    double dS = clock[i] - clock[i - 1];
    if (mon.feed(z_unwrapped[i] - z_unwrapped[i - 1], dS, frac)) {
      rec.hit = true;
      rec.crossing_index = i - 1;
      rec.sub_step_fraction = frac;
      rec.time = times[i - 1] + frac * (times[i] - times[i - 1]);
      return rec;
    }
  }
  rec.hit = false;
  rec.time = cfg.horizon;
  return rec;
}

}  // namespace couplab
