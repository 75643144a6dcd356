#pragma once

// The couplings: vertical reflection coupling on every model space,
// horizontal mirror coupling on the base, their two-stage composition, and
// the non-isotropic Heisenberg variants. Runners come in an online
// outcome-only form (scalars per path, used by the large tail experiments)
// and a materialized form (full paired trajectories, used by the structural
// tests).

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "couplab/analytics.hpp"
#include "couplab/geometry.hpp"
#include "couplab/rng.hpp"
#include "couplab/sde.hpp"

namespace couplab {

struct CouplingOutcome {
  bool coupled = false;
  double coupling_time = 0.0;  // sigma_a or tau; horizon sentinel when truncated
  std::optional<double> stage1_time;
  std::optional<double> vertical_displacement_at_stage2;
  bool truncated = false;
};

struct CoupledPair {
  Trajectory primary_path;
  Trajectory partner_path;
  CouplingOutcome outcome;
};

// ---- Vertical reflection coupling ----------------------------------------

// One online coupled run from (origin, 0) with partner started at (origin, 2a).
// The partner is not simulated: before sigma_a it is the reflection of the
// primary (base across the axis through theta_{sigma_a}, z across level a),
// after sigma_a it coincides with the primary. States at the probe times are
// recorded for both.
struct VerticalRunStats {
  HittingRecord hit;
  std::vector<TotalPoint> primary;  // z unwrapped
  std::vector<TotalPoint> partner;  // z unwrapped (wrap on use for Circle)
};

inline VerticalRunStats run_vertical_coupling(const SpaceSpec& spec, double a,
                                              const PathConfig& cfg, std::uint64_t path_index,
                                              const std::vector<double>& probes = {}) {
  if (!(a > 0.0)) throw std::invalid_argument("run_vertical_coupling: a > 0 required");
  TotalPoint start{make_base_point(spec, 0.0, 0.0), 0.0};
  TotalPathSim sim(spec, start, cfg, path_index);
  VerticalCrossingMonitor mon(spec, a, cfg.bridge_correction, cfg.seed, path_index, 0.0);
  VerticalRunStats out;
  std::size_t next_probe = 0;
  std::vector<char> probe_premeet;  // probe recorded before sigma_a
  bool hit = false;
  double sigma = cfg.horizon;
  std::size_t hit_index = 0;
  double hit_fraction = 0.0;
  double axis = 0.0;
  while ((!hit || next_probe < probes.size())) {
    if (!sim.step()) break;
    double t = sim.t();
    if (!hit) {
      double frac = 0.0;
      if (mon.feed(sim.z_unwrapped() - sim.z_prev(), sim.last_dS(), frac)) {
        hit = true;
        hit_index = sim.step_index() - 1;
        hit_fraction = frac;
        sigma = t - (1.0 - frac) * sim.last_dt();
        axis = sim.base().theta;
        if (sim.base().r < 1e-9) {
          // degenerate axis: the hitting point sits at the pole, any axis
          // gives the same reflected law; draw it uniformly
          RngStream aux(cfg.seed, path_index, chan::aux);
          axis = aux.uniform() * kTwoPi;
        }
      }
    }
    while (next_probe < probes.size() && t >= probes[next_probe] - 1e-9) {
      out.primary.push_back({sim.base(), sim.z_unwrapped()});
      probe_premeet.push_back(!hit || sigma > probes[next_probe] ? 1 : 0);
      ++next_probe;
    }
  }
  out.hit.hit = hit;
  out.hit.time = hit ? sigma : cfg.horizon;
  out.hit.crossing_index = hit_index;
  out.hit.sub_step_fraction = hit_fraction;
  out.partner.reserve(out.primary.size());
  for (std::size_t i = 0; i < out.primary.size(); ++i) {
    if (probe_premeet[i]) {
      // On a truncated run the axis is not yet determined; z is still mirrored
      // but the base is left unreflected. Callers needing the pre-meeting base
      // must choose a horizon large enough that truncation is negligible.
      TotalPoint q;
      q.base = hit ? reflect_base(spec, axis, out.primary[i].base) : out.primary[i].base;
      q.z = 2.0 * a - out.primary[i].z;
      out.partner.push_back(q);
    } else {
      out.partner.push_back(out.primary[i]);
    }
  }
  return out;
}

// Materialized coupled pair from (origin-base, 0), partner from (origin, 2a).
// Stores wrapped z per the Trajectory contract plus the hitting outcome.
inline CoupledPair vertical_reflection_coupling(const SpaceSpec& spec, double a,
                                               const PathConfig& cfg,
                                               std::uint64_t path_index = 0) {
  if (!(a > 0.0)) throw std::invalid_argument("vertical_reflection_coupling: a > 0 required");
  if (spec.fiber == Fiber::Circle && !(2.0 * a <= kTwoPi))
    throw std::invalid_argument("Circle fiber requires 2a in (0, 2pi]");
  TotalPoint start{make_base_point(spec, 0.0, 0.0), 0.0};
  TotalPathSim sim(spec, start, cfg, path_index);
  std::vector<double> times{0.0}, zs{0.0}, clocks{0.0};
  std::vector<BasePoint> bases{start.base};
  while (sim.step()) {
    times.push_back(sim.t());
    bases.push_back(sim.base());
    zs.push_back(sim.z_unwrapped());
    clocks.push_back(sim.clock());
  }
  HittingRecord rec = first_passage_vertical(spec, times, zs, clocks, a, cfg, path_index);
  CoupledPair pair;
  pair.outcome.coupled = rec.hit;
  pair.outcome.coupling_time = rec.time;
  pair.outcome.truncated = !rec.hit;
  double axis = 0.0;
  if (rec.hit) {
    axis = bases[rec.crossing_index + 1].theta;
    if (bases[rec.crossing_index + 1].r < 1e-9) {
      RngStream aux(cfg.seed, path_index, chan::aux);
      axis = aux.uniform() * kTwoPi;
    }
  }
  pair.primary_path.times = times;
  pair.primary_path.clock = clocks;
  pair.primary_path.base = bases;
  pair.partner_path.times = times;
  pair.partner_path.clock = clocks;
  for (std::size_t i = 0; i < times.size(); ++i) {
    pair.primary_path.z.push_back(wrap_fiber(spec, zs[i]));
    bool premeet = rec.hit && times[i] < rec.time;
    if (!rec.hit) premeet = true;
    if (premeet) {
      pair.partner_path.base.push_back(rec.hit ? reflect_base(spec, axis, bases[i]) : bases[i]);
      pair.partner_path.z.push_back(wrap_fiber(spec, 2.0 * a - zs[i]));
    } else {
      pair.partner_path.base.push_back(bases[i]);
      pair.partner_path.z.push_back(wrap_fiber(spec, zs[i]));
    }
  }
  return pair;
}

// KS comparison of the reflected partner's coordinates at t_probe against an
// independent simulation started from (origin, 2a).
struct PartnerMarginalCheck {
  KsResult e0, e1, z;         // embedded base coordinates and vertical coordinate
  double z_mean_partner = 0.0;
  double base_sq_radius_mean = 0.0;
};

inline PartnerMarginalCheck partner_marginal_check(const SpaceSpec& spec, double a,
                                                   const PathConfig& cfg, std::size_t n_paths,
                                                   double t_probe) {
  std::vector<double> pe0, pe1, pz, ie0, ie1, iz;
  pe0.reserve(n_paths);
  PathConfig cpl = cfg;
  cpl.horizon = std::max(cfg.horizon, 8.0 * t_probe);  // partner base needs sigma_a resolved
  for (std::size_t i = 0; i < n_paths; ++i) {
    auto run = run_vertical_coupling(spec, a, cpl, i, {t_probe});
    const TotalPoint& q = run.partner.front();
    pe0.push_back(q.base.e[0]);
    pe1.push_back(q.base.e[1]);
    pz.push_back(wrap_fiber(spec, q.z));
  }
  PathConfig ind = cfg;
  ind.seed = cfg.seed ^ 0x5bf0f1ecb5a24c1dULL;
  ind.horizon = t_probe;
  TotalPoint start2{make_base_point(spec, 0.0, 0.0), 2.0 * a};
  for (std::size_t i = 0; i < n_paths; ++i) {
    TotalPathSim sim(spec, start2, ind, i);
    while (sim.step()) {}
    ie0.push_back(sim.base().e[0]);
    ie1.push_back(sim.base().e[1]);
    iz.push_back(sim.z_wrapped());
  }
  PartnerMarginalCheck res;
  res.e0 = ks_two_sample(pe0, ie0);
  res.e1 = ks_two_sample(pe1, ie1);
  res.z = ks_two_sample(pz, iz);
  for (std::size_t i = 0; i < n_paths; ++i) {
    res.z_mean_partner += pz[i] / static_cast<double>(n_paths);
    res.base_sq_radius_mean += (pe0[i] * pe0[i] + pe1[i] * pe1[i]) / static_cast<double>(n_paths);
  }
  return res;
}

// ---- Horizontal mirror coupling ------------------------------------------

// Mirror coupling of the base marginals across the fixed perpendicular
// bisector geodesic of the two starts; the partner path is the reflection of
// the primary path, so only one base path is simulated. Meeting is declared
// on a sign change of the signed distance to the bisector or when
// base_distance <= 2 sqrt(dt), whichever first; both points then snap to the
// geodesic midpoint and continue synchronously.
enum class MirrorStatus { Coupled, Truncated, Escaped };

struct HorizontalOutcome {
  MirrorStatus status = MirrorStatus::Truncated;
  double sigma = 0.0;            // meeting time (horizon sentinel otherwise)
  double vertical_displacement = 0.0;  // z~ - z at sigma (or at stop time)
  int witness_sign = 0;          // +1 primary on its own side at stop, -1 opposite, 0 coupled
  double signed_half_separation = 0.0;  // signed distance to bisector at stop
};

struct MirrorOptions {
  double escape_half_separation = 0.0;  // > 0: stop early once surely never coupling
  bool track_vertical = true;           // false: skip swept-area bookkeeping (success runs)
  // false: meet on sign change or base_distance <= 2 sqrt(dt) (snap rule).
  // true: meet on sign change or with the Brownian-bridge crossing probability
  // exp(-2 d0 d1 / dt) of the signed distance, which removes the O(sqrt(dt))
  // detection bias of the snap rule.
  bool bridge_meeting = false;
};

namespace detail {

// Signed distance of x to the perpendicular bisector of (p0, q0), positive on
// the p0 side; unit diffusion coefficient in the normal direction.
struct BisectorFrame {
  SpaceSpec spec;
  std::array<double, 3> w{};  // normal direction (normalized per geometry)
  std::array<double, 3> m{};  // midpoint of the starts (Euclidean only)

  double signed_distance(const BasePoint& x) const {
    switch (spec.base) {
      case Base::Euclidean:
        return (x.e[0] - m[0]) * w[0] + (x.e[1] - m[1]) * w[1];
      case Base::Spherical: {
        double d = x.e[0] * w[0] + x.e[1] * w[1] + x.e[2] * w[2];
        return std::asin(std::min(1.0, std::max(-1.0, d)));
      }
      case Base::Hyperbolic:
        return std::asinh(mink(x.e, w));
    }
    return 0.0;
  }

  BasePoint reflect(const BasePoint& x) const {
    std::array<double, 3> e = x.e;
    switch (spec.base) {
      case Base::Euclidean: {
        double d = (e[0] - m[0]) * w[0] + (e[1] - m[1]) * w[1];
        e[0] -= 2.0 * d * w[0];
        e[1] -= 2.0 * d * w[1];
        break;
      }
      case Base::Spherical: {
        double d = e[0] * w[0] + e[1] * w[1] + e[2] * w[2];
        for (int i = 0; i < 3; ++i) e[i] -= 2.0 * d * w[i];
        break;
      }
      case Base::Hyperbolic: {
        double d = mink(e, w);  // Q(w,w) = -1 after normalization
        for (int i = 0; i < 3; ++i) e[i] += 2.0 * d * w[i];
        break;
      }
    }
    return base_from_embedded(spec, e, x.theta);
  }

  BasePoint midpoint_of(const BasePoint& p, const BasePoint& q) const {
    std::array<double, 3> e{0.5 * (p.e[0] + q.e[0]), 0.5 * (p.e[1] + q.e[1]),
                            0.5 * (p.e[2] + q.e[2])};
    if (spec.base == Base::Spherical) {
      double n = std::sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
      if (n > 0) for (auto& v : e) v /= n;
    } else if (spec.base == Base::Hyperbolic) {
      double q2 = e[2] * e[2] - e[0] * e[0] - e[1] * e[1];
      double n = std::sqrt(std::max(1e-300, q2));
      for (auto& v : e) v /= n;
    }
    return base_from_embedded(spec, e, p.theta);
  }
};

inline BisectorFrame make_bisector(const SpaceSpec& spec, const BasePoint& p0,
                                   const BasePoint& q0) {
  BisectorFrame f;
  f.spec = spec;
  std::array<double, 3> w{p0.e[0] - q0.e[0], p0.e[1] - q0.e[1], p0.e[2] - q0.e[2]};
  switch (spec.base) {
    case Base::Euclidean: {
      double n = std::hypot(w[0], w[1]);
      f.w = {w[0] / n, w[1] / n, 0.0};
      f.m = {0.5 * (p0.e[0] + q0.e[0]), 0.5 * (p0.e[1] + q0.e[1]), 0.0};
      break;
    }
    case Base::Spherical: {
      double n = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
      f.w = {w[0] / n, w[1] / n, w[2] / n};
      break;
    }
    case Base::Hyperbolic: {
      double q2 = -mink(w, w);  // spacelike: positive
      double n = std::sqrt(q2);
      f.w = {w[0] / n, w[1] / n, w[2] / n};
      break;
    }
  }
  return f;
}

}  // namespace detail

inline HorizontalOutcome mirror_horizontal_coupling(const SpaceSpec& spec, const BasePoint& p0,
                                                    const BasePoint& q0, double z0, double z0_tilde,
                                                    const PathConfig& cfg, std::uint64_t path_index,
                                                    const MirrorOptions& opts = {}) {
  if (base_distance(spec, p0, q0) <= 0.0)
    throw std::invalid_argument("mirror_horizontal_coupling: p != q required");
  cfg.validate();
  auto frame = detail::make_bisector(spec, p0, q0);
  double d0 = frame.signed_distance(p0);
  int own_side = d0 >= 0.0 ? 1 : -1;
  double eps_meet = 2.0 * std::sqrt(cfg.dt);
  RngStream g1(cfg.seed, path_index, chan::radial), g2(cfg.seed, path_index, chan::angular);
  RngStream gb(cfg.seed, path_index, chan::bridge);
  std::size_t n_steps = static_cast<std::size_t>(std::ceil(cfg.horizon / cfg.dt - 1e-9));
  BasePoint p = p0;
  double z = z0, z_tilde = z0_tilde;
  double t = 0.0;
  double d_prev = d0;
  HorizontalOutcome out;
  for (std::size_t k = 0; k < n_steps; ++k) {
    double dt = k + 1 == n_steps ? cfg.horizon - t : cfg.dt;
    double sdt = std::sqrt(dt);
    BasePoint prev = p;
    p = embedded_step(spec, prev, sdt * g1.gaussian(), sdt * g2.gaussian());
    t += dt;
    BasePoint p_r = frame.reflect(p);
    if (opts.track_vertical) {
      z += swept_area_increment(spec, prev, p);
      BasePoint prev_r = frame.reflect(prev);
      z_tilde += swept_area_increment(spec, prev_r, p_r);
    }
    double d = frame.signed_distance(p);
    bool met = (d_prev > 0.0) != (d > 0.0);
    if (!met) {
      if (opts.bridge_meeting)
        met = gb.uniform() < std::exp(-2.0 * std::fabs(d_prev * d) / dt);
      else
        met = base_distance(spec, p, p_r) <= eps_meet;
    }
    if (met) {
      out.status = MirrorStatus::Coupled;
      out.sigma = t;
      out.vertical_displacement = z_tilde - z;
      out.witness_sign = 0;
      out.signed_half_separation = 0.0;
      return out;
    }
    d_prev = d;
    if (opts.escape_half_separation > 0.0 && std::fabs(d) >= opts.escape_half_separation) {
      out.status = MirrorStatus::Escaped;
      out.sigma = cfg.horizon;
      out.vertical_displacement = z_tilde - z;
      out.witness_sign = (d >= 0.0 ? 1 : -1) * own_side;
      out.signed_half_separation = d;
      return out;
    }
  }
  out.status = MirrorStatus::Truncated;
  out.sigma = cfg.horizon;
  out.vertical_displacement = z_tilde - z;
  out.witness_sign = (d_prev >= 0.0 ? 1 : -1) * own_side;
  out.signed_half_separation = d_prev;
  return out;
}

// ---- Two-stage coupling ---------------------------------------------------

// Mirror-couple the bases; at the meeting time, run the vertical reflection
// coupling from the (left-translated) common point with level a = half the
// recorded vertical displacement.
inline CouplingOutcome two_stage_coupling(const SpaceSpec& spec, const TotalPoint& start1,
                                          const TotalPoint& start2, const PathConfig& cfg,
                                          std::uint64_t path_index,
                                          const MirrorOptions& opts = {}) {
  CouplingOutcome out;
  double base_sep = base_distance(spec, start1.base, start2.base);
  double stage1 = 0.0;
  double vdisp = wrap_fiber(spec, start2.z - start1.z);
  if (base_sep > 0.0) {
    auto hor = mirror_horizontal_coupling(spec, start1.base, start2.base, start1.z, start2.z,
                                          cfg, path_index, opts);
    if (hor.status != MirrorStatus::Coupled) {
      out.coupled = false;
      out.truncated = true;
      out.coupling_time = cfg.horizon;
      return out;
    }
    stage1 = hor.sigma;
    vdisp = wrap_fiber(spec, hor.vertical_displacement);
  }
  out.stage1_time = stage1;
  out.vertical_displacement_at_stage2 = vdisp;
  if (vdisp == 0.0) {
    out.coupled = true;
    out.coupling_time = stage1;
    return out;
  }
  double a = 0.5 * std::fabs(vdisp);
  PathConfig cfg2 = cfg;
  cfg2.seed = cfg.seed ^ 0xc2b2ae3d27d4eb4fULL;
  cfg2.horizon = cfg.horizon - stage1;
  if (cfg2.horizon < cfg.dt) {
    out.coupled = false;
    out.truncated = true;
    out.coupling_time = cfg.horizon;
    return out;
  }
  auto run = run_vertical_coupling(spec, a, cfg2, path_index);
  if (!run.hit.hit) {
    out.coupled = false;
    out.truncated = true;
    out.coupling_time = cfg.horizon;
    return out;
  }
  out.coupled = true;
  out.coupling_time = stage1 + run.hit.time;
  return out;
}

// ---- Non-isotropic Heisenberg --------------------------------------------

// Online simulator for H^n_omega: n independent planar factors, vertical
// coordinate z = sum alpha_i z^i with per-factor swept areas, clock
// S(t) = int (1/4) sum (alpha_i r^i)^2 ds.
class NiPathSim {
 public:
  NiPathSim(const std::vector<double>& weights, const HnPoint& start, const PathConfig& cfg,
            std::uint64_t path_index)
      : weights_(weights), cfg_(cfg), xy_(start.xy), z_(start.z) {
    cfg.validate();
    if (weights.empty() || start.xy.size() != 2 * weights.size())
      throw std::invalid_argument("NiPathSim: dimension mismatch");
    for (std::size_t i = 0; i < weights.size(); ++i) {
      gs_.emplace_back(cfg.seed, path_index, chan::factor0 + 2 * i);
      gs_.emplace_back(cfg.seed, path_index, chan::factor0 + 2 * i + 1);
    }
    n_steps_ = static_cast<std::size_t>(std::ceil(cfg.horizon / cfg.dt - 1e-9));
  }

  bool step() {
    if (k_ >= n_steps_) return false;
    double dt = k_ + 1 == n_steps_ ? cfg_.horizon - t_ : cfg_.dt;
    double sdt = std::sqrt(dt);
    z_prev_ = z_;
    double rate = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      double x0 = xy_[2 * i], y0 = xy_[2 * i + 1];
      double x1 = x0 + sdt * gs_[2 * i].gaussian();
      double y1 = y0 + sdt * gs_[2 * i + 1].gaussian();
      z_ += weights_[i] * 0.5 * (x0 * y1 - x1 * y0);
      double r2_mid = 0.5 * (x0 * x0 + y0 * y0 + x1 * x1 + y1 * y1);
      rate += 0.25 * weights_[i] * weights_[i] * r2_mid;
      xy_[2 * i] = x1;
      xy_[2 * i + 1] = y1;
    }
    dS_ = rate * dt;
    clock_ += dS_;
    t_ += dt;
    ++k_;
    return true;
  }

  double t() const { return t_; }
  double z() const { return z_; }
  double z_prev() const { return z_prev_; }
  double last_dS() const { return dS_; }
  double clock() const { return clock_; }
  const std::vector<double>& xy() const { return xy_; }

 private:
  std::vector<double> weights_;
  PathConfig cfg_;
  std::vector<RngStream> gs_;
  std::vector<double> xy_;
  double z_ = 0.0, z_prev_ = 0.0, clock_ = 0.0, dS_ = 0.0, t_ = 0.0;
  std::size_t k_ = 0, n_steps_ = 0;
};

struct NiVerticalRun {
  HittingRecord hit;
  std::vector<double> z_probe;        // primary z at probe times
  std::vector<double> z_tilde_probe;  // partner z at probe times
};

inline NiVerticalRun nonisotropic_vertical_outcome(const std::vector<double>& weights, double a,
                                                   const PathConfig& cfg, std::uint64_t path_index,
                                                   const std::vector<double>& probes = {}) {
  if (!(a > 0.0)) throw std::invalid_argument("nonisotropic_vertical_outcome: a > 0 required");
  if (weights.size() == 1 && weights[0] == 1.0) {
    // the isotropic n=1 group is the Heisenberg group; share its implementation
    auto run = run_vertical_coupling(SpaceSpec::heisenberg(), a, cfg, path_index, probes);
    NiVerticalRun out;
    out.hit = run.hit;
    for (std::size_t i = 0; i < run.primary.size(); ++i) {
      out.z_probe.push_back(run.primary[i].z);
      out.z_tilde_probe.push_back(run.partner[i].z);
    }
    return out;
  }
  HnPoint start;
  start.xy.assign(2 * weights.size(), 0.0);
  NiPathSim sim(weights, start, cfg, path_index);
  SpaceSpec line_spec = SpaceSpec::heisenberg();
  VerticalCrossingMonitor mon(line_spec, a, cfg.bridge_correction, cfg.seed, path_index, 0.0);
  NiVerticalRun out;
  std::size_t next_probe = 0;
  bool hit = false;
  double sigma = cfg.horizon;
  while (!hit || next_probe < probes.size()) {
    if (!sim.step()) break;
    if (!hit) {
      double frac = 0.0;
      if (mon.feed(sim.z() - sim.z_prev(), sim.last_dS(), frac)) {
        hit = true;
        sigma = sim.t() - (1.0 - frac) * cfg.dt;
      }
    }
    while (next_probe < probes.size() && sim.t() >= probes[next_probe] - 1e-9) {
      out.z_probe.push_back(sim.z());
      out.z_tilde_probe.push_back(!hit || sigma > probes[next_probe] ? 2.0 * a - sim.z()
                                                                     : sim.z());
      ++next_probe;
    }
  }
  out.hit.hit = hit;
  out.hit.time = hit ? sigma : cfg.horizon;
  return out;
}

// Materialized non-isotropic coupled pair: per-factor Cartesian paths for the
// primary, the partner reconstructed by per-factor reflection across the axis
// through the factor's angle at sigma_a, and z~ = 2a - z before sigma_a.
struct NiCoupledPair {
  std::vector<double> times;
  std::vector<std::vector<std::array<double, 2>>> primary_factors;  // [factor][step]
  std::vector<std::vector<std::array<double, 2>>> partner_factors;
  std::vector<double> z_primary, z_partner;
  CouplingOutcome outcome;
};

inline NiCoupledPair nonisotropic_vertical_coupling(const std::vector<double>& weights, double a,
                                                    const PathConfig& cfg,
                                                    std::uint64_t path_index = 0) {
  HnPoint start;
  start.xy.assign(2 * weights.size(), 0.0);
  NiPathSim sim(weights, start, cfg, path_index);
  SpaceSpec line_spec = SpaceSpec::heisenberg();
  VerticalCrossingMonitor mon(line_spec, a, cfg.bridge_correction, cfg.seed, path_index, 0.0);
  NiCoupledPair pair;
  pair.primary_factors.assign(weights.size(), {});
  pair.partner_factors.assign(weights.size(), {});
  pair.times.push_back(0.0);
  for (std::size_t i = 0; i < weights.size(); ++i)
    pair.primary_factors[i].push_back({0.0, 0.0});
  pair.z_primary.push_back(0.0);
  bool hit = false;
  double sigma = cfg.horizon;
  while (sim.step()) {
    pair.times.push_back(sim.t());
    for (std::size_t i = 0; i < weights.size(); ++i)
      pair.primary_factors[i].push_back({sim.xy()[2 * i], sim.xy()[2 * i + 1]});
    pair.z_primary.push_back(sim.z());
    if (!hit) {
      double frac = 0.0;
      if (mon.feed(sim.z() - sim.z_prev(), sim.last_dS(), frac)) {
        hit = true;
        sigma = sim.t() - (1.0 - frac) * cfg.dt;
      }
    }
  }
  pair.outcome.coupled = hit;
  pair.outcome.coupling_time = hit ? sigma : cfg.horizon;
  pair.outcome.truncated = !hit;
  // axis per factor: angle at the crossing step
  std::vector<double> axes(weights.size(), 0.0);
  std::size_t cross_k = pair.times.size() - 1;
  if (hit) {
    cross_k = 0;
    while (cross_k + 1 < pair.times.size() && pair.times[cross_k] < sigma) ++cross_k;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      auto& f = pair.primary_factors[i][cross_k];
      axes[i] = std::atan2(f[1], f[0]);
      if (std::hypot(f[0], f[1]) < 1e-9) {
        RngStream aux(cfg.seed, path_index, chan::aux + i);
        axes[i] = aux.uniform() * kTwoPi;
      }
    }
  }
  for (std::size_t k = 0; k < pair.times.size(); ++k) {
    bool premeet = !hit || pair.times[k] < sigma;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      auto f = pair.primary_factors[i][k];
      if (premeet && hit) {
        double c = std::cos(2.0 * axes[i]), s = std::sin(2.0 * axes[i]);
        f = {c * f[0] + s * f[1], s * f[0] - c * f[1]};  // reflection across the axis
      }
      pair.partner_factors[i].push_back(f);
    }
    pair.z_partner.push_back(premeet ? 2.0 * a - pair.z_primary[k] : pair.z_primary[k]);
  }
  return pair;
}

// Two-stage non-isotropic coupling: stage 1 couples every factor's x
// synchronously and y by 1D mirror; T1 is the last factor-meeting time. The
// invariant difference A_t = z - z~ + (1/2) sum alpha_i (x_i y~_i - x~_i y_i)
// is tracked and its value at T1 seeds the vertical stage with 2a = |A_T1|.
inline CouplingOutcome nonisotropic_two_stage(const std::vector<double>& weights,
                                              const HnPoint& start1, const HnPoint& start2,
                                              const PathConfig& cfg, std::uint64_t path_index) {
  cfg.validate();
  std::size_t n = weights.size();
  if (start1.xy.size() != 2 * n || start2.xy.size() != 2 * n)
    throw std::invalid_argument("nonisotropic_two_stage: dimension mismatch");
  CouplingOutcome out;
  std::vector<RngStream> gs;
  for (std::size_t i = 0; i < n; ++i) {
    gs.emplace_back(cfg.seed, path_index, chan::factor0 + 2 * i);
    gs.emplace_back(cfg.seed, path_index, chan::factor0 + 2 * i + 1);
  }
  std::vector<double> x = start1.xy, xt = start2.xy;  // xt: partner (x~, y~)
  std::vector<char> y_met(n, 0);
  bool all_met = true;
  for (std::size_t i = 0; i < n; ++i) {
    // Synchronous driving keeps x_i - x~_i fixed, so the construction assumes
    // the starts are already rotated factor-wise to share x-coordinates.
    if (start1.xy[2 * i] != start2.xy[2 * i])
      throw std::invalid_argument(
          "nonisotropic_two_stage: factor x-coordinates must agree (rotate each factor first)");
    if (start1.xy[2 * i + 1] == start2.xy[2 * i + 1]) y_met[i] = 1;
    else all_met = false;
  }
  double z = start1.z, zt = start2.z;
  double t = 0.0;
  std::size_t n_steps = static_cast<std::size_t>(std::ceil(cfg.horizon / cfg.dt - 1e-9));
  double T1 = all_met ? 0.0 : -1.0;
  for (std::size_t k = 0; k < n_steps && T1 < 0.0; ++k) {
    double dt = k + 1 == n_steps ? cfg.horizon - t : cfg.dt;
    double sdt = std::sqrt(dt);
    all_met = true;
    for (std::size_t i = 0; i < n; ++i) {
      double dWx = sdt * gs[2 * i].gaussian();
      double dWy = sdt * gs[2 * i + 1].gaussian();
      double x0 = x[2 * i], y0 = x[2 * i + 1];
      double xt0 = xt[2 * i], yt0 = xt[2 * i + 1];
      double x1 = x0 + dWx, xt1 = xt0 + dWx;  // synchronous
      double y1, yt1;
      if (y_met[i]) {
        y1 = y0 + dWy;
        yt1 = y1;
      } else {
        y1 = y0 + dWy;
        yt1 = yt0 - dWy;  // mirror
        if ((y0 - yt0) * (y1 - yt1) <= 0.0) {
          y_met[i] = 1;
          double mid = 0.5 * (y1 + yt1);
          y1 = mid;
          yt1 = mid;
        }
      }
      z += 0.5 * weights[i] * (x0 * y1 - x1 * y0);
      zt += 0.5 * weights[i] * (xt0 * yt1 - xt1 * yt0);
      x[2 * i] = x1;
      x[2 * i + 1] = y1;
      xt[2 * i] = xt1;
      xt[2 * i + 1] = yt1;
      if (!y_met[i]) all_met = false;
    }
    t += dt;
    if (all_met) T1 = t;
  }
  if (T1 < 0.0) {
    out.coupled = false;
    out.truncated = true;
    out.coupling_time = cfg.horizon;
    return out;
  }
  double A = z - zt;
  for (std::size_t i = 0; i < n; ++i)
    A += 0.5 * weights[i] * (x[2 * i] * xt[2 * i + 1] - xt[2 * i] * x[2 * i + 1]);
  out.stage1_time = T1;
  out.vertical_displacement_at_stage2 = A;
  if (A == 0.0) {
    out.coupled = true;
    out.coupling_time = T1;
    return out;
  }
  PathConfig cfg2 = cfg;
  cfg2.seed = cfg.seed ^ 0xc2b2ae3d27d4eb4fULL;
  cfg2.horizon = cfg.horizon - T1;
  if (cfg2.horizon < cfg.dt) {
    out.coupled = false;
    out.truncated = true;
    out.coupling_time = cfg.horizon;
    return out;
  }
  auto run = nonisotropic_vertical_outcome(weights, 0.5 * std::fabs(A), cfg2, path_index);
  if (!run.hit.hit) {
    out.coupled = false;
    out.truncated = true;
    out.coupling_time = cfg.horizon;
    return out;
  }
  out.coupled = true;
  out.coupling_time = T1 + run.hit.time;
  return out;
}

}  // namespace couplab
