#pragma once

// Deterministic geometry of the three base space forms (plane, hyperbolic
// plane, 2-sphere), their fibered total spaces, reflections and swept-area
// functionals, plus the embedded S^3 geometry used for the spherical total
// space.
//
// Points carry both geodesic polar coordinates (r, theta) and an embedded
// representation:
//   Euclidean:  (x, y, 0)                          x = r cos t, y = r sin t
//   Spherical:  unit vector in R^3, pole (0,0,1)   w = cos r
//   Hyperbolic: hyperboloid w^2 - x^2 - y^2 = 1    w = cosh r
// The conversion functions below are the single source of truth for the
// correspondence; everything else goes through them.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace couplab {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kFourPi = 4.0 * kPi;
inline constexpr double kLn2 = 0.69314718055994530942;
// Beyond this radius the embedded hyperboloid representation is abandoned in
// favour of intrinsic polar formulas: the unit-Minkowski-norm constraint is
// enforced by subtracting squares of size cosh^2 r, which erases roughly
// cosh^2(r) * eps of precision per step.
inline constexpr double kHypEmbeddedRMax = 8.0;

enum class Base { Euclidean, Hyperbolic, Spherical };
enum class Fiber { Line, Circle };  // Circle has circumference 4*pi

struct SpaceSpec {
  Base base = Base::Euclidean;
  Fiber fiber = Fiber::Line;
  // Non-empty only for non-isotropic Heisenberg groups H^n_omega
  // (base Euclidean, fiber Line): positive weights, ascending.
  std::vector<double> weights;

  static SpaceSpec heisenberg() { return {Base::Euclidean, Fiber::Line, {}}; }
  static SpaceSpec sl2_cover() { return {Base::Hyperbolic, Fiber::Line, {}}; }
  static SpaceSpec sl2() { return {Base::Hyperbolic, Fiber::Circle, {}}; }
  static SpaceSpec su2() { return {Base::Spherical, Fiber::Circle, {}}; }
  static SpaceSpec nonisotropic(std::vector<double> w) {
    SpaceSpec s{Base::Euclidean, Fiber::Line, std::move(w)};
    s.validate();
    return s;
  }

  void validate() const {
    if (base == Base::Spherical && fiber == Fiber::Line)
      throw std::invalid_argument("SpaceSpec: spherical base with line fiber is not one of the model spaces");
    if (!weights.empty()) {
      if (base != Base::Euclidean || fiber != Fiber::Line)
        throw std::invalid_argument("SpaceSpec: weights only apply to the Euclidean/Line (Heisenberg) case");
      double prev = 0.0;
      for (double a : weights) {
        if (!(a > 0.0)) throw std::invalid_argument("SpaceSpec: weights must be strictly positive");
        if (a < prev) throw std::invalid_argument("SpaceSpec: weights must be ascending");
        prev = a;
      }
    }
  }

  std::string name() const {
    if (!weights.empty()) return "H^n_omega";
    if (base == Base::Euclidean) return "Heisenberg";
    if (base == Base::Hyperbolic) return fiber == Fiber::Line ? "SL2~" : "SL2";
    return "SU2";
  }
};

struct BasePoint {
  double r = 0.0;      // geodesic radius; [0,pi] on the sphere
  double theta = 0.0;  // angle in [0, 2pi)
  std::array<double, 3> e{0.0, 0.0, 0.0};  // embedded representation
};

struct TotalPoint {
  BasePoint base;
  double z = 0.0;  // fiber coordinate; reduced into (-2pi, 2pi] for Circle
};

struct R4Point {
  std::array<double, 4> x{1.0, 0.0, 0.0, 0.0};
};

inline double wrap_angle(double t) {
  t = std::fmod(t, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  return t;
}

inline BasePoint make_base_point(const SpaceSpec& spec, double r, double theta) {
  BasePoint p;
  p.theta = wrap_angle(theta);
  p.r = r;
  double c = std::cos(p.theta), s = std::sin(p.theta);
  switch (spec.base) {
    case Base::Euclidean:
      if (r < 0.0) throw std::invalid_argument("radius must be nonnegative");
      p.e = {r * c, r * s, 0.0};
      break;
    case Base::Hyperbolic:
      if (r < 0.0) throw std::invalid_argument("radius must be nonnegative");
      p.e = {std::sinh(r) * c, std::sinh(r) * s, std::cosh(r)};
      break;
    case Base::Spherical:
      if (r < 0.0 || r > kPi) throw std::invalid_argument("spherical radius must lie in [0,pi]");
      p.e = {std::sin(r) * c, std::sin(r) * s, std::cos(r)};
      break;
  }
  return p;
}

// Rebuild polar coordinates from an embedded point. theta_hint is used where
// the angle is undefined (r = 0, or the sphere poles).
inline BasePoint base_from_embedded(const SpaceSpec& spec, const std::array<double, 3>& e,
                                    double theta_hint = 0.0) {
  BasePoint p;
  p.e = e;
  double rho = std::hypot(e[0], e[1]);
  p.theta = rho > 0.0 ? wrap_angle(std::atan2(e[1], e[0])) : wrap_angle(theta_hint);
  switch (spec.base) {
    case Base::Euclidean:
      p.r = rho;
      break;
    case Base::Hyperbolic:
      p.r = std::asinh(rho);
      break;
    case Base::Spherical:
      p.r = std::atan2(rho, e[2]);  // in [0,pi]
      break;
  }
  return p;
}

// Geodesic distance between base points, via the embedded representation.
inline double base_distance(const SpaceSpec& spec, const BasePoint& p, const BasePoint& q) {
  switch (spec.base) {
    case Base::Euclidean:
      return std::hypot(p.e[0] - q.e[0], p.e[1] - q.e[1]);
    case Base::Spherical: {
      // chord formula: accurate for nearby points where acos of the dot is not
      double dx = p.e[0] - q.e[0], dy = p.e[1] - q.e[1], dz = p.e[2] - q.e[2];
      double half = 0.5 * std::sqrt(dx * dx + dy * dy + dz * dz);
      return 2.0 * std::asin(std::min(1.0, half));
    }
    case Base::Hyperbolic: {
      // sinh(d/2) = sqrt(-Q(p-q, p-q)) / 2 with Q the Minkowski form
      double dx = p.e[0] - q.e[0], dy = p.e[1] - q.e[1], dw = p.e[2] - q.e[2];
      double m = dx * dx + dy * dy - dw * dw;
      return 2.0 * std::asinh(0.5 * std::sqrt(std::max(0.0, m)));
    }
  }
  return 0.0;
}

// Reflection across the complete geodesic through the origin at angle
// axis_angle. In polar coordinates this is theta -> 2*axis_angle - theta on
// every base; an involution, orientation-reversing, radius preserving.
inline BasePoint reflect_base(const SpaceSpec& spec, double axis_angle, const BasePoint& p) {
  return make_base_point(spec, p.r, 2.0 * axis_angle - p.theta);
}

// Clock rate of the time-changed vertical Brownian motion:
//   z_t = z_0 + W_{S(t)},  S(t) = integral of area_rate(r_s) ds.
inline double area_rate(const SpaceSpec& spec, double r) {
  switch (spec.base) {
    case Base::Euclidean:
      return 0.25 * r * r;
    case Base::Hyperbolic: {
      double t = std::tanh(0.5 * r);
      return t * t;
    }
    case Base::Spherical: {
      if (r >= kPi) throw std::domain_error("area_rate: pole singularity at r = pi");
      double t = std::tan(0.5 * r);
      return t * t;
    }
  }
  return 0.0;
}

// Coefficient of dW^(2) in the vertical SDE: r/2, tanh(r/2), tan(r/2).
inline double vertical_coefficient(const SpaceSpec& spec, double r) {
  switch (spec.base) {
    case Base::Euclidean:
      return 0.5 * r;
    case Base::Hyperbolic:
      return std::tanh(0.5 * r);
    case Base::Spherical:
      return std::tan(0.5 * r);
  }
  return 0.0;
}

namespace detail {

inline double cross2(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return a[0] * b[1] - b[0] * a[1];
}

inline double triple3(const std::array<double, 3>& a, const std::array<double, 3>& b,
                      const std::array<double, 3>& c) {
  return a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) +
         a[2] * (b[0] * c[1] - b[1] * c[0]);
}

// Minkowski form on R^{2,1} with signature (-,-,+) in our (x, y, w) layout.
inline double mink(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return a[2] * b[2] - a[0] * b[0] - a[1] * b[1];
}

// Interior angle of the hyperboloid triangle at vertex p, between sides to q and s.
inline double hyp_angle(const std::array<double, 3>& p, const std::array<double, 3>& q,
                        const std::array<double, 3>& s) {
  double cq = mink(p, q), cs = mink(p, s);
  std::array<double, 3> vq, vs;
  for (int i = 0; i < 3; ++i) {
    vq[i] = q[i] - cq * p[i];
    vs[i] = s[i] - cs * p[i];
  }
  double nq = std::sqrt(std::max(0.0, -mink(vq, vq)));
  double ns = std::sqrt(std::max(0.0, -mink(vs, vs)));
  if (nq == 0.0 || ns == 0.0) return 0.0;
  double c = -mink(vq, vs) / (nq * ns);
  return std::acos(std::min(1.0, std::max(-1.0, c)));
}

}  // namespace detail

// Signed area of the geodesic triangle (origin, p_prev, p_next); antisymmetric
// in its two arguments, zero for degenerate triangles. Sign follows the
// orientation of the angular sweep around the origin.
inline double swept_area_increment(const SpaceSpec& spec, const BasePoint& p_prev,
                                   const BasePoint& p_next) {
  switch (spec.base) {
    case Base::Euclidean:
      return 0.5 * detail::cross2(p_prev.e, p_next.e);
    case Base::Spherical: {
      // Signed spherical excess with the pole as third vertex (van Oosterom-Strackee).
      const std::array<double, 3> n{0.0, 0.0, 1.0};
      double num = detail::triple3(n, p_prev.e, p_next.e);
      double den = 1.0 + p_prev.e[2] + p_next.e[2] +
                   (p_prev.e[0] * p_next.e[0] + p_prev.e[1] * p_next.e[1] + p_prev.e[2] * p_next.e[2]);
      if (num == 0.0) return 0.0;
      return 2.0 * std::atan2(num, den);
    }
    case Base::Hyperbolic: {
      if (std::min(p_prev.r, p_next.r) > kHypEmbeddedRMax) {
        // Far from the origin the triangle-defect evaluation runs through
        // embedded coordinates of size cosh r and loses precision. The swept
        // area of one small step reduces to coefficient(r) times the
        // tangential displacement, tanh(r/2) * sinh(r) * dtheta, with the
        // exponentially suppressed remainder absorbed into the scheme's
        // weak error. remainder() undoes the branch-cut wrap of theta.
        double r_mid = 0.5 * (p_prev.r + p_next.r);
        double dtheta = std::remainder(p_next.theta - p_prev.theta, kTwoPi);
        return std::tanh(0.5 * r_mid) * std::sinh(r_mid) * dtheta;
      }
      double orient = detail::cross2(p_prev.e, p_next.e);
      if (orient == 0.0) return 0.0;
      const std::array<double, 3> o{0.0, 0.0, 1.0};
      double defect = kPi - detail::hyp_angle(o, p_prev.e, p_next.e) -
                      detail::hyp_angle(p_prev.e, p_next.e, o) -
                      detail::hyp_angle(p_next.e, o, p_prev.e);
      defect = std::max(0.0, defect);
      return orient > 0.0 ? defect : -defect;
    }
  }
  return 0.0;
}

// Reduce a fiber coordinate: identity for a Line fiber, canonical interval
// (-2pi, 2pi] for the Circle fiber (boundary assigned to +2pi).
inline double wrap_fiber(const SpaceSpec& spec, double z) {
  if (spec.fiber == Fiber::Line) return z;
  double w = z - kFourPi * std::round(z / kFourPi);
  if (w <= -kTwoPi) w += kFourPi;
  else if (w > kTwoPi) w -= kFourPi;
  return w;
}

// ---- SU(2) as the unit sphere in R^4 -------------------------------------

inline R4Point su2_cyl_to_r4(double r, double theta, double z) {
  double cr = std::cos(0.5 * r), sr = std::sin(0.5 * r);
  return R4Point{{cr * std::cos(0.5 * z), cr * std::sin(0.5 * z),
                  sr * std::cos(theta - 0.5 * z), sr * std::sin(theta - 0.5 * z)}};
}

struct Su2EquidistantFrame {
  std::array<double, 4> normal;      // N_a: normal of the great sphere S_a
  std::array<double, 4> hemi_axis;   // H_a: in-sphere axis used for the proof decomposition
};

inline Su2EquidistantFrame su2_equidistant_normal(double a) {
  double c = std::cos(0.5 * a), s = std::sin(0.5 * a);
  return {{-s, c, 0.0, 0.0}, {c, s, 0.0, 0.0}};
}

// Sign of the hemisphere cut by S_a, oriented so that +1 is the hemisphere
// containing the cylindrical origin (1,0,0,0), -1 the
// hemisphere containing (0,0,2a), and 0 a dead band of width 1e-12 around S_a.
inline int hemisphere_sign(double a, const R4Point& p) {
  auto frame = su2_equidistant_normal(a);
  double d = 0.0;
  for (int i = 0; i < 4; ++i) d -= p.x[i] * frame.normal[i];
  if (std::fabs(d) < 1e-12) return 0;
  return d > 0.0 ? 1 : -1;
}

// T_b: the fiber-preserving isometry (r, theta, z) -> (r, b - theta, -z).
inline std::array<std::array<double, 4>, 4> su2_isometry_Tb(double b) {
  double c = std::cos(b), s = std::sin(b);
  return {{{1, 0, 0, 0}, {0, -1, 0, 0}, {0, 0, c, s}, {0, 0, s, -c}}};
}

inline R4Point apply_Tb(double b, const R4Point& p) {
  auto m = su2_isometry_Tb(b);
  R4Point q;
  for (int i = 0; i < 4; ++i) {
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) acc += m[i][j] * p.x[j];
    q.x[i] = acc;
  }
  return q;
}

// Hopf projection of a point of S^3 onto the base sphere (unit vector in R^3),
// in the normalization matching the cylindrical coordinates above.
inline std::array<double, 3> su2_hopf_project(const R4Point& p) {
  double cr2 = p.x[0] * p.x[0] + p.x[1] * p.x[1];       // cos^2(r/2)
  double w = 2.0 * cr2 - 1.0;                           // cos r
  // sin r * (cos theta, sin theta) from the product structure
  double x = 2.0 * (p.x[0] * p.x[2] - p.x[1] * p.x[3]);
  double y = 2.0 * (p.x[0] * p.x[3] + p.x[1] * p.x[2]);
  // With e^{i z/2} phases this is sin(r)(cos(theta), sin(theta)) independent of z.
  return {x, y, w};
}

// ---- Non-isotropic Heisenberg -------------------------------------------

// Point of H^n_omega in Cartesian factor coordinates.
struct HnPoint {
  std::vector<double> xy;  // x1, y1, ..., xn, yn
  double z = 0.0;
};

// Homogeneous norm sum_i (x_i^2 + y_i^2 + |z_i|)^{1/2}, z_i = z / sum(alpha).
inline double homogeneous_norm_omega(const std::vector<double>& weights, const HnPoint& g) {
  if (weights.empty() || g.xy.size() != 2 * weights.size())
    throw std::invalid_argument("homogeneous_norm_omega: dimension mismatch");
  double alpha_sum = 0.0;
  for (double a : weights) alpha_sum += a;
  double zi = std::fabs(g.z) / alpha_sum;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    double x = g.xy[2 * i], y = g.xy[2 * i + 1];
    acc += std::sqrt(x * x + y * y + zi);
  }
  return acc;
}

}  // namespace couplab
