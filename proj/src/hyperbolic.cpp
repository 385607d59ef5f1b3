#include "orbitherm/hyperbolic.hpp"

namespace orbitherm {

void Isometry::normalize() {
  // Condition the determinant on unit-scale entries before trusting it.
  double pre = m_.cwiseAbs().maxCoeff();
  if (std::isfinite(pre) && pre > 0.0) m_ /= pre;
  double det = m_.determinant();
  if (!std::isfinite(det) || det <= 0.0)
    raise(errc::invalid_spec, "isometry matrix must have positive finite determinant");
  m_ /= std::sqrt(det);
  logs_ = 0.0;
  rescale();
}

void Isometry::rescale() {
  double s = m_.cwiseAbs().maxCoeff();
  if (!std::isfinite(s) || s <= 0.0)
    raise(errc::numeric_overflow, "isometry product degenerated");
  m_ /= s;
  logs_ += std::log(s);
  double tr = m_(0, 0) + m_(1, 1);
  bool neg = tr < 0.0;
  if (tr == 0.0) {
    if (m_(0, 0) != 0.0)
      neg = m_(0, 0) < 0.0;
    else
      neg = m_(0, 1) < 0.0;
  }
  if (neg) m_ = -m_;
}

Isometry Isometry::pow(long long k) const {
  if (k == 0) return Isometry();
  Isometry base = k > 0 ? *this : inverse();
  unsigned long long e = k > 0 ? static_cast<unsigned long long>(k)
                               : static_cast<unsigned long long>(-(k + 1)) + 1ull;
  Isometry acc;
  Isometry sq = base;
  while (e > 0) {
    if (e & 1ull) acc = acc * sq;
    e >>= 1;
    if (e > 0) sq = sq * sq;
  }
  return acc;
}

IsometryClass classify_isometry(const Isometry& g, bool require_hyperbolic) {
  const Eigen::Matrix2d& m = g.scaled();
  double L = g.log_scale();
  double str = std::abs(m(0, 0) + m(1, 1));  // |trace| = e^L * str
  IsometryClass out;
  if (str == 0.0 || L + std::log(str) <= std::log(4.0)) {
    // |trace| <= 4: representable, use the direct comparisons.
    double t = str == 0.0 ? 0.0 : std::exp(L + std::log(str));
    if (require_hyperbolic && std::abs(t - 2.0) <= trace_tol)
      raise(errc::ambiguous_classification,
            "trace within tolerance of 2; cannot certify hyperbolic");
    if (t < 2.0 - trace_tol) {
      out.kind = IsoKind::Elliptic;
      return out;
    }
    if (t <= 2.0 + trace_tol) {
      out.kind = IsoKind::Parabolic;
      return out;
    }
  }
  out.kind = IsoKind::Hyperbolic;
  out.length = translation_length(g);

  double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
  GeodesicLine axis;
  // scaled() keeps its largest entry at 1, so this test is already relative.
  if (std::abs(c) <= 1e-14) {
    // Fixed points: inf and b / (d - a); inf attracts iff |a| > |d|.
    BoundaryPoint inf = BoundaryPoint::infinity();
    BoundaryPoint fin = BoundaryPoint::real(b / (d - a));
    if (std::abs(a) > std::abs(d)) {
      axis.xi_plus = inf;
      axis.xi_minus = fin;
    } else {
      axis.xi_plus = fin;
      axis.xi_minus = inf;
    }
  } else {
    // Roots of c z^2 + (d - a) z - b = 0 (scale-free), cancellation-free form.
    // Discriminant: (d - a)^2 + 4 b c = str^2 - 4 det(m) with det(m) = e^{-2L}.
    double disc = str * str - 4.0 * std::exp(-2.0 * L);
    double B = d - a;
    double q = -0.5 * (B + std::copysign(std::sqrt(disc), B == 0.0 ? 1.0 : B));
    double r1 = q / c;
    double r2 = -b / q;
    // Attracting fixed point has the larger derivative denominator |c xi + d|
    // (their product is det(m) > 0, so exactly one side of the true unit).
    double m1 = std::abs(c * r1 + d);
    double m2 = std::abs(c * r2 + d);
    if (m1 > m2) {
      axis.xi_plus = BoundaryPoint::real(r1);
      axis.xi_minus = BoundaryPoint::real(r2);
    } else {
      axis.xi_plus = BoundaryPoint::real(r2);
      axis.xi_minus = BoundaryPoint::real(r1);
    }
  }
  out.axis = axis;
  return out;
}

double translation_length(const Isometry& g) {
  const Eigen::Matrix2d& m = g.scaled();
  double str = std::abs(m(0, 0) + m(1, 1));
  require(str > 0.0, errc::not_closed_geodesic,
          "translation length requires a hyperbolic isometry");
  double logt = g.log_scale() + std::log(str);
  if (logt > 25.0) return 2.0 * logt;  // 2 acosh(t/2) = 2 log t - O(t^{-2})
  double t = std::exp(logt);
  require(t > 2.0 + trace_tol, errc::not_closed_geodesic,
          "translation length requires a hyperbolic isometry");
  return 2.0 * acosh1p(t / 2.0 - 1.0);
}

Isometry axis_generator(double u, double v, double ell) {
  require(ell > 0.0, errc::invalid_spec, "axis generator needs positive length");
  require(u != v, errc::invalid_spec, "axis endpoints must be distinct");
  double lam = std::exp(ell / 2.0);
  double den = v - u;
  double a = (v * lam - u / lam) / den;
  double b = u * v * (1.0 / lam - lam) / den;
  double c = (lam - 1.0 / lam) / den;
  double d = (v / lam - u * lam) / den;
  return Isometry(a, b, c, d);
}

Disk isometric_circle(const Isometry& g) {
  const Eigen::Matrix2d& m = g.scaled();
  require(std::abs(m(1, 0)) > 0.0, errc::invalid_spec,
          "isometric circle undefined when c == 0");
  // center -d/c is scale-free; the radius 1/|c| needs the true entry.
  return {-m(1, 1) / m(1, 0), std::exp(-g.log_scale()) / std::abs(m(1, 0))};
}

HPoint apply_isometry(const Isometry& g, const HPoint& z) {
  const Eigen::Matrix2d& m = g.scaled();
  double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
  double cxd = c * z.x + d;
  double den = cxd * cxd + c * c * z.y * z.y;
  if (!(den > 0.0) || !std::isfinite(den))
    raise(errc::numeric_overflow, "isometry application degenerate");
  double xn = (a * z.x + b) * cxd + a * c * z.y * z.y;
  // x is scale-free; the height carries the structural det(m) = e^{-2L}. It
  // underflows to 0 for very long words (a boundary point in the limit);
  // callers needing displacements at that range use orbit_displacement.
  return {xn / den, (z.y / den) * std::exp(-2.0 * g.log_scale())};
}

BoundaryPoint apply_boundary(const Isometry& g, const BoundaryPoint& p) {
  const Eigen::Matrix2d& m = g.scaled();
  double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
  if (p.at_infinity) {
    if (c == 0.0) return BoundaryPoint::infinity();
    return BoundaryPoint::real(a / c);
  }
  double den = c * p.value + d;
  if (den == 0.0) return BoundaryPoint::infinity();
  return BoundaryPoint::real((a * p.value + b) / den);
}

TangentVector apply_tangent(const Isometry& g, const TangentVector& v) {
  const Eigen::Matrix2d& m = g.scaled();
  double c = m(1, 0), d = m(1, 1);
  HPoint nb = apply_isometry(g, v.base);
  double rot = -2.0 * std::atan2(c * v.base.y, c * v.base.x + d);
  return {nb, normalize_angle(v.angle + rot)};
}

double orbit_displacement(const Isometry& g, const HPoint& z) {
  const Eigen::Matrix2d& m = g.scaled();
  double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
  double L = g.log_scale();
  double cxd = c * z.x + d;
  double den = cxd * cxd + c * c * z.y * z.y;
  if (!(den > 0.0) || !std::isfinite(den))
    raise(errc::numeric_overflow, "isometry application degenerate");
  double wx = ((a * z.x + b) * cxd + a * c * z.y * z.y) / den;
  double dx2 = (wx - z.x) * (wx - z.x);
  if (L < 150.0) {
    // Image height representable: direct two-point formula.
    double wy = (z.y / den) * std::exp(-2.0 * L);
    if (wy > 0.0 && std::isfinite(wy)) {
      double q = (dx2 + (wy - z.y) * (wy - z.y)) / (2.0 * z.y * wy);
      if (std::isfinite(q)) return acosh1p(q);
    }
  }
  // Image height wy = (z.y / den) e^{-2L} is negligible against z.y:
  // cosh d - 1 ~ (dx^2 + z.y^2) / (2 z.y wy), kept in log form.
  double log_q = 2.0 * L + std::log(dx2 + z.y * z.y) + std::log(den) -
                 std::log(2.0 * z.y * z.y);
  return std::log(2.0) + log_q;  // acosh(1 + q) = log(2q) + O(1/q)
}

Eigen::Matrix2d frame_of(const TangentVector& v) {
  double sy = std::sqrt(v.base.y);
  Eigen::Matrix2d A;
  A << sy, v.base.x / sy, 0.0, 1.0 / sy;
  double half = 0.5 * (v.angle - M_PI_2);
  double cs = std::cos(half), sn = std::sin(half);
  Eigen::Matrix2d K;
  K << cs, sn, -sn, cs;
  return A * K;
}

HPoint base_of_frame(const Eigen::Matrix2d& f) {
  double a = f(0, 0), b = f(0, 1), c = f(1, 0), d = f(1, 1);
  double den = c * c + d * d;
  return {(a * c + b * d) / den, 1.0 / den};
}

double angle_of_frame(const Eigen::Matrix2d& f) {
  return normalize_angle(M_PI_2 - 2.0 * std::atan2(f(1, 0), f(1, 1)));
}

TangentVector vector_of_frame(const Eigen::Matrix2d& f) {
  return {base_of_frame(f), angle_of_frame(f)};
}

TangentVector geodesic_flow_step(const TangentVector& v, double t) {
  Eigen::Matrix2d f = frame_of(v);
  double e = std::exp(t / 2.0);
  Eigen::Matrix2d d;
  d << e, 0.0, 0.0, 1.0 / e;
  return vector_of_frame(f * d);
}

double bundle_dist(const TangentVector& v, const TangentVector& w, int grid_steps) {
  require(grid_steps >= 2, errc::invalid_config, "bundle distance grid needs >= 2 nodes");
  // Frames degenerate once a base height nears the boundary; fall back to the
  // base distance there (a lower bound, already O(300) or infinite).
  if (v.base.y < 1e-150 || w.base.y < 1e-150) return hyp_dist(v.base, w.base);
  Eigen::Matrix2d fv = frame_of(v);
  Eigen::Matrix2d fw = frame_of(w);
  double worst = 0.0;
  for (int j = 0; j < grid_steps; ++j) {
    double t = static_cast<double>(j) / (grid_steps - 1);
    double E = std::exp(t);
    double u = hyp_cosh_excess(flowed_base(fv, E), flowed_base(fw, E));
    if (u > worst) worst = u;
  }
  return dist_from_excess(worst);
}

}  // namespace orbitherm
