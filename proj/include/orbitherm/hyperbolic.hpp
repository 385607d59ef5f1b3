#pragma once
#include <Eigen/Dense>
#include <cmath>
#include <optional>

#include "orbitherm/errors.hpp"

namespace orbitherm {

inline constexpr double trace_tol = 1e-9;

// Stable arccosh(1 + u) for u >= 0.
inline double acosh1p(double u) {
  if (u < 0) u = 0;
  return std::log1p(u + std::sqrt(u * (u + 2.0)));
}

// Point of the upper half-plane.
struct HPoint {
  double x = 0.0;
  double y = 1.0;
};

// Point of the boundary circle R u {inf}.
struct BoundaryPoint {
  double value = 0.0;
  bool at_infinity = false;
  static BoundaryPoint infinity() { return {0.0, true}; }
  static BoundaryPoint real(double v) { return {v, false}; }
};

// Unit tangent vector: base point plus direction angle in [0, 2*pi)
// measured against the positive x-axis in the Euclidean chart.
struct TangentVector {
  HPoint base;
  double angle = 0.0;
};

struct GeodesicLine {
  BoundaryPoint xi_minus;  // repelling endpoint
  BoundaryPoint xi_plus;   // attracting endpoint
};

// Euclidean disk centered on the real axis (a boundary half-disk).
struct Disk {
  double center = 0.0;
  double radius = 1.0;
  bool contains_boundary(const BoundaryPoint& p, double slack = 0.0) const {
    if (p.at_infinity) return false;
    return std::abs(p.value - center) < radius + slack;
  }
  bool contains_point(const HPoint& z, double slack = 0.0) const {
    double dx = z.x - center;
    double rr = radius + slack;
    return dx * dx + z.y * z.y < rr * rr;
  }
};

// Orientation-preserving isometry of H^2. The true PSL(2, R) matrix is
// e^{logs_} * m_ with determinant 1 held structurally (so det(m_) is
// e^{-2 logs_} by construction and never recomputed): products of long words
// keep m_ at unit scale instead of overflowing or losing the determinant to
// cancellation. The sign of m_ is fixed so that its trace is >= 0 (trace == 0
// ties broken by a > 0, then b > 0).
class Isometry {
 public:
  Isometry() : m_(Eigen::Matrix2d::Identity()) {}
  explicit Isometry(const Eigen::Matrix2d& m) : m_(m) { normalize(); }
  Isometry(double a, double b, double c, double d) {
    m_ << a, b, c, d;
    normalize();
  }

  // Entries of the true matrix. These can overflow for very long words;
  // scale-aware code should use scaled() and log_scale() instead.
  double a() const { return std::exp(logs_) * m_(0, 0); }
  double b() const { return std::exp(logs_) * m_(0, 1); }
  double c() const { return std::exp(logs_) * m_(1, 0); }
  double d() const { return std::exp(logs_) * m_(1, 1); }
  double trace() const { return std::exp(logs_) * (m_(0, 0) + m_(1, 1)); }
  Eigen::Matrix2d matrix() const { return std::exp(logs_) * m_; }

  // Scale-split view: true matrix = e^{log_scale()} * scaled(), and scaled()
  // has its largest entry at magnitude 1.
  const Eigen::Matrix2d& scaled() const { return m_; }
  double log_scale() const { return logs_; }

  Isometry inverse() const {
    Eigen::Matrix2d adj;
    adj << m_(1, 1), -m_(0, 1), -m_(1, 0), m_(0, 0);
    return Isometry(adj, logs_, raw_tag{});
  }
  Isometry operator*(const Isometry& o) const {
    return Isometry(m_ * o.m_, logs_ + o.logs_, raw_tag{});
  }
  Isometry pow(long long k) const;

  bool is_identity(double tol = 1e-12) const {
    if (std::abs(logs_) > 0.7) return false;  // scale alone rules it out
    double s = std::exp(logs_);
    return std::abs(s * m_(0, 0) - 1.0) <= tol && std::abs(s * m_(0, 1)) <= tol &&
           std::abs(s * m_(1, 0)) <= tol && std::abs(s * m_(1, 1) - 1.0) <= tol;
  }

 private:
  struct raw_tag {};
  // Internal: m already has determinant e^{-2 logs} structurally.
  Isometry(const Eigen::Matrix2d& m, double logs, raw_tag) : m_(m), logs_(logs) {
    rescale();
  }
  void normalize();
  void rescale();
  Eigen::Matrix2d m_;
  double logs_ = 0.0;
};

enum class IsoKind { Elliptic, Parabolic, Hyperbolic };

struct IsometryClass {
  IsoKind kind = IsoKind::Hyperbolic;
  std::optional<double> length;      // translation length, hyperbolic only
  std::optional<GeodesicLine> axis;  // hyperbolic only
};

IsometryClass classify_isometry(const Isometry& g, bool require_hyperbolic = false);
double translation_length(const Isometry& g);

// Hyperbolic isometry with prescribed axis endpoints (finite, u != v; v
// attracting) and translation length ell > 0.
Isometry axis_generator(double u, double v, double ell);

// Isometric circle I(g) = {|cz + d| = 1}; requires c != 0.
Disk isometric_circle(const Isometry& g);

HPoint apply_isometry(const Isometry& g, const HPoint& z);
BoundaryPoint apply_boundary(const Isometry& g, const BoundaryPoint& p);
TangentVector apply_tangent(const Isometry& g, const TangentVector& v);

// cosh d(z, w) - 1 (cheap monotone surrogate for comparisons).
inline double hyp_cosh_excess(const HPoint& z, const HPoint& w) {
  double dx = z.x - w.x;
  double dy = z.y - w.y;
  return (dx * dx + dy * dy) / (2.0 * z.y * w.y);
}
inline double dist_from_excess(double u) { return acosh1p(u); }
inline double excess_from_dist(double d) {
  if (d > 700.0) d = 700.0;
  return std::cosh(d) - 1.0;
}
inline double hyp_dist(const HPoint& z, const HPoint& w) {
  return acosh1p(hyp_cosh_excess(z, w));
}

// d(z, g z), stable for arbitrarily long words: the image height
// y e^{-2 log_scale} / |cz + d|^2 is kept in log form, so displacements far
// beyond the range of apply_isometry (image height underflows) stay exact.
double orbit_displacement(const Isometry& g, const HPoint& z);

inline double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);  // [0, 2*pi)
  if (a < 0.0) a += 2.0 * M_PI;
  if (a >= 2.0 * M_PI) a = 0.0;  // fmod of a tiny negative can round up to 2*pi
  return a;
}

// Frame calculus: T^1 H^2 is identified with PSL(2, R); the geodesic flow is
// the right action of diag(e^{t/2}, e^{-t/2}).
Eigen::Matrix2d frame_of(const TangentVector& v);
HPoint base_of_frame(const Eigen::Matrix2d& f);
double angle_of_frame(const Eigen::Matrix2d& f);
TangentVector vector_of_frame(const Eigen::Matrix2d& f);

// Base point of the frame flowed by time t, passed as E = e^t.
inline HPoint flowed_base(const Eigen::Matrix2d& f, double E) {
  double a = f(0, 0), b = f(0, 1), c = f(1, 0), d = f(1, 1);
  double den = c * c * E * E + d * d;
  return {(a * c * E * E + b * d) / den, E / den};
}

TangentVector geodesic_flow_step(const TangentVector& v, double t);

inline TangentVector flip(const TangentVector& v) {
  // Branch keeps the result near [0, 2*pi) with one rounding; the subtraction
  // leg is exact (Sterbenz), so flip(flip(v)) drifts by at most one ulp.
  // normalize_angle is an exact identity in range and only catches the
  // tie-to-even case where angle + pi rounds up to exactly 2*pi.
  return {v.base, normalize_angle(v.angle < M_PI ? v.angle + M_PI : v.angle - M_PI)};
}

// Bundle distance: max over a uniform grid of t in [0, 1] of the base
// distance between the two flowed vectors.
double bundle_dist(const TangentVector& v, const TangentVector& w, int grid_steps = 33);

}  // namespace orbitherm
