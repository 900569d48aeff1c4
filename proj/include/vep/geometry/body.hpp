#ifndef VEP_GEOMETRY_BODY_HPP
#define VEP_GEOMETRY_BODY_HPP

#include "vep/geometry/sets.hpp"

#include <numbers>
#include <string>

namespace vep {

inline constexpr double kCapAngleDeg = 2.0;
/// Radius standing in for an unbounded cone part when points must be listed.
inline constexpr double kUnboundedCapRadius = 1e3;

/// Truncated cone K ∩ radius·B.
struct CapPart {
  ConeRepr cone;
  double radius = 1.0;
};

/// conv(hull_points) ⊕ ball_radius·B ⊕ Σ caps. Empty iff hull_points is empty.
struct ConvexBody {
  int dim = 0;
  std::vector<Vec> hull_points;
  double ball_radius = 0.0;
  std::vector<CapPart> cone_parts;
  std::string label;

  bool empty() const { return hull_points.empty(); }

  static ConvexBody empty_body(int dim, std::string label = {}) { return {dim, {}, 0.0, {}, std::move(label)}; }
  static ConvexBody point(const Vec& p, std::string label = {}) {
    return {static_cast<int>(p.size()), {p}, 0.0, {}, std::move(label)};
  }
  static ConvexBody polytope(int dim, std::vector<Vec> pts, std::string label = {}) {
    return {dim, std::move(pts), 0.0, {}, std::move(label)};
  }
  static ConvexBody ball(int dim, double r, std::string label = {}) {
    return {dim, {Vec::Zero(dim)}, r, {}, std::move(label)};
  }
  static ConvexBody cap(const ConeRepr& K, double radius = 1.0, std::string label = {}) {
    return {K.dim, {Vec::Zero(K.dim)}, 0.0, {CapPart{K, radius}}, std::move(label)};
  }
};

/// Extreme points of a finite set: exact in dimensions 1 and 2, deduplication otherwise.
inline std::vector<Vec> extreme_points(const std::vector<Vec>& pts, double tol = 1e-12) {
  if (pts.empty()) return {};
  const auto dim = pts.front().size();
  if (dim == 1) {
    Vec lo = pts.front(), hi = pts.front();
    for (const auto& p : pts) {
      if (p[0] < lo[0]) lo = p;
      if (p[0] > hi[0]) hi = p;
    }
    std::vector<Vec> out{lo};
    push_unique(out, hi, tol);
    return out;
  }
  std::vector<Vec> uniq;
  for (const auto& p : pts) push_unique(uniq, p, tol);
  if (dim != 2 || uniq.size() <= 2) return uniq;
  std::sort(uniq.begin(), uniq.end(), [](const Vec& a, const Vec& b) { return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]); });
  auto cross = [](const Vec& o, const Vec& a, const Vec& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  double scale = 0.0;
  for (const auto& p : uniq) scale = std::max(scale, p.lpNorm<Eigen::Infinity>());
  const double eps = 1e-12 * std::max(1.0, scale * scale);
  std::vector<Vec> hull(2 * uniq.size());
  std::size_t k = 0;
  for (const auto& p : uniq) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= eps) --k;
    hull[k++] = p;
  }
  for (std::size_t i = uniq.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], uniq[i]) <= eps) --k;
    hull[k++] = uniq[i];
  }
  hull.resize(k > 1 ? k - 1 : k);
  if (hull.empty()) hull.push_back(uniq.front());
  return hull;
}

/// Points whose hull inner-approximates K ∩ radius·B: angular refinement at kCapAngleDeg when the
/// cone spans at most a plane, unit generators plus pairwise midpoints otherwise.
inline std::vector<Vec> cap_points(const ConeRepr& K, double radius, double angle_deg = kCapAngleDeg) {
  const int dim = K.dim;
  std::vector<Vec> out{Vec::Zero(dim)};
  if (!(radius > 0)) return out;
  if (!std::isfinite(radius)) radius = kUnboundedCapRadius;
  std::vector<Vec> gens;
  for (const auto& g : K.generator_list()) {
    if (g.norm() > 1e-14) push_unique(gens, Vec(g.normalized()), 1e-12);
  }
  if (gens.empty()) return out;
  Mat G = columns_matrix(gens, dim);
  Eigen::JacobiSVD<Mat> svd(G, Eigen::ComputeFullU);
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    if (svd.singularValues()[i] > 1e-10) ++rank;
  }
  if (rank == 1) {
    for (const auto& g : gens) push_unique(out, Vec(radius * g), 1e-12);
    return out;
  }
  if (rank == 2) {
    const Vec u1 = svd.matrixU().col(0), u2 = svd.matrixU().col(1);
    std::vector<double> ang;
    for (const auto& g : gens) ang.push_back(std::atan2(g.dot(u2), g.dot(u1)));
    std::sort(ang.begin(), ang.end());
    const double two_pi = 2 * std::numbers::pi;
    double best_gap = -1, start = 0;
    for (std::size_t i = 0; i < ang.size(); ++i) {
      const double next = i + 1 < ang.size() ? ang[i + 1] : ang.front() + two_pi;
      const double gap = next - ang[i];
      if (gap > best_gap) {
        best_gap = gap;
        start = next;
      }
    }
    double span = two_pi - best_gap;
    bool full = false;
    if (best_gap < std::numbers::pi - 1e-9) {
      span = two_pi;
      full = true;
    }
    const double step = angle_deg * std::numbers::pi / 180.0;
    const int steps = std::max(1, static_cast<int>(std::ceil(span / step - 1e-9)));
    for (int k = 0; k <= steps; ++k) {
      if (full && k == steps) break;
      const double t = start + span * k / steps;
      push_unique(out, Vec(radius * (std::cos(t) * u1 + std::sin(t) * u2)), 1e-12);
    }
    return out;
  }
  for (const auto& g : gens) push_unique(out, Vec(radius * g), 1e-12);
  for (std::size_t i = 0; i < gens.size(); ++i) {
    for (std::size_t j = i + 1; j < gens.size(); ++j) {
      Vec m = gens[i] + gens[j];
      if (m.norm() > 1e-9) push_unique(out, Vec(radius * m.normalized()), 1e-12);
    }
  }
  return out;
}

/// Support function h(d) = sup <y, d> over the body; -inf for an empty body, +inf possible.
inline double support(const ConvexBody& body, const Vec& d) {
  if (body.empty()) return -kInf;
  double h = -kInf;
  for (const auto& p : body.hull_points) h = std::max(h, p.dot(d));
  h += body.ball_radius * d.norm();
  for (const auto& part : body.cone_parts) {
    const double pn = project(d, part.cone).norm();
    if (!std::isfinite(part.radius)) {
      if (pn > 1e-12 * std::max(1.0, d.norm())) return kInf;
    } else {
      h += part.radius * pn;
    }
  }
  return h;
}

inline std::vector<Vec> minkowski_points(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  std::vector<Vec> out;
  out.reserve(a.size() * b.size());
  for (const auto& p : a) {
    for (const auto& q : b) out.push_back(p + q);
  }
  return extreme_points(out);
}

/// Finite point list whose hull equals conv(hull_points) ⊕ discretized caps (ball excluded).
inline std::vector<Vec> discretize(const ConvexBody& body) {
  if (body.empty()) return {};
  std::vector<Vec> pts = extreme_points(body.hull_points);
  for (const auto& part : body.cone_parts) pts = minkowski_points(pts, cap_points(part.cone, part.radius));
  return pts;
}

struct MinNormPoint {
  Vec point;
  double dist0 = 0.0;
};

/// Point of the body nearest the origin.
inline MinNormPoint min_norm_point(const ConvexBody& body) {
  if (body.empty()) throw GeometryError("min-norm point of an empty body");
  auto pts = discretize(body);
  auto mn = wolfe_min_norm(pts, 1e-12);
  MinNormPoint r;
  const double q = mn.norm;
  r.dist0 = std::max(q - body.ball_radius, 0.0);
  r.point = q > 0 ? Vec(mn.point * (r.dist0 / q)) : Vec(mn.point);
  return r;
}

inline ConvexBody minkowski_sum(const ConvexBody& a, const ConvexBody& b) {
  if (a.dim != b.dim) throw GeometryError("Minkowski sum of bodies of different dimension");
  ConvexBody r;
  r.dim = a.dim;
  r.label = a.label.empty() ? b.label : (b.label.empty() ? a.label : a.label + " + " + b.label);
  if (a.empty() || b.empty()) return r;
  r.hull_points = minkowski_points(a.hull_points, b.hull_points);
  r.ball_radius = a.ball_radius + b.ball_radius;
  r.cone_parts = a.cone_parts;
  r.cone_parts.insert(r.cone_parts.end(), b.cone_parts.begin(), b.cone_parts.end());
  return r;
}

/// s·body for s >= 0.
inline ConvexBody scaled(const ConvexBody& a, double s) {
  if (s < 0) throw GeometryError("negative body scaling");
  ConvexBody r = a;
  for (auto& p : r.hull_points) p *= s;
  r.ball_radius *= s;
  for (auto& c : r.cone_parts) c.radius *= s;
  return r;
}

inline Vec embed_vector(const Vec& v, int total_dim, int offset) {
  Vec out = Vec::Zero(total_dim);
  out.segment(offset, v.size()) = v;
  return out;
}

inline ConeRepr embed_cone(const ConeRepr& K, int total_dim, int offset) {
  std::vector<Vec> g;
  for (const auto& v : K.generator_list()) g.push_back(embed_vector(v, total_dim, offset));
  return ConeRepr::from_generators(total_dim, g);
}

/// Places the body's coordinates at [offset, offset + dim) of a larger space, zeros elsewhere.
/// A ball part becomes a ball of the coordinate subspace (a truncated subspace cap).
inline ConvexBody embed(const ConvexBody& a, int total_dim, int offset) {
  ConvexBody r;
  r.dim = total_dim;
  r.label = a.label;
  for (const auto& p : a.hull_points) r.hull_points.push_back(embed_vector(p, total_dim, offset));
  for (const auto& c : a.cone_parts) r.cone_parts.push_back({embed_cone(c.cone, total_dim, offset), c.radius});
  if (a.ball_radius > 0) {
    if (a.dim == total_dim) {
      r.ball_radius = a.ball_radius;
    } else {
      r.cone_parts.push_back({embed_cone(ConeRepr::whole(a.dim), total_dim, offset), a.ball_radius});
    }
  }
  return r;
}

/// Product body A × B.
inline ConvexBody product(const ConvexBody& a, const ConvexBody& b) {
  const int total = a.dim + b.dim;
  return minkowski_sum(embed(a, total, 0), embed(b, total, a.dim));
}

/// Euclidean projection onto a body given by its discretized points and ball radius.
inline Vec project_onto_points_ball(const std::vector<Vec>& pts, double radius, const Vec& y) {
  std::vector<Vec> shifted;
  shifted.reserve(pts.size());
  for (const auto& p : pts) shifted.push_back(p - y);
  const Vec q = y + wolfe_min_norm(shifted, 1e-14).point;
  const Vec diff = y - q;
  const double dn = diff.norm();
  if (dn <= radius) return y;
  return q + radius * diff / dn;
}

inline Vec project_onto_body(const ConvexBody& body, const Vec& y) {
  if (body.empty()) throw GeometryError("projection onto an empty body");
  return project_onto_points_ball(discretize(body), body.ball_radius, y);
}

struct Decomposition {
  std::vector<Vec> parts;
  double residual = kInf;  // ||Σ parts - target||
  int iterations = 0;
};

/// Minimum-energy split target = Σ a_i with a_i in body i (Dykstra's alternating projections from
/// the origin of the product space). Each returned part lies in its body.
inline Decomposition min_energy_decomposition(const std::vector<ConvexBody>& bodies, const Vec& target,
                                              int max_iter = 20000, double tol = 1e-13) {
  Decomposition out;
  const std::size_t k = bodies.size();
  if (k == 0) return out;
  std::vector<std::vector<Vec>> pts;
  for (const auto& b : bodies) pts.push_back(discretize(b));
  const auto dim = target.size();
  std::vector<Vec> x(k, Vec::Zero(dim)), p(k, Vec::Zero(dim)), q(k, Vec::Zero(dim)), y(k, Vec::Zero(dim));
  for (int it = 0; it < max_iter; ++it) {
    double change = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      Vec yi = project_onto_points_ball(pts[i], bodies[i].ball_radius, Vec(x[i] + p[i]));
      p[i] = x[i] + p[i] - yi;
      change += (yi - y[i]).squaredNorm();
      y[i] = yi;
    }
    Vec sum = Vec::Zero(dim);
    for (std::size_t i = 0; i < k; ++i) sum += y[i] + q[i];
    const Vec corr = (sum - target) / static_cast<double>(k);
    for (std::size_t i = 0; i < k; ++i) {
      Vec xi = y[i] + q[i] - corr;
      q[i] = y[i] + q[i] - xi;
      change += (xi - x[i]).squaredNorm();
      x[i] = xi;
    }
    out.iterations = it + 1;
    if (it > 2 && change <= tol * tol) break;
  }
  out.parts = y;
  Vec sum = Vec::Zero(dim);
  for (const auto& v : y) sum += v;
  out.residual = (sum - target).norm();
  return out;
}

}  // namespace vep

#endif  // VEP_GEOMETRY_BODY_HPP
