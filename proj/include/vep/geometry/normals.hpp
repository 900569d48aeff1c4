#ifndef VEP_GEOMETRY_NORMALS_HPP
#define VEP_GEOMETRY_NORMALS_HPP

#include "vep/geometry/body.hpp"

#include <numbers>

namespace vep {

/// Union of closed convex cones (each in generator form); the union may be nonconvex.
struct RayUnion {
  int dim = 0;
  std::vector<ConeRepr> branches;
  bool approximate = false;

  static RayUnion zero(int dim) { return {dim, {ConeRepr::zero(dim)}, false}; }
  static RayUnion single(const ConeRepr& K) { return {K.dim, {ConeRepr::from_generators(K.dim, K.generator_list())}, false}; }

  bool contains(const Vec& v, double tol = 1e-9) const {
    return std::any_of(branches.begin(), branches.end(), [&](const ConeRepr& K) { return vep::contains(K, v, tol); });
  }

  bool is_zero() const {
    return std::all_of(branches.begin(), branches.end(), [](const ConeRepr& K) { return K.generator_list().empty(); });
  }

  std::vector<Vec> rays() const {
    std::vector<Vec> out;
    for (const auto& b : branches) {
      for (const auto& g : b.generator_list()) push_unique(out, Vec(g.normalized()), 1e-9);
    }
    return out;
  }
};

/// Branchwise cartesian product N1 × N2.
inline RayUnion product(const RayUnion& a, const RayUnion& b) {
  RayUnion r;
  r.dim = a.dim + b.dim;
  r.approximate = a.approximate || b.approximate;
  for (const auto& ka : a.branches) {
    for (const auto& kb : b.branches) {
      std::vector<Vec> g;
      for (const auto& v : ka.generator_list()) g.push_back(embed_vector(v, r.dim, 0));
      for (const auto& v : kb.generator_list()) g.push_back(embed_vector(v, r.dim, a.dim));
      r.branches.push_back(ConeRepr::from_generators(r.dim, g));
    }
  }
  return r;
}

inline RayUnion negate(const RayUnion& a) {
  RayUnion r = a;
  for (auto& b : r.branches) {
    auto g = b.generator_list();
    for (auto& v : g) v = -v;
    b = ConeRepr::from_generators(a.dim, g);
  }
  return r;
}

inline constexpr double kOnSetTol = 1e-7;

/// Normal cone of a closed convex set at a point of the set.
inline RayUnion normal_cone(const ConvexSetRepr& S, const Vec& point, double tol_on = kOnSetTol) {
  const int dim = S.dim;
  if (dist(point, S) > tol_on * std::max(1.0, point.norm())) throw GeometryError("normal cone requested at a point off the set");
  std::vector<Vec> gens;
  switch (S.form) {
    case ConvexSetRepr::Form::box:
      for (int i = 0; i < dim; ++i) {
        if (std::isfinite(S.lower[i]) && point[i] - S.lower[i] <= tol_on * std::max(1.0, std::abs(S.lower[i]))) gens.push_back(-Vec::Unit(dim, i));
        if (std::isfinite(S.upper[i]) && S.upper[i] - point[i] <= tol_on * std::max(1.0, std::abs(S.upper[i]))) gens.push_back(Vec::Unit(dim, i));
      }
      break;
    case ConvexSetRepr::Form::polytope: {
      std::vector<Vec> rows;
      for (const auto& v : S.vertices) {
        if ((v - point).norm() > tol_on) rows.push_back(v - point);
      }
      gens = halfspace_cone_generators(rows, dim);
      break;
    }
    case ConvexSetRepr::Form::halfspaces:
      for (Eigen::Index i = 0; i < S.A.rows(); ++i) {
        const Vec a = S.A.row(i).transpose();
        if (S.b[i] - a.dot(point) <= tol_on * std::max(1.0, a.norm())) gens.push_back(a);
      }
      break;
  }
  return RayUnion::single(ConeRepr::from_generators(dim, gens));
}

/// Normal cone of a closed convex cone at one of its points: K° ∩ point^⊥.
inline RayUnion normal_cone(const ConeRepr& K, const Vec& point, double tol_on = kOnSetTol) {
  if (dist(point, K) > tol_on * std::max(1.0, point.norm())) throw GeometryError("normal cone requested at a point off the cone");
  std::vector<Vec> gens;
  switch (K.form) {
    case ConeRepr::Form::orthant:
      for (int i = 0; i < K.dim; ++i) {
        if (point[i] <= tol_on) gens.push_back(-Vec::Unit(K.dim, i));
      }
      break;
    case ConeRepr::Form::generators: {
      auto rows = K.generator_list();
      if (point.norm() > 0) {
        rows.push_back(point);
        rows.push_back(-point);
      }
      gens = halfspace_cone_generators(rows, K.dim);
      break;
    }
    case ConeRepr::Form::halfspaces:
      for (const auto& a : K.rows) {
        if (std::abs(a.dot(point)) <= tol_on * std::max(1.0, a.norm() * point.norm())) gens.push_back(a);
      }
      break;
  }
  return RayUnion::single(ConeRepr::from_generators(K.dim, gens));
}

/// N(x; S) ∩ B inside S, the unit projection direction outside.
inline ConvexBody truncated_normal(const Vec& x, const ConvexSetRepr& S, double tol_on = kOnSetTol) {
  const Vec p = project(x, S);
  const double d = (x - p).norm();
  if (d <= tol_on * std::max(1.0, x.norm())) {
    auto N = normal_cone(S, p, tol_on);
    return ConvexBody::cap(N.branches.front(), 1.0, "truncated-normal");
  }
  return ConvexBody::point((x - p) / d, "truncated-normal");
}

/// Generator sets of one normal branch sampled along a sequence approaching the base point
/// (ordered by shrinking distance). The last entry is taken as the limit.
struct NormalBranch {
  std::vector<std::vector<Vec>> samples;
};

/// Union of limit cones of the supplied branches. Throws when the last two samples of a branch
/// disagree by more than tol_ray (in unit-direction distance).
inline RayUnion limiting_normal_graph(const std::vector<NormalBranch>& branches, int dim, double tol_ray = 1e-3) {
  RayUnion r;
  r.dim = dim;
  for (const auto& br : branches) {
    if (br.samples.empty()) continue;
    const auto& last = br.samples.back();
    if (br.samples.size() >= 2) {
      const auto& prev = br.samples[br.samples.size() - 2];
      auto unit = [](const std::vector<Vec>& g) {
        std::vector<Vec> u;
        for (const auto& v : g) {
          if (v.norm() > 1e-14) u.push_back(v.normalized());
        }
        return u;
      };
      auto a = unit(last), b = unit(prev);
      auto covered = [&](const std::vector<Vec>& from, const std::vector<Vec>& in) {
        return std::all_of(from.begin(), from.end(), [&](const Vec& v) {
          return std::any_of(in.begin(), in.end(), [&](const Vec& w) { return (v - w).norm() <= tol_ray; });
        });
      };
      if (!covered(a, b) || !covered(b, a)) throw GeometryError("normal directions did not stabilize along the sample sequence");
    }
    r.branches.push_back(ConeRepr::from_generators(dim, last));
  }
  if (r.branches.empty()) r.branches.push_back(ConeRepr::zero(dim));
  return r;
}

/// Limiting normals estimated from proximal normals y - proj(y) at points y around the base point.
/// Only directions that reappear at the two smallest radii are kept; always flagged approximate.
inline RayUnion sampled_limiting_normals(const std::function<Vec(const Vec&)>& projector, const Vec& point,
                                         const std::vector<double>& radii, int n_dirs, std::uint64_t seed,
                                         double tol_ray = 0.05) {
  const auto dim = point.size();
  std::mt19937_64 rng(seed);
  std::vector<Vec> dirs;
  if (dim == 2) {
    for (int k = 0; k < n_dirs; ++k) {
      const double t = 2 * std::numbers::pi * k / n_dirs;
      dirs.push_back(vec({std::cos(t), std::sin(t)}));
    }
  } else {
    for (Eigen::Index i = 0; i < dim; ++i) {
      dirs.push_back(Vec::Unit(dim, i));
      dirs.push_back(-Vec::Unit(dim, i));
    }
    while (static_cast<int>(dirs.size()) < n_dirs) dirs.push_back(random_unit(rng, dim));
  }
  std::vector<std::vector<Vec>> per_radius;
  for (double r : radii) {
    std::vector<Vec> found;
    for (const auto& u : dirs) {
      const Vec y = point + r * u;
      const Vec q = projector(y);
      const double d = (y - q).norm();
      if (d <= 1e-3 * r) continue;
      push_unique(found, Vec((y - q) / d), 1e-6);
    }
    per_radius.push_back(std::move(found));
  }
  RayUnion out;
  out.dim = static_cast<int>(dim);
  out.approximate = true;
  if (per_radius.empty()) {
    out.branches.push_back(ConeRepr::zero(out.dim));
    return out;
  }
  const auto& last = per_radius.back();
  const std::vector<Vec>* prev = per_radius.size() >= 2 ? &per_radius[per_radius.size() - 2] : nullptr;
  std::vector<Vec> kept;
  for (const auto& v : last) {
    bool stable = prev == nullptr || std::any_of(prev->begin(), prev->end(), [&](const Vec& w) { return (v - w).norm() <= tol_ray; });
    if (!stable) continue;
    bool dup = std::any_of(kept.begin(), kept.end(), [&](const Vec& w) { return (v - w).norm() <= tol_ray * 0.2; });
    if (!dup) kept.push_back(v);
  }
  out.branches.push_back(ConeRepr::zero(out.dim));
  for (const auto& v : kept) out.branches.push_back(ConeRepr::from_generators(out.dim, {v}));
  return out;
}

/// Nontrivial common direction of a and -b, if any (pairwise branch test).
inline std::optional<Vec> opposed_direction(const RayUnion& a, const RayUnion& b, double tol = 1e-9) {
  for (const auto& ka : a.branches) {
    for (const auto& kb : b.branches) {
      std::vector<Vec> neg;
      for (const auto& g : kb.generator_list()) neg.push_back(-g);
      auto common = intersect(ka, ConeRepr::from_generators(b.dim, neg));
      for (const auto& g : common.generator_list()) {
        if (g.norm() > tol) return Vec(g.normalized());
      }
    }
  }
  return std::nullopt;
}

}  // namespace vep

#endif  // VEP_GEOMETRY_NORMALS_HPP
