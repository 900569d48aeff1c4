#ifndef VEP_SUBDIFF_HPP
#define VEP_SUBDIFF_HPP

#include "vep/merit.hpp"

#include <numbers>

namespace vep {

enum class Exactness { exact_convex, branch_hull_approx, outer_estimate };

inline std::string exactness_name(Exactness e) {
  switch (e) {
    case Exactness::exact_convex: return "exact-convex";
    case Exactness::branch_hull_approx: return "branch-hull-approx";
    case Exactness::outer_estimate: return "outer-estimate";
  }
  return "";
}

inline Exactness weakest(Exactness a, Exactness b) { return static_cast<int>(a) > static_cast<int>(b) ? a : b; }

/// Subgradient set estimate as a union of convex branches (a single branch when convex).
struct SubgradEstimate {
  std::vector<ConvexBody> branches;
  Exactness exactness = Exactness::exact_convex;
  std::vector<std::string> qc_flags;
  std::vector<std::string> flags;
  bool locally_lipschitz = true;

  const ConvexBody& body() const { return branches.front(); }
  int dim() const { return branches.empty() ? 0 : branches.front().dim; }
};

inline void add_flag(std::vector<std::string>& flags, const std::string& f) {
  if (std::find(flags.begin(), flags.end(), f) == flags.end()) flags.push_back(f);
}

inline double body_dist(const ConvexBody& body, const Vec& y) {
  if (body.empty()) return kInf;
  return (y - project_onto_body(body, y)).norm();
}

inline bool contains(const SubgradEstimate& s, const Vec& y, double tol = 1e-9) {
  return std::any_of(s.branches.begin(), s.branches.end(), [&](const ConvexBody& b) { return body_dist(b, y) <= tol; });
}

/// Support of the union: max over branches.
inline double support(const SubgradEstimate& s, const Vec& d) {
  double h = -kInf;
  for (const auto& b : s.branches) h = std::max(h, support(b, d));
  return h;
}

/// Hull generators of the objective's gradients at (xi, x), over the (xi, x) block.
inline SubgradEstimate objective_subgradient(const VepProblem& P, const Vec& xi, const Vec& x) {
  const Point pt = make_point(P, xi, x);
  auto hull = grad_hull(P.objective, pt.view(), Wrt::xi_x);
  SubgradEstimate s;
  s.branches.push_back(ConvexBody::polytope(P.p() + P.n(), extreme_points(hull.generators), "d-objective"));
  if (!hull.smooth()) s.exactness = Exactness::branch_hull_approx;
  return s;
}

namespace detail {

inline std::vector<Vec> image_points(const Mat& JT, const std::vector<Vec>& pts) {
  std::vector<Vec> out;
  for (const auto& p : pts) out.push_back(JT * p);
  return out;
}

}  // namespace detail

/// x-block subgradients of nu from the farthest points: J_x^T u with u the unit excess direction,
/// or J_x^T of the capped normal cone of C when f(xi, x, z) lies in C.
inline SubgradEstimate nu_partial_subgradient_smooth(const VepProblem& P, const Vec& xi, const Vec& x) {
  SubgradEstimate s;
  auto ev = eval_nu(P, xi, x);
  s.flags = ev.flags;
  std::vector<Vec> pts;
  for (const auto& z : ev.argmax_z) {
    const Point pt = make_point(P, xi, x, z);
    const Vec F = P.f.eval(pt.view());
    const Vec proj = project(F, P.cone);
    const double d = (F - proj).norm();
    auto jacs = P.f.jacobian_hull(pt.view(), Wrt::x);
    if (jacs.size() > 1) {
      s.exactness = Exactness::branch_hull_approx;
      add_flag(s.flags, "kink-in-f");
    }
    for (const auto& J : jacs) {
      if (d > 1e-12) {
        pts.push_back(J.transpose() * ((F - proj) / d));
      } else {
        auto N = normal_cone(P.cone, F);
        for (const auto& q : cap_points(N.branches.front(), 1.0)) pts.push_back(J.transpose() * q);
      }
    }
  }
  s.branches.push_back(ConvexBody::polytope(P.n(), extreme_points(pts), "dx-nu"));
  return s;
}

struct FullSubgradOptions {
  int directions = 0;  // 0: 360 in the plane, axes plus 400 random otherwise
  double delta = 1e-6;
  std::uint64_t seed = 11;
};

/// Subdifferential of nu at (xi, x) in the (xi, x) block from the gradients of the pieces active
/// on a small sphere, plus 0 when nu vanishes at the point. Exact only when nu is asserted convex.
inline SubgradEstimate nu_subgradient_full(const VepProblem& P, const Vec& xi, const Vec& x, const FullSubgradOptions& opt = {}) {
  const int dim = P.p() + P.n();
  const Vec pbar = stack(xi, x);
  std::vector<Vec> dirs;
  if (dim == 2) {
    const int count = opt.directions > 0 ? opt.directions : 360;
    for (int k = 0; k < count; ++k) {
      const double t = 2 * std::numbers::pi * k / count;
      dirs.push_back(vec({std::cos(t), std::sin(t)}));
    }
  } else {
    std::mt19937_64 rng(opt.seed);
    for (int i = 0; i < dim; ++i) {
      dirs.push_back(Vec::Unit(dim, i));
      dirs.push_back(-Vec::Unit(dim, i));
    }
    const int extra = opt.directions > 0 ? opt.directions : 400;
    for (int k = 0; k < extra; ++k) dirs.push_back(random_unit(rng, dim));
  }
  std::vector<Vec> grads(dirs.size());
  parallel_for(dirs.size(), [&](std::size_t k) { grads[k] = nu_active_gradient(P, pbar, pbar + opt.delta * dirs[k]); });
  std::vector<Vec> pts;
  for (const auto& g : grads) push_unique(pts, g, 1e-9);
  SubgradEstimate s;
  const auto ev = eval_nu(P, xi, x);
  s.flags = ev.flags;
  if (ev.nu <= 1e-12) push_unique(pts, Vec::Zero(dim), 1e-9);
  for (auto& p : pts) {
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double r = std::round(p[i]);
      if (std::abs(p[i] - r) <= 1e-12) p[i] = r;
    }
  }
  s.branches.push_back(ConvexBody::polytope(dim, extreme_points(pts), "d-nu"));
  if (!P.hyp.nu_convex) {
    s.exactness = Exactness::outer_estimate;
    add_flag(s.flags, "convexity-not-asserted");
  }
  return s;
}

struct OuterEstimate {
  SubgradEstimate estimate;  // body for the smallest eps
  std::vector<double> eps;
  std::vector<ConvexBody> bodies;
  std::vector<Vec> directions;
  Mat support_table;  // rows: eps, columns: directions
};

inline std::vector<Vec> unit_directions(int dim, int count, std::uint64_t seed = 5) {
  std::vector<Vec> dirs;
  if (dim == 1) return {vec({1.0}), vec({-1.0})};
  if (dim == 2) {
    for (int k = 0; k < count; ++k) {
      const double t = 2 * std::numbers::pi * k / count;
      dirs.push_back(vec({std::cos(t), std::sin(t)}));
    }
    return dirs;
  }
  std::mt19937_64 rng(seed);
  for (int i = 0; i < dim; ++i) {
    dirs.push_back(Vec::Unit(dim, i));
    dirs.push_back(-Vec::Unit(dim, i));
  }
  while (static_cast<int>(dirs.size()) < count) dirs.push_back(random_unit(rng, dim));
  return dirs;
}

/// Outer estimate of the subdifferential of nu: for each eps, the hull over z in the eps-enlarged
/// slice of the transposed (xi, x)-Jacobians applied to the capped polar of C, plus lip_f·B.
inline OuterEstimate nu_outer_estimate(const VepProblem& P, const Vec& xi, const Vec& x, std::vector<double> eps_list,
                                       double lip_f, int z_points = 41) {
  if (eps_list.empty()) throw PreconditionError("nu_outer_estimate needs at least one eps");
  for (double e : eps_list) {
    if (!(e > 0)) throw PreconditionError("eps values must be positive");
  }
  if (lip_f < 0) throw PreconditionError("lip_f must be nonnegative");
  std::sort(eps_list.begin(), eps_list.end());
  const int dim = P.p() + P.n();
  const auto polar_cap = cap_points(dual_cone(P.cone), 1.0);
  OuterEstimate out;
  out.eps = eps_list;
  out.directions = unit_directions(dim, 64);
  out.support_table = Mat::Zero(static_cast<Eigen::Index>(eps_list.size()), static_cast<Eigen::Index>(out.directions.size()));
  std::vector<std::string> flags;
  bool kinked = false;
  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    auto dom = detail::nu_domain(P, xi, eps_list[k]);
    for (const auto& f : dom.flags) add_flag(flags, f);
    auto [lo, hi] = dom.set.bounding_box();
    std::vector<Vec> zs;
    for (const auto& z : box_grid(lo, hi, detail::per_axis(z_points, P.n(), 2000))) {
      if (contains(dom.set, z, 1e-12)) zs.push_back(z);
    }
    for (const auto& v : dom.set.vertex_list()) zs.push_back(v);
    std::vector<Vec> pts;
    for (const auto& z : zs) {
      const Point pt = make_point(P, xi, x, z);
      auto jacs = P.f.jacobian_hull(pt.view(), Wrt::xi_x);
      if (jacs.size() > 1) kinked = true;
      for (const auto& J : jacs) {
        for (const auto& q : detail::image_points(J.transpose(), polar_cap)) pts.push_back(q);
      }
    }
    ConvexBody body = ConvexBody::polytope(dim, extreme_points(pts), "outer-d-nu");
    body.ball_radius = lip_f;
    for (std::size_t j = 0; j < out.directions.size(); ++j) {
      out.support_table(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = support(body, out.directions[j]);
    }
    out.bodies.push_back(std::move(body));
  }
  out.estimate.branches.push_back(out.bodies.front());
  out.estimate.exactness = Exactness::outer_estimate;
  out.estimate.flags = flags;
  if (kinked) add_flag(out.estimate.flags, "branch-hull-jacobian");
  return out;
}

/// Image of a coderivative: one convex piece per normal-cone branch (empty list = empty set).
struct CoderivativeImage {
  std::vector<ConvexBody> branches;
  bool approximate = false;
  bool truncated = false;  // unbounded recession directions cut at kUnboundedCapRadius

  bool empty() const { return branches.empty(); }
  bool contains(const Vec& u, double tol = 1e-9) const {
    return std::any_of(branches.begin(), branches.end(), [&](const ConvexBody& b) { return body_dist(b, u) <= tol; });
  }
};

namespace detail {

// {U t : Y t = target, t >= 0} for one cone branch with generators split as (U; Y).
inline std::optional<ConvexBody> cone_slice(const std::vector<Vec>& gens, int p, const Vec& target, bool& truncated) {
  const int n = static_cast<int>(target.size());
  const int k = static_cast<int>(gens.size());
  std::vector<Vec> pts;
  if (target.norm() <= 1e-12) pts.push_back(Vec::Zero(p));
  for (int size = 1; size <= std::min(n, k); ++size) {
    for_each_subset(k, size, [&](const std::vector<int>& S) {
      Mat Y(n, size);
      Mat U(p, size);
      for (int c = 0; c < size; ++c) {
        Y.col(c) = gens[static_cast<std::size_t>(S[static_cast<std::size_t>(c)])].tail(n);
        U.col(c) = gens[static_cast<std::size_t>(S[static_cast<std::size_t>(c)])].head(p);
      }
      Eigen::ColPivHouseholderQR<Mat> qr(Y);
      if (qr.rank() < size) return true;
      Vec t = qr.solve(target);
      if ((Y * t - target).norm() > 1e-9 * std::max(1.0, target.norm())) return true;
      if ((t.array() < -1e-12).any()) return true;
      push_unique(pts, Vec(U * t.cwiseMax(0.0)), 1e-12);
      return true;
    });
  }
  if (pts.empty()) return std::nullopt;
  ConvexBody body = ConvexBody::polytope(p, extreme_points(pts));
  std::vector<Vec> rows;
  for (int j = 0; j < n; ++j) {
    rows.push_back(Vec::Unit(p + n, p + j));
    rows.push_back(-Vec::Unit(p + n, p + j));
  }
  auto rec = intersect(ConeRepr::from_generators(p + n, gens), ConeRepr::from_halfspaces(p + n, rows));
  std::vector<Vec> ug;
  for (const auto& g : rec.generator_list()) {
    if (g.head(p).norm() > 1e-12) ug.push_back(g.head(p));
  }
  if (!ug.empty()) {
    body.cone_parts.push_back({ConeRepr::from_generators(p, ug), kUnboundedCapRadius});
    truncated = true;
  }
  return body;
}

}  // namespace detail

/// D*K(xi | z)(v) = {u : (u, -v) in N((xi, z); graph K)}.
inline CoderivativeImage coderivative_K(const VepProblem& P, const Vec& xi, const Vec& z, const Vec& v) {
  auto N = graph_normal_cone(P, xi, z);
  CoderivativeImage img;
  img.approximate = N.approximate;
  for (const auto& br : N.branches) {
    auto body = detail::cone_slice(br.generator_list(), P.p(), Vec(-v), img.truncated);
    if (body) img.branches.push_back(*body);
  }
  return img;
}

/// D*K(xi | z)(B) per normal branch: conv{0, u_i / |y_i|} over generators (u_i, y_i), with the
/// directions of the branch having y = 0 added as a (truncated) recession part.
inline std::vector<ConvexBody> coderivative_K_ball(const RayUnion& N, int p, bool& truncated) {
  std::vector<ConvexBody> out;
  for (const auto& br : N.branches) {
    auto gens = br.generator_list();
    std::vector<Vec> pts{Vec::Zero(p)};
    for (const auto& g : gens) {
      const double yn = g.tail(g.size() - p).norm();
      if (yn > 1e-12) push_unique(pts, Vec(g.head(p) / yn), 1e-12);
    }
    ConvexBody body = ConvexBody::polytope(p, extreme_points(pts));
    const int n = static_cast<int>(N.dim) - p;
    std::vector<Vec> rows;
    for (int j = 0; j < n; ++j) {
      rows.push_back(Vec::Unit(N.dim, p + j));
      rows.push_back(-Vec::Unit(N.dim, p + j));
    }
    auto rec = intersect(ConeRepr::from_generators(N.dim, gens), ConeRepr::from_halfspaces(N.dim, rows));
    std::vector<Vec> ug;
    for (const auto& g : rec.generator_list()) {
      if (g.head(p).norm() > 1e-12) ug.push_back(g.head(p));
    }
    if (!ug.empty()) {
      body.cone_parts.push_back({ConeRepr::from_generators(p, ug), kUnboundedCapRadius});
      truncated = true;
    }
    bool dup = false;
    for (const auto& o : out) {
      if (o.hull_points.size() == body.hull_points.size() && o.cone_parts.size() == body.cone_parts.size() &&
          std::all_of(body.hull_points.begin(), body.hull_points.end(), [&](const Vec& q) { return dist(q, o.hull_points) <= 1e-12; })) {
        dup = true;
      }
    }
    if (!dup) out.push_back(std::move(body));
  }
  return out;
}

/// Outer estimate of the subdifferential of mu: union over branches of D*K(xi | proj x)(B) × B.
inline SubgradEstimate mu_subgradient_estimate(const VepProblem& P, const Vec& xi, const Vec& x) {
  const auto S = slice(P, xi);
  const Vec zbar = project(x, S);
  auto N = graph_normal_cone(P, xi, zbar);
  bool truncated = false;
  auto images = coderivative_K_ball(N, P.p(), truncated);
  SubgradEstimate s;
  s.exactness = Exactness::outer_estimate;
  for (const auto& img : images) s.branches.push_back(product(img, ConvexBody::ball(P.n(), 1.0)));
  if (N.approximate) add_flag(s.flags, "sampled-normals");
  if (P.n() > 1) add_flag(s.flags, "coderivative-ball-approximate");
  if (truncated) add_flag(s.flags, "recession-truncated");
  if (!P.hyp.k_lsc) add_flag(s.qc_flags, "k-lsc-assumed");
  return s;
}

struct GraphCloud {
  std::vector<Vec> points;  // (xi, x) samples of graph E
  double step = 0.0;
};

/// Samples of graph E near (xi, x) from the oracle on a parameter grid.
inline GraphCloud sample_solution_graph(const VepProblem& P, const Vec& xi, double radius, int xi_points = 201,
                                        int x_points = 401, std::optional<Window> x_window = std::nullopt) {
  GraphCloud cloud;
  const int p = P.p();
  auto grid = box_grid(Vec(xi.array() - radius), Vec(xi.array() + radius), detail::per_axis(xi_points, p, 4000));
  std::vector<std::vector<Vec>> found(grid.size());
  std::vector<double> steps(grid.size(), 0.0);
  OracleGrid og;
  og.x_points = x_points;
  og.x_window = x_window ? x_window : P.window_x;
  parallel_for(grid.size(), [&](std::size_t k) {
    auto sol = oracle_solutions(P, grid[k], og);
    steps[k] = sol.step;
    for (const auto& s : sol.points) found[k].push_back(stack(grid[k], s));
  });
  for (std::size_t k = 0; k < grid.size(); ++k) {
    cloud.step = std::max(cloud.step, steps[k]);
    for (auto& q : found[k]) cloud.points.push_back(std::move(q));
  }
  if (p == 1 && grid.size() > 1) cloud.step = std::max(cloud.step, 2 * radius / static_cast<double>(grid.size() - 1));
  return cloud;
}

inline Vec nearest_in_cloud(const std::vector<Vec>& cloud, const Vec& y) {
  if (cloud.empty()) throw GeometryError("empty point cloud");
  const Vec* best = &cloud.front();
  double bd = kInf;
  for (const auto& c : cloud) {
    const double d = (c - y).squaredNorm();
    if (d < bd) {
      bd = d;
      best = &c;
    }
  }
  return *best;
}

/// Limiting normals of graph E at (xi, x) from proximal directions to an oracle cloud.
inline RayUnion solution_graph_normals(const VepProblem& P, const Vec& xi, const Vec& x, double radius = 0.2,
                                       std::uint64_t seed = 3) {
  auto cloud = sample_solution_graph(P, xi, radius);
  const Vec pbar = stack(xi, x);
  if (cloud.points.empty() || (nearest_in_cloud(cloud.points, pbar) - pbar).norm() > 2 * cloud.step + 1e-9) {
    throw PreconditionError("point is not on the sampled graph of the solution map");
  }
  auto projector = [&](const Vec& y) { return nearest_in_cloud(cloud.points, y); };
  const double r = std::max(0.05, 20 * cloud.step);
  return sampled_limiting_normals(projector, pbar, {2 * r, r}, pbar.size() == 2 ? 720 : 400, seed, 0.05);
}

/// D*E(xi | x)(v) read off sampled normal rays (a, b): u = t·a with t = -<b, v>/|b|^2 >= 0 whenever
/// t·b = -v; horizontal rays contribute their whole direction when v = 0.
inline CoderivativeImage coderivative_E_from_normals(const RayUnion& N, int p, const Vec& v, double tol = 0.05) {
  CoderivativeImage img;
  img.approximate = true;
  const double vn = v.norm();
  if (vn <= 1e-12) img.branches.push_back(ConvexBody::point(Vec::Zero(p)));
  for (const auto& br : N.branches) {
    auto gens = br.generator_list();
    for (const auto& g : gens) {
      const Vec a = g.head(p), b = g.tail(g.size() - p);
      const double bn2 = b.squaredNorm();
      if (bn2 <= 1e-12) {
        if (vn <= 1e-12) {
          ConvexBody ray = ConvexBody::point(Vec::Zero(p));
          ray.cone_parts.push_back({ConeRepr::from_generators(p, {a}), kUnboundedCapRadius});
          img.branches.push_back(ray);
          img.truncated = true;
        }
        continue;
      }
      if (vn <= 1e-12) continue;
      const double t = -b.dot(v) / bn2;
      if (t < -1e-12 || (t * b + v).norm() > tol * vn) continue;
      img.branches.push_back(ConvexBody::point(Vec(t * a)));
    }
  }
  return img;
}

inline CoderivativeImage coderivative_E_sampled(const VepProblem& P, const Vec& xi, const Vec& x, const Vec& v,
                                                double radius = 0.2) {
  return coderivative_E_from_normals(solution_graph_normals(P, xi, x, radius), P.p(), v);
}

/// Sum rule estimate: branchwise Minkowski sums; the singular qualification holds when either
/// operand is locally Lipschitz, otherwise it is recorded as assumed.
inline SubgradEstimate sum_rule(const SubgradEstimate& a, const SubgradEstimate& b) {
  if (a.dim() != b.dim()) throw GeometryError("sum rule on estimates of different dimension");
  SubgradEstimate s;
  for (const auto& ba : a.branches) {
    for (const auto& bb : b.branches) s.branches.push_back(minkowski_sum(ba, bb));
  }
  s.exactness = weakest(a.exactness, b.exactness);
  s.qc_flags = a.qc_flags;
  for (const auto& q : b.qc_flags) add_flag(s.qc_flags, q);
  add_flag(s.qc_flags, a.locally_lipschitz || b.locally_lipschitz ? "singular-qc-lipschitz" : "qc-assumed");
  s.flags = a.flags;
  for (const auto& f : b.flags) add_flag(s.flags, f);
  s.locally_lipschitz = a.locally_lipschitz && b.locally_lipschitz;
  return s;
}

}  // namespace vep

#endif  // VEP_SUBDIFF_HPP
