#ifndef VEP_MERIT_HPP
#define VEP_MERIT_HPP

#include "vep/problem.hpp"

namespace vep {

struct MeritEval {
  double nu = 0.0;
  double mu = 0.0;
  double merit = 0.0;
  std::vector<Vec> argmax_z;
  std::string method;
  std::vector<std::string> flags;
};

inline constexpr double kArgmaxTol = 1e-8;
inline constexpr double kMeritTol = 1e-9;

namespace detail {

struct NuSlice {
  ConvexSetRepr set;
  std::vector<std::string> flags;
};

inline NuSlice nu_domain(const VepProblem& P, const Vec& xi, double eps) {
  NuSlice out;
  bool approx = false;
  auto S = enlarged_slice(P, xi, eps, approx);
  if (approx) out.flags.push_back("enlargement-approximate");
  bool windowed = false;
  out.set = bounded_or_windowed(P, S, windowed);
  if (windowed) out.flags.push_back("unbounded-window");
  return out;
}

inline double excess_at(const VepProblem& P, Point& pt, const Vec& z) {
  pt.z = z;
  return dist(P.f.eval(pt.view()), P.cone);
}

// Coordinate pattern search for a local max of z -> dist(f, C) over S, started at z0.
inline Vec pattern_ascent(const VepProblem& P, Point& pt, const ConvexSetRepr& S, Vec z, double step) {
  double val = excess_at(P, pt, z);
  const auto n = z.size();
  while (step > 1e-10) {
    bool moved = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (double sgn : {1.0, -1.0}) {
        Vec cand = z;
        cand[i] += sgn * step;
        cand = project(cand, S);
        const double v = excess_at(P, pt, cand);
        if (v > val + 1e-15) {
          val = v;
          z = cand;
          moved = true;
        }
      }
    }
    if (!moved) step *= 0.5;
  }
  return z;
}

}  // namespace detail

/// nu(xi, x) = sup over z in K(xi) (or its eps-enlargement) of dist(f(xi, x, z), C), with maximizers.
inline MeritEval eval_nu(const VepProblem& P, const Vec& xi, const Vec& x, double eps = 0.0) {
  MeritEval out;
  auto dom = detail::nu_domain(P, xi, eps);
  out.flags = dom.flags;
  const auto& S = dom.set;
  Point pt = make_point(P, xi, x);
  std::vector<std::pair<double, Vec>> scored;
  if (P.f.is_affine_in(Block::z)) {
    out.method = "vertex-exact";
    for (const auto& v : S.vertex_list()) scored.emplace_back(detail::excess_at(P, pt, v), v);
  } else {
    out.method = "multistart";
    auto [lo, hi] = S.bounding_box();
    const int per = detail::per_axis(201, P.n(), 20000);
    for (const auto& z : box_grid(lo, hi, per)) {
      if (contains(S, z, 1e-12)) scored.emplace_back(detail::excess_at(P, pt, z), z);
    }
    for (const auto& v : S.vertex_list()) scored.emplace_back(detail::excess_at(P, pt, v), v);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    double step = 0.0;
    for (int i = 0; i < P.n(); ++i) step = std::max(step, (hi[i] - lo[i]) / std::max(per - 1, 1));
    const std::size_t starts = std::min<std::size_t>(5, scored.size());
    for (std::size_t k = 0; k < starts; ++k) {
      Vec z = detail::pattern_ascent(P, pt, S, scored[k].second, step);
      scored.emplace_back(detail::excess_at(P, pt, z), z);
    }
  }
  if (scored.empty()) throw EvalError("no feasible z found for nu");
  double best = -kInf;
  for (const auto& s : scored) best = std::max(best, s.first);
  out.nu = std::max(best, 0.0);
  for (const auto& [v, z] : scored) {
    if (v >= best - kArgmaxTol) push_unique(out.argmax_z, z, 1e-12);
  }
  return out;
}

/// mu(xi, x) = dist(x, K(xi)).
inline double eval_mu(const VepProblem& P, const Vec& xi, const Vec& x) { return dist(x, slice(P, xi)); }

inline MeritEval eval_merit(const VepProblem& P, const Vec& xi, const Vec& x) {
  MeritEval out = eval_nu(P, xi, x);
  out.mu = eval_mu(P, xi, x);
  out.merit = out.nu + out.mu;
  return out;
}

inline bool is_solution(const VepProblem& P, const Vec& xi, const Vec& x, double tol = kMeritTol) {
  return eval_merit(P, xi, x).merit <= tol;
}

namespace detail {

// Bounds active at z inside the slice at xi: +1 upper, -1 lower, 0 free (box); active row
// indices (polytope).
struct ActivePattern {
  std::vector<int> box_side;
  std::vector<int> rows;
};

inline ActivePattern active_pattern(const VepProblem& P, const Vec& xi, const Vec& z) {
  ActivePattern ap;
  const Point pt = make_point(P, xi);
  if (P.K.form == ParamSet::Form::box) {
    for (int i = 0; i < P.n(); ++i) {
      const double lo = eval(P.K.lower[static_cast<std::size_t>(i)], pt.view());
      const double hi = eval(P.K.upper[static_cast<std::size_t>(i)], pt.view());
      const double tol = 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)});
      int side = 0;
      if (std::abs(z[i] - hi) <= tol) side = 1;
      else if (std::abs(z[i] - lo) <= tol) side = -1;
      ap.box_side.push_back(side);
    }
  } else {
    for (std::size_t r = 0; r < P.K.A.size(); ++r) {
      double lhs = 0, scale = 1;
      for (int j = 0; j < P.n(); ++j) {
        const double a = eval(P.K.A[r][static_cast<std::size_t>(j)], pt.view());
        lhs += a * z[j];
        scale = std::max(scale, std::abs(a));
      }
      const double b = eval(P.K.b[r], pt.view());
      if (std::abs(lhs - b) <= 1e-9 * std::max(scale, std::abs(b))) ap.rows.push_back(static_cast<int>(r));
    }
  }
  return ap;
}

// z on the active faces at xi_at and its derivative with respect to (xi, x), branches picked at xi_sel.
inline std::pair<Vec, Mat> active_z(const VepProblem& P, const ActivePattern& ap, const Vec& xi_at, const Vec& xi_sel,
                                    const Vec& z_sel) {
  const int p = P.p(), n = P.n();
  const Point pa = make_point(P, xi_at), ps = make_point(P, xi_sel);
  Mat dz = Mat::Zero(n, p + n);
  Vec z = z_sel;
  if (P.K.form == ParamSet::Form::box) {
    for (int i = 0; i < n; ++i) {
      const int side = ap.box_side[static_cast<std::size_t>(i)];
      if (side == 0) continue;
      const Expr& e = side > 0 ? P.K.upper[static_cast<std::size_t>(i)] : P.K.lower[static_cast<std::size_t>(i)];
      z[i] = eval(e, pa.view());
      dz.row(i) = grad_selected(e, pa.view(), ps.view(), Wrt::xi_x).transpose();
    }
    return {z, dz};
  }
  if (ap.rows.empty()) return {z, dz};
  const auto k = static_cast<Eigen::Index>(ap.rows.size());
  Mat A(k, n);
  Vec b(k);
  std::vector<Mat> dA(static_cast<std::size_t>(n), Mat::Zero(k, p + n));
  Mat db(k, p + n);
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto row = static_cast<std::size_t>(ap.rows[static_cast<std::size_t>(r)]);
    for (int j = 0; j < n; ++j) {
      const auto& e = P.K.A[row][static_cast<std::size_t>(j)];
      A(r, j) = eval(e, pa.view());
      dA[static_cast<std::size_t>(j)].row(r) = grad_selected(e, pa.view(), ps.view(), Wrt::xi_x).transpose();
    }
    b[r] = eval(P.K.b[row], pa.view());
    db.row(r) = grad_selected(P.K.b[row], pa.view(), ps.view(), Wrt::xi_x).transpose();
  }
  auto solver = A.completeOrthogonalDecomposition();
  z = z_sel + solver.solve(b - A * z_sel);
  Mat rhs = db;
  for (int j = 0; j < n; ++j) rhs -= z[j] * dA[static_cast<std::size_t>(j)];
  dz = solver.solve(rhs);
  return {z, dz};
}

}  // namespace detail

/// Gradient at `at` = (xi, x) of the nu-piece active at `select`: the farthest point z(select)
/// is followed along its active bounds. Returns 0 when nu(select) vanishes.
inline Vec nu_active_gradient(const VepProblem& P, const Vec& at, const Vec& select) {
  const int p = P.p(), n = P.n();
  auto [xi_s, x_s] = split(P, select);
  auto [xi_a, x_a] = split(P, at);
  auto ev = eval_nu(P, xi_s, x_s);
  if (ev.nu <= 1e-12) return Vec::Zero(p + n);
  const Vec z_s = ev.argmax_z.front();
  const Point ps = make_point(P, xi_s, x_s, z_s);
  const Vec F = P.f.eval(ps.view());
  const Vec u = (F - project(F, P.cone)) / ev.nu;
  const auto ap = detail::active_pattern(P, xi_s, z_s);
  auto [z_a, dz] = detail::active_z(P, ap, xi_a, xi_s, z_s);
  const Point pa = make_point(P, xi_a, x_a, z_a);
  const Mat Jw = P.f.jacobian_selected(pa.view(), ps.view(), Wrt::xi_x);
  const Mat Jz = P.f.jacobian_selected(pa.view(), ps.view(), Wrt::z);
  return Jw.transpose() * u + dz.transpose() * (Jz.transpose() * u);
}

}  // namespace vep

#endif  // VEP_MERIT_HPP
