#ifndef VEP_DIAGNOSTICS_HPP
#define VEP_DIAGNOSTICS_HPP

#include "vep/subdiff.hpp"

#include <utility>

namespace vep {

enum class Verdict { certified, refuted, inconclusive };

inline std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::certified: return "certified-on-samples";
    case Verdict::refuted: return "refuted";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "";
}

struct Certificate {
  std::string kind;
  Verdict verdict = Verdict::inconclusive;
  double constant = 0.0;
  std::vector<Vec> witnesses;
  std::vector<std::pair<std::string, std::string>> resolution;
  std::vector<std::string> flags;

  void note(const std::string& key, const std::string& value) { resolution.emplace_back(key, value); }
  void note(const std::string& key, double value) { resolution.emplace_back(key, detail::format_number(value)); }
};

struct SampleSpec {
  int grid = 41;
  int random = 200;
  std::uint64_t seed = 0;
  std::optional<Window> x_window;
};

namespace detail {

inline std::pair<Vec, Vec> xi_ball_box(const Vec& center, double rho) {
  return {Vec(center.array() - rho), Vec(center.array() + rho)};
}

inline Window default_x_window(const VepProblem& P, const Vec& xi, double rho) {
  if (P.window_x) return *P.window_x;
  bool windowed = false;
  auto S = slice(P, xi);
  if (!S.bounded()) throw PreconditionError("unbounded slice of K and no x window supplied");
  auto [lo, hi] = bounded_or_windowed(P, S, windowed).bounding_box();
  const double pad = 1.0 + rho;
  return {Vec(lo.array() - pad), Vec(hi.array() + pad)};
}

// (xi, x) samples: a tensor grid (about grid^2 points in total) plus seeded uniform points.
inline std::vector<std::pair<Vec, Vec>> sample_pairs(const VepProblem& P, const Vec& xlo, const Vec& xhi, const Window& xw,
                                                     const SampleSpec& spec) {
  const int p = P.p(), n = P.n();
  std::vector<std::pair<Vec, Vec>> out;
  const int total = spec.grid * spec.grid;
  const int per_xi = p == 1 ? spec.grid : per_axis(spec.grid, p, static_cast<int>(std::sqrt(static_cast<double>(total))));
  const int per_x = n == 1 ? spec.grid : per_axis(spec.grid, n, static_cast<int>(std::sqrt(static_cast<double>(total))));
  const auto xis = box_grid(xlo, xhi, per_xi);
  const auto xs = box_grid(xw.lower, xw.upper, per_x);
  for (const auto& a : xis) {
    for (const auto& b : xs) out.emplace_back(a, b);
  }
  std::mt19937_64 rng(spec.seed);
  for (int k = 0; k < spec.random; ++k) {
    Vec a = random_in_box(rng, xlo, xhi);
    Vec b = random_in_box(rng, xw.lower, xw.upper);
    out.emplace_back(std::move(a), std::move(b));
  }
  return out;
}

}  // namespace detail

/// dist(0, dx nu(xi, x) + truncated normal of K(xi) at x).
inline double gamma_sample(const VepProblem& P, const Vec& xi, const Vec& x) {
  auto dnu = nu_partial_subgradient_smooth(P, xi, x);
  auto nflat = truncated_normal(x, slice(P, xi));
  return min_norm_point(minkowski_sum(dnu.body(), nflat)).dist0;
}

/// Smallest sampled distance from 0 to dx nu + N♭ at non-solutions with xi in B(xi_bar, rho).
inline Certificate estimate_gamma(const VepProblem& P, const Vec& xi_bar, double rho, const SampleSpec& spec = {}) {
  Certificate c;
  c.kind = "gamma";
  auto [xlo, xhi] = detail::xi_ball_box(xi_bar, rho);
  const Window xw = spec.x_window ? *spec.x_window : detail::default_x_window(P, xi_bar, rho);
  const auto samples = detail::sample_pairs(P, xlo, xhi, xw, spec);
  std::vector<double> values(samples.size(), kInf);
  parallel_for(samples.size(), [&](std::size_t k) {
    const auto& [xi, x] = samples[k];
    if (eval_merit(P, xi, x).merit <= kMeritTol) return;
    values[k] = gamma_sample(P, xi, x);
  });
  std::size_t best = samples.size();
  int tested = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (!std::isfinite(values[k])) continue;
    ++tested;
    if (best == samples.size() || values[k] < values[best]) best = k;
  }
  if (tested == 0) throw PreconditionError("every sample solves the problem; nothing to test");
  c.constant = values[best];
  c.witnesses.push_back(stack(samples[best].first, samples[best].second));
  c.verdict = c.constant > 1e-6 ? Verdict::certified : Verdict::refuted;
  c.note("grid", std::to_string(spec.grid) + "x" + std::to_string(spec.grid));
  c.note("random", std::to_string(spec.random));
  c.note("tested", std::to_string(tested));
  c.note("rho", rho);
  return c;
}

struct ErrorBoundGrid {
  int xi_points = 41;
  int x_points = 161;
  std::optional<Window> x_window;
  OracleGrid oracle;
};

/// Checks dist(x, E(xi)) <= merit(xi, x)/gamma + oracle step on a (xi, x) grid.
inline Certificate verify_error_bound(const VepProblem& P, const Vec& xi_bar, double rho, double gamma,
                                      const ErrorBoundGrid& grid = {}) {
  if (!(gamma > 0)) throw PreconditionError("gamma must be positive");
  Certificate c;
  c.kind = "error-bound";
  c.constant = gamma;
  auto [xlo, xhi] = detail::xi_ball_box(xi_bar, rho);
  const Window xw = grid.x_window ? *grid.x_window : detail::default_x_window(P, xi_bar, rho);
  const auto xis = box_grid(xlo, xhi, detail::per_axis(grid.xi_points, P.p(), 2000));
  const auto xs = box_grid(xw.lower, xw.upper, detail::per_axis(grid.x_points, P.n(), 4000));
  struct Row {
    bool empty = false;
    double worst = -kInf;
    Vec witness;
  };
  std::vector<Row> rows(xis.size());
  parallel_for(xis.size(), [&](std::size_t k) {
    const auto sols = oracle_solutions(P, xis[k], grid.oracle);
    if (sols.points.empty()) {
      rows[k].empty = true;
      return;
    }
    for (const auto& x : xs) {
      const double lhs = dist(x, sols.points);
      const double rhs = eval_merit(P, xis[k], x).merit / gamma + sols.step;
      const double gap = lhs - rhs;
      if (gap > rows[k].worst) {
        rows[k].worst = gap;
        rows[k].witness = stack(xis[k], x);
      }
    }
  });
  bool any_empty = false;
  double worst = -kInf;
  for (const auto& r : rows) {
    if (r.empty) {
      any_empty = true;
      continue;
    }
    if (r.worst > 1e-9) c.witnesses.push_back(r.witness);
    worst = std::max(worst, r.worst);
  }
  c.note("xi_points", std::to_string(xis.size()));
  c.note("x_points", std::to_string(xs.size()));
  c.note("worst_gap", worst);
  if (any_empty) {
    add_flag(c.flags, "empty-solution-set");
    c.verdict = Verdict::inconclusive;
    return c;
  }
  c.verdict = c.witnesses.empty() ? Verdict::certified : Verdict::refuted;
  return c;
}

/// Sampled strong slope of merit(xi, ·) at x: the value on the smallest radius, clamped at 0.
inline double strong_slope(const VepProblem& P, const Vec& xi, const Vec& x,
                           const std::vector<double>& radii = {1e-2, 1e-3, 1e-4, 1e-5}, std::uint64_t seed = 1) {
  const int n = P.n();
  const double m0 = eval_merit(P, xi, x).merit;
  auto dirs = unit_directions(n, n == 1 ? 2 : 2 * n + 64, seed);
  double slope = 0.0;
  for (double r : radii) {
    double s = 0.0;
    for (const auto& u : dirs) s = std::max(s, (m0 - eval_merit(P, xi, Vec(x + r * u)).merit) / r);
    slope = s;
  }
  return std::max(slope, 0.0);
}

using DistOracle = std::function<double(const Vec&)>;

/// Largest sampled ratio dist(w, S1 ∩ S2) / max(dist(w, S1), dist(w, S2)) over a grid of B(s, r).
inline Certificate subtransversality_kappa(const DistOracle& d1, const DistOracle& d2, const DistOracle& d12, const Vec& s,
                                           double r, int per_axis = 41, double slack = 0.0) {
  Certificate c;
  c.kind = "kappa";
  double kappa = 0.0;
  int used = 0;
  Vec witness;
  for (const auto& w : box_grid(Vec(s.array() - r), Vec(s.array() + r), per_axis)) {
    if ((w - s).norm() > r + 1e-12) continue;
    const double m = std::max(d1(w), d2(w));
    if (m <= slack) continue;
    ++used;
    const double ratio = d12(w) / m;
    if (ratio > kappa) {
      kappa = ratio;
      witness = w;
    }
  }
  c.constant = kappa;
  if (witness.size() > 0) c.witnesses.push_back(witness);
  c.verdict = used > 0 && std::isfinite(kappa) ? Verdict::certified : Verdict::inconclusive;
  c.note("grid", std::to_string(per_axis));
  c.note("radius", r);
  c.note("used", std::to_string(used));
  if (slack > 0) c.note("slack", slack);
  return c;
}

/// N1 ∩ (-N2) = {0} test on branch lists.
inline Certificate subtransversality_nc(const RayUnion& n1, const RayUnion& n2) {
  Certificate c;
  c.kind = "subtransversal-nc";
  if (n1.approximate || n2.approximate) add_flag(c.flags, "sampled-normals");
  if (auto w = opposed_direction(n1, n2)) {
    c.verdict = Verdict::refuted;
    c.witnesses.push_back(*w);
  } else {
    c.verdict = Verdict::certified;
  }
  return c;
}

struct SubtransversalityResult {
  Certificate nc;
  Certificate kappa;
};

/// Subtransversality of Ω × R^n and graph E at (xi, x).
inline SubtransversalityResult check_subtransversality(const VepProblem& P, const Vec& xi, const Vec& x, double r = 0.5,
                                                       int per_axis = 41, std::uint64_t seed = 3) {
  SubtransversalityResult out;
  auto n_omega = product(normal_cone(P.omega, xi), RayUnion::zero(P.n()));
  auto n_graph = solution_graph_normals(P, xi, x, 0.2, seed);
  out.nc = subtransversality_nc(n_omega, n_graph);

  auto cloud = sample_solution_graph(P, xi, r + 0.1);
  std::vector<Vec> both;
  for (const auto& q : cloud.points) {
    if (contains(P.omega, Vec(q.head(P.p())), 1e-12)) both.push_back(q);
  }
  const int p = P.p();
  auto d1 = [&](const Vec& w) { return dist(Vec(w.head(p)), P.omega); };
  auto d2 = [&](const Vec& w) { return dist(w, cloud.points); };
  auto d12 = [&](const Vec& w) { return dist(w, both); };
  out.kappa = subtransversality_kappa(d1, d2, d12, stack(xi, x), r, per_axis, 3 * cloud.step);
  add_flag(out.kappa.flags, "sampled-graph");
  return out;
}

/// Sup norm of f(xi, x0, z) outside C over z-windows of growing size.
inline Certificate check_c_bounded(const VepProblem& P, const Vec& xi, const Vec& x0, int per_axis = 101) {
  Certificate c;
  c.kind = "c-bounded";
  const auto S = slice(P, xi);
  if (!contains(S, x0, 1e-9)) throw PreconditionError("x0 must lie in K(xi)");
  auto sup_over = [&](const ConvexSetRepr& set) {
    auto [lo, hi] = set.bounding_box();
    double sup = 0.0;
    Point pt = make_point(P, xi, x0);
    auto zs = box_grid(lo, hi, detail::per_axis(per_axis, P.n(), 20000));
    for (const auto& v : set.vertex_list()) zs.push_back(v);
    for (const auto& z : zs) {
      if (!contains(set, z, 1e-12)) continue;
      pt.z = z;
      const Vec F = P.f.eval(pt.view());
      if (dist(F, P.cone) > 1e-12) sup = std::max(sup, F.norm());
    }
    return sup;
  };
  if (S.bounded()) {
    c.constant = sup_over(S);
    c.verdict = Verdict::certified;
    c.note("windows", "1");
    return c;
  }
  Window base = P.window_x ? *P.window_x : Window{Vec::Constant(P.n(), -1.0), Vec::Constant(P.n(), 1.0)};
  const Vec center = 0.5 * (base.lower + base.upper);
  const Vec half = 0.5 * (base.upper - base.lower);
  std::vector<double> sups;
  for (double scale : {1.0, 2.0, 4.0, 8.0}) sups.push_back(sup_over(S.clipped(Vec(center - scale * half), Vec(center + scale * half))));
  c.constant = sups.back();
  const double a = sups[sups.size() - 2], b = sups.back();
  c.verdict = std::abs(b - a) <= 1e-9 * std::max(1.0, b) ? Verdict::certified : Verdict::inconclusive;
  if (c.verdict == Verdict::inconclusive) add_flag(c.flags, "growth-at-window-edge");
  c.note("windows", "4");
  return c;
}

struct ConstantWindow {
  Window xi;
  Window x;
};

inline ConstantWindow default_constant_window(const VepProblem& P) {
  ConstantWindow w;
  w.xi = P.window_xi ? *P.window_xi : Window{Vec::Constant(P.p(), -1.0), Vec::Constant(P.p(), 1.0)};
  w.x = P.window_x ? *P.window_x : detail::default_x_window(P, Vec(0.5 * (w.xi.lower + w.xi.upper)), 0.0);
  return w;
}

namespace detail {

// z values used for the constant estimates: vertices and a coarse grid of K(xi).
inline std::vector<Vec> z_samples(const VepProblem& P, const Vec& xi, int per_axis) {
  bool windowed = false;
  auto S = bounded_or_windowed(P, slice(P, xi), windowed);
  auto zs = S.vertex_list();
  auto [lo, hi] = S.bounding_box();
  for (const auto& z : box_grid(lo, hi, per_axis)) {
    if (contains(S, z, 1e-12)) zs.push_back(z);
  }
  return zs;
}

}  // namespace detail

/// Largest sampled Lipschitz quotient of (xi, x) -> f(xi, x, z), with Jacobian norms.
inline Certificate estimate_lipschitz_f(const VepProblem& P, const ConstantWindow& w, int per_axis = 11, int pairs = 400,
                                        std::uint64_t seed = 0) {
  Certificate c;
  c.kind = "lipschitz";
  std::mt19937_64 rng(seed);
  const auto xis = box_grid(w.xi.lower, w.xi.upper, detail::per_axis(per_axis, P.p(), 200));
  double lf = 0.0;
  for (const auto& xi : xis) {
    for (const auto& z : detail::z_samples(P, xi, 5)) {
      for (int k = 0; k < pairs / static_cast<int>(xis.size()) + 1; ++k) {
        const Vec x = random_in_box(rng, w.x.lower, w.x.upper);
        const Point pt = make_point(P, xi, x, z);
        for (const auto& J : P.f.jacobian_hull(pt.view(), Wrt::xi_x)) {
          lf = std::max(lf, Eigen::JacobiSVD<Mat>(J).singularValues()[0]);
        }
        const Vec dxi = 1e-3 * random_unit(rng, P.p()), dx = 1e-3 * random_unit(rng, P.n());
        const Point q = make_point(P, Vec(xi + dxi), Vec(x + dx), z);
        const double num = (P.f.eval(q.view()) - P.f.eval(pt.view())).norm();
        lf = std::max(lf, num / std::sqrt(dxi.squaredNorm() + dx.squaredNorm()));
      }
    }
  }
  c.constant = lf;
  c.verdict = std::isfinite(lf) ? Verdict::certified : Verdict::inconclusive;
  c.note("xi_points", std::to_string(xis.size()));
  c.note("pairs_per_z", std::to_string(pairs / static_cast<int>(xis.size()) + 1));
  return c;
}

/// Linear openness rate of the z-maps z -> f(xi, x, z): the smallest sampled radius a with
/// B(f(z), a r) inside f(B(z, r)), from the least singular value and a support coverage test.
inline Certificate estimate_openness_rate(const VepProblem& P, const ConstantWindow& w, int per_axis = 5, double r = 1e-3,
                                          std::uint64_t seed = 0) {
  Certificate c;
  c.kind = "openness";
  const int m = P.m, n = P.n();
  std::mt19937_64 rng(seed);
  const auto out_dirs = unit_directions(m, 64, seed);
  const auto in_dirs = unit_directions(n, n == 1 ? 2 : 2 * n + 64, seed + 1);
  double alpha = kInf;
  Vec witness;
  for (const auto& xi : box_grid(w.xi.lower, w.xi.upper, detail::per_axis(per_axis, P.p(), 50))) {
    for (const auto& x : box_grid(w.x.lower, w.x.upper, detail::per_axis(per_axis, n, 50))) {
      for (const auto& z : detail::z_samples(P, xi, 3)) {
        Point pt = make_point(P, xi, x, z);
        const Vec F = P.f.eval(pt.view());
        double a = 0.0;
        if (n >= m) {
          for (const auto& J : P.f.jacobian_hull(pt.view(), Wrt::z)) {
            const auto sv = Eigen::JacobiSVD<Mat>(J).singularValues();
            a = std::max(a, sv[m - 1]);
          }
        }
        double cover = kInf;
        std::vector<Vec> img;
        for (const auto& u : in_dirs) {
          pt.z = z + r * u;
          img.push_back((P.f.eval(pt.view()) - F) / r);
        }
        for (const auto& d : out_dirs) {
          double h = -kInf;
          for (const auto& v : img) h = std::max(h, v.dot(d));
          cover = std::min(cover, h);
        }
        a = std::min(a, std::max(cover, 0.0));
        if (a < alpha) {
          alpha = a;
          witness = concat(stack(xi, x), z);
        }
      }
    }
  }
  c.constant = alpha;
  if (witness.size() > 0) c.witnesses.push_back(witness);
  c.verdict = alpha > 1e-9 ? Verdict::certified : Verdict::refuted;
  c.note("radius", r);
  if (m > n) add_flag(c.flags, "image-dimension-deficit");
  return c;
}

struct ConstantsReport {
  Certificate lipschitz;
  Certificate openness;
  bool lf_below_alpha = false;
};

inline ConstantsReport estimate_constants(const VepProblem& P, std::uint64_t seed = 0) {
  ConstantsReport out;
  const auto w = default_constant_window(P);
  out.lipschitz = estimate_lipschitz_f(P, w, 11, 400, seed);
  out.openness = estimate_openness_rate(P, w, 5, 1e-3, seed);
  out.lf_below_alpha = out.lipschitz.constant < out.openness.constant;
  if (!out.lf_below_alpha) add_flag(out.openness.flags, "lf-not-below-alpha");
  return out;
}

struct StabilityReport {
  Certificate lsc;        // merit-radius ball around x_bar meets E(xi)
  Certificate aubin;      // sampled excess ratios against gamma^-1 ell_mf
  double beta_mf = 0.0;   // calmness of xi -> merit(xi, x_bar)
  double ell_mf = 0.0;    // Lipschitz constant of merit in xi near x_bar
  double aubin_bound = 0.0;
  double max_excess_ratio = 0.0;
};

inline StabilityReport stability_probe(const VepProblem& P, const Vec& xi_bar, const Vec& x_bar, double gamma, double rho,
                                       int per_axis = 21, const OracleGrid& og = {}) {
  if (!(gamma > 0)) throw PreconditionError("gamma must be positive");
  StabilityReport out;
  out.lsc.kind = "stability";
  out.aubin.kind = "stability";
  const auto xis = box_grid(Vec(xi_bar.array() - rho), Vec(xi_bar.array() + rho), detail::per_axis(per_axis, P.p(), 500));
  std::vector<OracleSet> sols(xis.size());
  parallel_for(xis.size(), [&](std::size_t k) { sols[k] = oracle_solutions(P, xis[k], og); });
  double step = 0.0;
  for (const auto& s : sols) step = std::max(step, s.step);
  const double m_bar = eval_merit(P, xi_bar, x_bar).merit;

  for (std::size_t k = 0; k < xis.size(); ++k) {
    const double mk = eval_merit(P, xis[k], x_bar).merit;
    const double d = (xis[k] - xi_bar).norm();
    if (d > 1e-12) out.beta_mf = std::max(out.beta_mf, std::max(mk - m_bar, 0.0) / d);
    if (dist(x_bar, sols[k].points) > mk / gamma + step + 1e-9) out.lsc.witnesses.push_back(xis[k]);
  }
  out.lsc.verdict = out.lsc.witnesses.empty() ? Verdict::certified : Verdict::refuted;
  out.lsc.constant = out.beta_mf;

  std::vector<Vec> xs;
  for (const auto& s : sols) {
    for (const auto& q : s.points) {
      if ((q - x_bar).norm() <= 1.0 + rho) push_unique(xs, q, 1e-12);
    }
  }
  if (xs.size() > 200) {
    std::vector<Vec> thin;
    for (std::size_t i = 0; i < xs.size(); i += xs.size() / 200 + 1) thin.push_back(xs[i]);
    xs = std::move(thin);
  }
  for (std::size_t i = 0; i < xis.size(); ++i) {
    for (std::size_t j = 0; j < xis.size(); ++j) {
      if (i == j) continue;
      const double d = (xis[i] - xis[j]).norm();
      for (const auto& x : xs) {
        out.ell_mf = std::max(out.ell_mf, std::abs(eval_merit(P, xis[i], x).merit - eval_merit(P, xis[j], x).merit) / d);
      }
    }
  }
  out.aubin_bound = out.ell_mf / gamma;
  const double min_sep = 0.1 * rho;
  bool bad = false;
  for (std::size_t i = 0; i < xis.size(); ++i) {
    for (std::size_t j = 0; j < xis.size(); ++j) {
      const double d = (xis[i] - xis[j]).norm();
      if (i == j || d < min_sep || sols[i].points.empty() || sols[j].points.empty()) continue;
      std::vector<Vec> local;
      for (const auto& q : sols[j].points) {
        if ((q - x_bar).norm() <= 1.0 + rho) local.push_back(q);
      }
      const double ratio = excess(local, sols[i].points) / d;
      out.max_excess_ratio = std::max(out.max_excess_ratio, ratio);
      if (ratio > out.aubin_bound + 2 * step / d + 1e-9 && !bad) {
        bad = true;
        out.aubin.witnesses.push_back(concat(xis[i], xis[j]));
      }
    }
  }
  out.aubin.constant = out.max_excess_ratio;
  out.aubin.verdict = bad ? Verdict::refuted : Verdict::certified;
  out.aubin.note("xi_points", std::to_string(xis.size()));
  out.aubin.note("oracle_step", step);
  return out;
}

}  // namespace vep

#endif  // VEP_DIAGNOSTICS_HPP
