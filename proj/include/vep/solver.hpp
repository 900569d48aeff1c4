#ifndef VEP_SOLVER_HPP
#define VEP_SOLVER_HPP

#include "vep/diagnostics.hpp"

namespace vep {

/// objective + lambda·dist(xi, Omega) + (lambda/gamma)·merit.
inline double penalized_value(const VepProblem& P, const Vec& xi, const Vec& x, double lambda, double gamma) {
  if (!(lambda > 0) || !(gamma > 0)) throw PreconditionError("lambda and gamma must be positive");
  const Point pt = make_point(P, xi, x);
  return eval(P.objective, pt.view()) + lambda * dist(xi, P.omega) + lambda / gamma * eval_merit(P, xi, x).merit;
}

struct PenaltyConfig {
  double lambda0 = 0.5;
  double growth = 2.0;
  double lambda_max = 64.0;
  double gamma = 1.0;
  int max_iter = 400;
  int restarts = 2;
  double tol_stat = 1e-6;
  double tol_feasible = 1e-6;
  double radius0 = 0.1;
  double radius_min = 1e-7;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lambda0 > 0)) throw PreconditionError("lambda0 must be positive");
    if (!(growth > 1)) throw PreconditionError("growth must exceed 1");
    if (!(gamma > 0)) throw PreconditionError("gamma must be positive");
    if (!(tol_stat > 0)) throw PreconditionError("tol_stat must be positive");
    if (max_iter < 1) throw PreconditionError("max_iter must be positive");
  }
};

struct TraceEntry {
  int stage = 0;
  int start = 0;
  int iter = 0;
  double lambda = 0.0;
  double value = 0.0;
  double step = 0.0;
  double radius = 0.0;
};

struct StageRecord {
  double lambda = 0.0;
  Vec xi, x;
  double value = 0.0;
  double merit = 0.0;
  double objective = 0.0;
  int iterations = 0;
};

struct SolveResult {
  Vec xi, x;
  double objective = 0.0;
  double merit = 0.0;
  double lambda = 0.0;
  bool feasible = false;
  std::string status;  // converged | iteration-cap | unbounded-below
  std::vector<StageRecord> stages;
  std::vector<TraceEntry> trace;
};

namespace detail {

// Gradient of the penalized function at w, pieces selected at w itself.
inline Vec penalty_gradient(const VepProblem& P, const Vec& w, double lambda, double gamma) {
  const int p = P.p(), n = P.n();
  auto [xi, x] = split(P, w);
  const Point pt = make_point(P, xi, x);
  Vec g = grad_selected(P.objective, pt.view(), pt.view(), Wrt::xi_x);
  const Vec pxi = project(xi, P.omega);
  const double dxi = (xi - pxi).norm();
  if (dxi > 1e-14) g.head(p) += lambda * (xi - pxi) / dxi;
  const double t = lambda / gamma;
  g += t * nu_active_gradient(P, w, w);
  const auto S = slice(P, xi);
  const Vec px = project(x, S);
  const double mu = (x - px).norm();
  if (mu > 1e-14) {
    const Vec r = (x - px) / mu;
    Vec gm = Vec::Zero(p + n);
    gm.tail(n) = r;
    if (P.K.form == ParamSet::Form::box) {
      for (int i = 0; i < n; ++i) {
        const Expr* bound = nullptr;
        if (x[i] > S.upper[i]) bound = &P.K.upper[static_cast<std::size_t>(i)];
        if (x[i] < S.lower[i]) bound = &P.K.lower[static_cast<std::size_t>(i)];
        if (bound) gm.head(p) -= r[i] * grad_selected(*bound, pt.view(), pt.view(), Wrt::xi).head(p);
      }
    } else {
      const double h = 1e-7;
      for (int j = 0; j < p; ++j) {
        Vec a = xi, b = xi;
        a[j] += h;
        b[j] -= h;
        gm[j] = (eval_mu(P, a, x) - eval_mu(P, b, x)) / (2 * h);
      }
    }
    g += t * gm;
  }
  return g;
}

struct Descent {
  Vec w;
  double value = 0.0;
  int iterations = 0;
  bool unbounded = false;
  std::vector<TraceEntry> trace;
};

// Gradient sampling with a min-norm direction, Armijo backtracking and radius shrinking.
inline Descent gradient_sampling(const VepProblem& P, Vec w, double lambda, const PenaltyConfig& cfg, std::uint64_t seed) {
  const int dim = P.p() + P.n();
  std::mt19937_64 rng(seed);
  auto value = [&](const Vec& v) {
    auto [a, b] = split(P, v);
    return penalized_value(P, a, b, lambda, cfg.gamma);
  };
  Descent d;
  d.value = value(w);
  double radius = cfg.radius0;
  const int samples = 2 * dim + 1;
  for (int it = 0; it < cfg.max_iter; ++it) {
    d.iterations = it + 1;
    std::vector<Vec> grads{penalty_gradient(P, w, lambda, cfg.gamma)};
    for (int s = 0; s < samples; ++s) {
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      const double rr = radius * std::pow(uni(rng), 1.0 / dim);
      grads.push_back(penalty_gradient(P, Vec(w + rr * random_unit(rng, dim)), lambda, cfg.gamma));
    }
    const auto mn = wolfe_min_norm(grads, 1e-12);
    if (mn.norm <= cfg.tol_stat) {
      radius *= 0.1;
      if (radius < cfg.radius_min) break;
      continue;
    }
    const Vec dir = -mn.point / mn.norm;
    double step = std::max(radius, 1e-3) * 10;
    bool accepted = false;
    while (step > 1e-13) {
      const Vec cand = w + step * dir;
      const double v = value(cand);
      if (v <= d.value - 1e-6 * step * mn.norm) {
        w = cand;
        d.value = v;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    d.trace.push_back({0, 0, it, lambda, d.value, accepted ? step : 0.0, radius});
    if (d.value < -1e12) {
      d.unbounded = true;
      break;
    }
    if (!accepted) {
      radius *= 0.1;
      if (radius < cfg.radius_min) break;
    }
  }
  d.w = w;
  return d;
}

}  // namespace detail

/// Penalty schedule: for each lambda, descend from every start (in parallel) and from perturbed
/// copies of the stage incumbent; stop once the incumbent solves the lower level and lies in Omega.
inline SolveResult solve_penalized(const VepProblem& P, const PenaltyConfig& cfg, std::vector<Vec> starts) {
  cfg.validate();
  if (starts.empty()) throw PreconditionError("solve needs at least one start");
  const int dim = P.p() + P.n();
  for (const auto& s : starts) {
    if (s.size() != dim) throw PreconditionError("start has wrong dimension");
  }
  SolveResult res;
  res.status = "iteration-cap";
  std::mt19937_64 rng(cfg.seed);
  int stage = 0;
  for (double lambda = cfg.lambda0; lambda <= cfg.lambda_max * (1 + 1e-12); lambda *= cfg.growth, ++stage) {
    std::vector<detail::Descent> runs(starts.size());
    std::vector<std::uint64_t> seeds(starts.size());
    for (auto& s : seeds) s = rng();
    parallel_for(starts.size(), [&](std::size_t k) { runs[k] = detail::gradient_sampling(P, starts[k], lambda, cfg, seeds[k]); });
    std::size_t best = 0;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      if (runs[k].unbounded) {
        res.status = "unbounded-below";
        res.xi = runs[k].w.head(P.p());
        res.x = runs[k].w.tail(P.n());
        return res;
      }
      for (auto t : runs[k].trace) {
        t.stage = stage;
        t.start = static_cast<int>(k);
        res.trace.push_back(t);
      }
      if (runs[k].value < runs[best].value) best = k;
    }
    Vec w = runs[best].w;
    double val = runs[best].value;
    int iters = 0;
    for (const auto& r : runs) iters += r.iterations;
    for (int r = 0; r < cfg.restarts; ++r) {
      const Vec start = w + cfg.radius0 * random_unit(rng, dim);
      auto d = detail::gradient_sampling(P, start, lambda, cfg, rng());
      iters += d.iterations;
      for (auto t : d.trace) {
        t.stage = stage;
        t.start = static_cast<int>(starts.size()) + r;
        res.trace.push_back(t);
      }
      if (d.value < val) {
        val = d.value;
        w = d.w;
      }
    }
    auto [xi, x] = split(P, w);
    StageRecord rec;
    rec.lambda = lambda;
    rec.xi = xi;
    rec.x = x;
    rec.value = val;
    rec.merit = eval_merit(P, xi, x).merit;
    rec.objective = eval(P.objective, make_point(P, xi, x).view());
    rec.iterations = iters;
    res.stages.push_back(rec);
    res.xi = xi;
    res.x = x;
    res.lambda = lambda;
    res.merit = rec.merit;
    res.objective = rec.objective;
    res.feasible = rec.merit <= cfg.tol_feasible && dist(xi, P.omega) <= cfg.tol_feasible;
    if (res.feasible) {
      res.status = "converged";
      break;
    }
    for (auto& r : runs) r.w = w;
    for (std::size_t k = 0; k < starts.size(); ++k) starts[k] = runs[k].w;
  }
  return res;
}

/// Seeded uniform starts in the problem windows (or [-2, 2] boxes).
inline std::vector<Vec> default_starts(const VepProblem& P, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Vec lo = concat(P.window_xi ? P.window_xi->lower : Vec::Constant(P.p(), -2.0), P.window_x ? P.window_x->lower : Vec::Constant(P.n(), -2.0));
  const Vec hi = concat(P.window_xi ? P.window_xi->upper : Vec::Constant(P.p(), 2.0), P.window_x ? P.window_x->upper : Vec::Constant(P.n(), 2.0));
  std::vector<Vec> out;
  for (int k = 0; k < count; ++k) out.push_back(random_in_box(rng, lo, hi));
  return out;
}

enum class StationarityVerdict { stationary, refuted, inconclusive };

inline std::string stationarity_name(StationarityVerdict v) {
  switch (v) {
    case StationarityVerdict::stationary: return "stationary-within-tol";
    case StationarityVerdict::refuted: return "refuted-by-direction";
    case StationarityVerdict::inconclusive: return "inconclusive";
  }
  return "";
}

struct StationarityReport {
  Vec xi, x;
  double gamma = 0.0;
  std::vector<double> lambdas;
  Mat residual_table;  // rows: lambda, columns: branch (max over eps for the smooth-concave check)
  double residual = kInf;
  double lambda = 0.0;
  int branch_id = 0;
  StationarityVerdict verdict = StationarityVerdict::inconclusive;
  std::vector<std::string> witness_labels;
  std::vector<Vec> witness;
  Vec direction;
  double c0 = 0.0, c1 = 0.0;
  std::vector<double> eps;
  std::vector<std::string> flags;
};

struct StationarityOptions {
  double tol = 1e-9;
  std::vector<Vec> directions;  // empty: axes and 32 spread directions
};

namespace detail {

struct RhsParts {
  ConvexBody dphi;
  ConvexBody normal;  // (N(xi; Omega) ∩ B) × {0}
  std::vector<ConvexBody> mu_branches;
  std::vector<std::string> flags;
};

inline RhsParts rhs_parts(const VepProblem& P, const Vec& xi, const Vec& x) {
  RhsParts r;
  const int p = P.p(), dim = p + P.n();
  auto dphi = objective_subgradient(P, xi, x);
  r.dphi = dphi.body();
  auto N = normal_cone(P.omega, xi);
  r.normal = embed(ConvexBody::cap(N.branches.front(), 1.0), dim, 0);
  auto mu = mu_subgradient_estimate(P, xi, x);
  r.mu_branches = mu.branches;
  r.flags = mu.flags;
  for (const auto& q : mu.qc_flags) add_flag(r.flags, q);
  if (dphi.exactness != Exactness::exact_convex) add_flag(r.flags, "objective-branch-hull");
  return r;
}

inline void check_on_solution(const VepProblem& P, const Vec& xi, const Vec& x, double gamma) {
  if (!(gamma > 0)) throw PreconditionError("gamma must be positive");
  if (eval_merit(P, xi, x).merit > 1e-6) throw PreconditionError("point is not on graph E (merit above tolerance)");
  if (dist(xi, P.omega) > 1e-6) throw PreconditionError("parameter lies outside Omega");
}

inline std::vector<Vec> default_directions(int dim) {
  auto dirs = unit_directions(dim, 32);
  for (int i = 0; i < dim; ++i) {
    push_unique(dirs, Vec::Unit(dim, i), 1e-12);
    push_unique(dirs, Vec(-Vec::Unit(dim, i)), 1e-12);
  }
  return dirs;
}

struct Residuals {
  Mat table;
  double best = kInf;
  int li = 0, bi = 0;
};

inline Residuals residual_table(const RhsParts& parts, const ConvexBody& dnu, const std::vector<double>& lambdas, double gamma) {
  Residuals r;
  const auto nb = static_cast<Eigen::Index>(parts.mu_branches.size());
  r.table = Mat::Constant(static_cast<Eigen::Index>(lambdas.size()), nb, kInf);
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    const double lam = lambdas[l];
    for (Eigen::Index b = 0; b < nb; ++b) {
      ConvexBody body = minkowski_sum(parts.dphi, scaled(parts.normal, lam));
      body = minkowski_sum(body, scaled(minkowski_sum(dnu, parts.mu_branches[static_cast<std::size_t>(b)]), lam / gamma));
      const double v = min_norm_point(body).dist0;
      r.table(static_cast<Eigen::Index>(l), b) = v;
      if (v < r.best) {
        r.best = v;
        r.li = static_cast<int>(l);
        r.bi = static_cast<int>(b);
      }
    }
  }
  return r;
}

// Sign test of s(lambda) = c0 + lambda·c1, the support of the right-hand side in direction d.
inline bool refuting_direction(const RhsParts& parts, const ConvexBody& dnu, double gamma, const Vec& d, double& c0, double& c1) {
  c0 = support(parts.dphi, d);
  double hb = -kInf;
  for (const auto& m : parts.mu_branches) hb = std::max(hb, support(minkowski_sum(dnu, m), d));
  c1 = support(parts.normal, d) + hb / gamma;
  return c0 < -1e-12 && c1 <= 1e-12;
}

inline void fill_witness(StationarityReport& rep, const RhsParts& parts, const ConvexBody& dnu, double lam, double gamma) {
  const auto& m = parts.mu_branches[static_cast<std::size_t>(rep.branch_id)];
  std::vector<ConvexBody> bodies{parts.dphi, scaled(parts.normal, lam), scaled(dnu, lam / gamma), scaled(m, lam / gamma)};
  auto dec = min_energy_decomposition(bodies, Vec::Zero(parts.dphi.dim));
  rep.witness = dec.parts;
  for (auto& v : rep.witness) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::abs(v[i]) < 1e-12) v[i] = 0.0;
    }
  }
  rep.witness_labels = {"objective", "lambda*normal(Omega)", "(lambda/gamma)*d-nu", "(lambda/gamma)*coderivative-K"};
}

}  // namespace detail

/// Necessary-condition check: 0 in d-objective + lambda·(N(xi; Omega) ∩ B) × {0}
/// + (lambda/gamma)·[d-nu + D*K(xi | x)(B) × B], minimized over lambda and coderivative branches.
inline StationarityReport check_stationarity_general(const VepProblem& P, const Vec& xi, const Vec& x, std::vector<double> lambdas,
                                                     double gamma, const StationarityOptions& opt = {}) {
  detail::check_on_solution(P, xi, x, gamma);
  if (lambdas.empty()) throw PreconditionError("lambda grid is empty");
  StationarityReport rep;
  rep.xi = xi;
  rep.x = x;
  rep.gamma = gamma;
  rep.lambdas = lambdas;
  auto parts = detail::rhs_parts(P, xi, x);
  rep.flags = parts.flags;
  auto dnu = nu_subgradient_full(P, xi, x);
  for (const auto& f : dnu.flags) add_flag(rep.flags, f);
  if (dnu.exactness == Exactness::outer_estimate) add_flag(rep.flags, "d-nu-" + exactness_name(dnu.exactness));
  add_flag(rep.flags, dnu.locally_lipschitz ? "singular-qc-lipschitz" : "qc-assumed");

  auto res = detail::residual_table(parts, dnu.body(), lambdas, gamma);
  rep.residual_table = res.table;
  rep.residual = res.best;
  rep.lambda = lambdas[static_cast<std::size_t>(res.li)];
  rep.branch_id = res.bi;
  if (rep.residual <= opt.tol) {
    rep.verdict = StationarityVerdict::stationary;
    detail::fill_witness(rep, parts, dnu.body(), rep.lambda, gamma);
    return rep;
  }
  const auto dirs = opt.directions.empty() ? detail::default_directions(P.p() + P.n()) : opt.directions;
  for (const auto& d : dirs) {
    double c0 = 0, c1 = 0;
    if (detail::refuting_direction(parts, dnu.body(), gamma, d, c0, c1)) {
      rep.verdict = StationarityVerdict::refuted;
      rep.direction = d;
      rep.c0 = c0;
      rep.c1 = c1;
      return rep;
    }
  }
  rep.verdict = StationarityVerdict::inconclusive;
  return rep;
}

/// Same check with d-nu replaced by the outer estimate for every eps; stationarity needs one lambda
/// that works for all eps, refutation needs one eps with a separating direction.
inline StationarityReport check_stationarity_smooth_concave(const VepProblem& P, const Vec& xi, const Vec& x,
                                                            std::vector<double> lambdas, double gamma,
                                                            const std::vector<double>& eps_list, double lip_f,
                                                            const StationarityOptions& opt = {}) {
  detail::check_on_solution(P, xi, x, gamma);
  if (lambdas.empty()) throw PreconditionError("lambda grid is empty");
  StationarityReport rep;
  rep.xi = xi;
  rep.x = x;
  rep.gamma = gamma;
  rep.lambdas = lambdas;
  auto parts = detail::rhs_parts(P, xi, x);
  rep.flags = parts.flags;
  if (!(P.hyp.f_c_concave && P.hyp.f_smooth)) add_flag(rep.flags, "smooth-concave-not-asserted");
  auto outer = nu_outer_estimate(P, xi, x, eps_list, lip_f);
  rep.eps = outer.eps;
  for (const auto& f : outer.estimate.flags) add_flag(rep.flags, f);

  const auto nb = static_cast<Eigen::Index>(parts.mu_branches.size());
  rep.residual_table = Mat::Constant(static_cast<Eigen::Index>(lambdas.size()), nb, -kInf);
  std::vector<detail::Residuals> per_eps;
  for (const auto& body : outer.bodies) per_eps.push_back(detail::residual_table(parts, body, lambdas, gamma));
  Vec worst_over_eps = Vec::Constant(static_cast<Eigen::Index>(lambdas.size()), -kInf);
  for (const auto& r : per_eps) {
    rep.residual_table = rep.residual_table.cwiseMax(r.table);
    for (Eigen::Index l = 0; l < r.table.rows(); ++l) worst_over_eps[l] = std::max(worst_over_eps[l], r.table.row(l).minCoeff());
  }
  Eigen::Index li = 0;
  rep.residual = worst_over_eps.minCoeff(&li);
  rep.lambda = lambdas[static_cast<std::size_t>(li)];
  Eigen::Index bi = 0;
  per_eps.front().table.row(li).minCoeff(&bi);
  rep.branch_id = static_cast<int>(bi);
  if (rep.residual <= opt.tol) {
    rep.verdict = StationarityVerdict::stationary;
    detail::fill_witness(rep, parts, outer.bodies.front(), rep.lambda, gamma);
    return rep;
  }
  const auto dirs = opt.directions.empty() ? detail::default_directions(P.p() + P.n()) : opt.directions;
  for (const auto& body : outer.bodies) {
    for (const auto& d : dirs) {
      double c0 = 0, c1 = 0;
      if (detail::refuting_direction(parts, body, gamma, d, c0, c1)) {
        rep.verdict = StationarityVerdict::refuted;
        rep.direction = d;
        rep.c0 = c0;
        rep.c1 = c1;
        return rep;
      }
    }
  }
  rep.verdict = StationarityVerdict::inconclusive;
  return rep;
}

}  // namespace vep

#endif  // VEP_SOLVER_HPP
