#ifndef VEP_CLI_HPP
#define VEP_CLI_HPP

#include "vep/report.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

namespace vep::cli {

enum Exit : int {
  ok = 0,
  usage = 1,
  load_error = 2,
  eval_error = 3,
  refuted = 4,
  inconclusive = 5,
  solve_failure = 6,
};

struct Globals {
  std::uint64_t seed = 0;
  std::string format = "text";
  bool no_timings = false;
};

class Timer {
 public:
  void lap(Json& t, const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    t[name + "_s"] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline Report header(const std::string& command, const VepProblem& P, const Globals& g) {
  Report r;
  r.body["command"] = command;
  r.body["problem"] = P.id;
  r.body["hash"] = problem_hash(P);
  r.body["version"] = kToolVersion;
  r.body["seed"] = g.seed;
  return r;
}

inline Vec to_vec(const std::vector<double>& v, int dim, const std::string& name) {
  if (static_cast<int>(v.size()) != dim) {
    throw PreconditionError(name + " needs " + std::to_string(dim) + " value(s), got " + std::to_string(v.size()));
  }
  return Eigen::Map<const Vec>(v.data(), dim);
}

inline Json vec_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double d : v) a.push_back(d);
  return a;
}

/// Solver settings from a `key = value` file; unknown keys are rejected.
inline PenaltyConfig read_config(const std::string& path, int& starts) {
  std::ifstream in(path);
  if (!in) throw VepError("cannot open config file '" + path + "'");
  PenaltyConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path + ": line " + std::to_string(line_no) + ": expected key = value", 0);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    try {
      if (key == "lambda0") cfg.lambda0 = detail::parse_real(val);
      else if (key == "growth") cfg.growth = detail::parse_real(val);
      else if (key == "lambda_max") cfg.lambda_max = detail::parse_real(val);
      else if (key == "gamma") cfg.gamma = detail::parse_real(val);
      else if (key == "max_iter") cfg.max_iter = detail::parse_int(val);
      else if (key == "restarts") cfg.restarts = detail::parse_int(val);
      else if (key == "tol_stat") cfg.tol_stat = detail::parse_real(val);
      else if (key == "starts") starts = detail::parse_int(val);
      else throw VepError("unknown key '" + key + "'");
    } catch (const VepError& e) {
      throw ParseError(path + ": line " + std::to_string(line_no) + ": " + e.what(), 0);
    }
  }
  return cfg;
}

inline int exit_for(Verdict v) {
  switch (v) {
    case Verdict::certified: return ok;
    case Verdict::refuted: return refuted;
    case Verdict::inconclusive: return inconclusive;
  }
  return ok;
}

inline int exit_for(StationarityVerdict v) {
  switch (v) {
    case StationarityVerdict::stationary: return ok;
    case StationarityVerdict::refuted: return refuted;
    case StationarityVerdict::inconclusive: return inconclusive;
  }
  return ok;
}

/// Runs one command line (without the program name) and writes the report to `out`.
/// Errors go to `err`. Returns the process exit code.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vector equilibrium constrained optimization toolkit", "vep"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random sample");
  app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"text", "json-like"}));
  app.add_flag("--no-timings", g.no_timings, "Omit the timings block");

  std::string problem;
  std::vector<double> xi, x, xi_bar, x_bar, lambda_grid{0.5}, eps_list{0.05, 0.1};
  double epsilon = 0.0, rho = 1.0, gamma = 0.0, radius = 0.5, lf = 1.0;
  int xi_points = 41, x_points = 161, starts = 5;
  bool smooth_concave = false, trace = false;
  std::string config;

  auto add_problem = [&](CLI::App* c) { c->add_option("problem", problem, "Problem file or builtin id")->required(); };
  auto add_vec = [&](CLI::App* c, const std::string& name, std::vector<double>& v, bool required) {
    auto* o = c->add_option(name, v)->delimiter(',')->allow_extra_args(false);
    if (required) o->required();
  };

  auto* c_eval = app.add_subcommand("eval", "Evaluate nu, mu and the merit function");
  add_problem(c_eval);
  add_vec(c_eval, "--xi", xi, true);
  add_vec(c_eval, "--x", x, true);
  c_eval->add_option("--epsilon", epsilon, "Enlargement of K(xi) for nu")->check(CLI::NonNegativeNumber);

  auto* c_erbo = app.add_subcommand("check-erbo", "Estimate gamma and verify the error bound");
  add_problem(c_erbo);
  add_vec(c_erbo, "--xi-bar", xi_bar, true);
  c_erbo->add_option("--rho", rho)->check(CLI::PositiveNumber);
  c_erbo->add_option("--gamma", gamma)->check(CLI::PositiveNumber);
  c_erbo->add_option("--xi-points", xi_points)->check(CLI::PositiveNumber);
  c_erbo->add_option("--x-points", x_points)->check(CLI::PositiveNumber);

  auto* c_sub = app.add_subcommand("check-subtransversality", "Subtransversality of Omega x R^n and graph E");
  add_problem(c_sub);
  add_vec(c_sub, "--xi-bar", xi_bar, true);
  add_vec(c_sub, "--x-bar", x_bar, true);
  c_sub->add_option("--radius", radius)->check(CLI::PositiveNumber);

  auto* c_stat = app.add_subcommand("check-stationarity", "Check the necessary optimality condition");
  add_problem(c_stat);
  add_vec(c_stat, "--xi-bar", xi_bar, true);
  add_vec(c_stat, "--x-bar", x_bar, true);
  c_stat->add_option("--gamma", gamma)->required()->check(CLI::PositiveNumber);
  add_vec(c_stat, "--lambda-grid", lambda_grid, false);
  c_stat->add_flag("--smooth-concave", smooth_concave, "Use the outer estimate of d-nu");
  add_vec(c_stat, "--eps-list", eps_list, false);
  c_stat->add_option("--lf", lf)->check(CLI::NonNegativeNumber);

  auto* c_solve = app.add_subcommand("solve", "Penalty method from seeded starts");
  add_problem(c_solve);
  c_solve->add_option("--config", config, "key = value solver settings");
  c_solve->add_option("--starts", starts)->check(CLI::PositiveNumber);
  c_solve->add_flag("--trace", trace, "Include the full descent trace");

  auto* c_stab = app.add_subcommand("probe-stability", "Sampled stability of the solution map");
  add_problem(c_stab);
  add_vec(c_stab, "--xi-bar", xi_bar, true);
  add_vec(c_stab, "--x-bar", x_bar, true);
  c_stab->add_option("--gamma", gamma)->required()->check(CLI::PositiveNumber);
  c_stab->add_option("--rho", rho)->check(CLI::PositiveNumber);

  auto* c_const = app.add_subcommand("estimate-constants", "Lipschitz constant of f, openness rate, C-boundedness");
  add_problem(c_const);
  add_vec(c_const, "--xi", xi, false);
  add_vec(c_const, "--x", x, false);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return usage;
  }

  VepProblem P;
  Timer timer;
  Report rep;
  int code = ok;
  try {
    P = load_problem(problem);
  } catch (const VepError& e) {
    err << "load error: " << e.what() << "\n";
    return load_error;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  rep = header(cmd, P, g);
  timer.lap(rep.timings, "load");
  Json params = Json::object();
  Json results = Json::object();

  try {
    if (cmd == "eval") {
      const Vec vxi = to_vec(xi, P.p(), "--xi"), vx = to_vec(x, P.n(), "--x");
      params["xi"] = vec_json(xi);
      params["x"] = vec_json(x);
      params["epsilon"] = epsilon;
      MeritEval ev;
      try {
        ev = eval_nu(P, vxi, vx, epsilon);
        ev.mu = eval_mu(P, vxi, vx);
        ev.merit = ev.nu + ev.mu;
      } catch (const EvalError& e) {
        err << "evaluation error: " << e.what() << "\n";
        return eval_error;
      }
      results = to_json(ev);
      results["solution"] = ev.merit <= kMeritTol;
    } else if (cmd == "check-erbo") {
      const Vec vxi = to_vec(xi_bar, P.p(), "--xi-bar");
      params["xi_bar"] = vec_json(xi_bar);
      params["rho"] = rho;
      SampleSpec spec;
      spec.seed = g.seed;
      auto gc = estimate_gamma(P, vxi, rho, spec);
      timer.lap(rep.timings, "gamma");
      results["gamma_estimate"] = to_json(gc);
      const bool user_gamma = gamma > 0;
      const double used = user_gamma ? gamma : (gc.verdict == Verdict::certified ? 0.9 * gc.constant : 0.0);
      params["gamma"] = user_gamma ? Json(gamma) : Json("0.9 * estimate");
      Verdict overall = gc.verdict;
      if (used > 0) {
        ErrorBoundGrid grid;
        grid.xi_points = xi_points;
        grid.x_points = x_points;
        auto eb = verify_error_bound(P, vxi, rho, used, grid);
        timer.lap(rep.timings, "error_bound");
        results["gamma_used"] = used;
        results["error_bound"] = to_json(eb);
        overall = eb.verdict;
      } else if (oracle_solutions(P, vxi).points.empty()) {
        overall = Verdict::inconclusive;
        results["flags"] = to_json(std::vector<std::string>{"empty-solution-set"});
      }
      results["verdict"] = verdict_name(overall);
      code = exit_for(overall);
    } else if (cmd == "check-subtransversality") {
      const Vec vxi = to_vec(xi_bar, P.p(), "--xi-bar"), vx = to_vec(x_bar, P.n(), "--x-bar");
      params["xi_bar"] = vec_json(xi_bar);
      params["x_bar"] = vec_json(x_bar);
      params["radius"] = radius;
      auto st = check_subtransversality(P, vxi, vx, radius, 41, g.seed + 3);
      results["normal_cone_test"] = to_json(st.nc);
      results["kappa"] = to_json(st.kappa);
      const Verdict v = st.nc.verdict == Verdict::refuted ? st.kappa.verdict : st.nc.verdict;
      results["verdict"] = verdict_name(v);
      code = exit_for(v);
    } else if (cmd == "check-stationarity") {
      const Vec vxi = to_vec(xi_bar, P.p(), "--xi-bar"), vx = to_vec(x_bar, P.n(), "--x-bar");
      params["xi_bar"] = vec_json(xi_bar);
      params["x_bar"] = vec_json(x_bar);
      params["gamma"] = gamma;
      params["lambda_grid"] = vec_json(lambda_grid);
      params["mode"] = smooth_concave ? "smooth-concave" : "general";
      StationarityReport sr;
      if (smooth_concave) {
        params["eps_list"] = vec_json(eps_list);
        params["lf"] = lf;
        sr = check_stationarity_smooth_concave(P, vxi, vx, lambda_grid, gamma, eps_list, lf);
      } else {
        sr = check_stationarity_general(P, vxi, vx, lambda_grid, gamma);
      }
      results = to_json(sr);
      code = exit_for(sr.verdict);
    } else if (cmd == "solve") {
      PenaltyConfig cfg;
      if (!config.empty()) cfg = read_config(config, starts);
      cfg.seed = g.seed;
      params["lambda0"] = cfg.lambda0;
      params["growth"] = cfg.growth;
      params["lambda_max"] = cfg.lambda_max;
      params["gamma"] = cfg.gamma;
      params["max_iter"] = cfg.max_iter;
      params["restarts"] = cfg.restarts;
      params["starts"] = starts;
      auto sv = solve_penalized(P, cfg, default_starts(P, starts, g.seed));
      timer.lap(rep.timings, "solve");
      results = to_json(sv, trace);
      if (sv.status == "converged") {
        std::vector<double> lams;
        for (const auto& st : sv.stages) lams.push_back(st.lambda);
        StationarityOptions so;
        so.tol = 1e-6;
        try {
          results["post_check"] = to_json(check_stationarity_general(P, sv.xi, sv.x, lams, cfg.gamma, so));
        } catch (const PreconditionError& e) {
          results["post_check"] = Json{{"error", e.what()}};
        }
      } else {
        results["diagnosis"] = sv.status == "unbounded-below"
                                   ? "penalized objective decreased without bound"
                                   : "no incumbent with zero merit in Omega up to lambda_max; graph E may not meet Omega in the window";
        code = solve_failure;
      }
    } else if (cmd == "probe-stability") {
      const Vec vxi = to_vec(xi_bar, P.p(), "--xi-bar"), vx = to_vec(x_bar, P.n(), "--x-bar");
      params["xi_bar"] = vec_json(xi_bar);
      params["x_bar"] = vec_json(x_bar);
      params["gamma"] = gamma;
      params["rho"] = rho;
      auto sp = stability_probe(P, vxi, vx, gamma, rho);
      results["beta_mf"] = sp.beta_mf;
      results["ell_mf"] = sp.ell_mf;
      results["aubin_bound"] = sp.aubin_bound;
      results["max_excess_ratio"] = sp.max_excess_ratio;
      results["lsc_ball"] = to_json(sp.lsc);
      results["aubin"] = to_json(sp.aubin);
      const Verdict v = sp.lsc.verdict == Verdict::refuted || sp.aubin.verdict == Verdict::refuted ? Verdict::refuted : Verdict::certified;
      results["verdict"] = verdict_name(v);
      code = exit_for(v);
    } else if (cmd == "estimate-constants") {
      auto cs = estimate_constants(P, g.seed);
      results["lipschitz_f"] = to_json(cs.lipschitz);
      results["openness"] = to_json(cs.openness);
      results["lf_below_alpha"] = cs.lf_below_alpha;
      if (!xi.empty() || !x.empty()) {
        const Vec vxi = to_vec(xi, P.p(), "--xi"), vx = to_vec(x, P.n(), "--x");
        params["xi"] = vec_json(xi);
        params["x"] = vec_json(x);
        results["c_bounded"] = to_json(check_c_bounded(P, vxi, vx));
      }
    }
  } catch (const PreconditionError& e) {
    err << "precondition error: " << e.what() << "\n";
    return load_error;
  } catch (const ParseError& e) {
    err << "load error: " << e.what() << "\n";
    return load_error;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return load_error;
  } catch (const EvalError& e) {
    err << "evaluation error: " << e.what() << "\n";
    return eval_error;
  } catch (const VepError& e) {
    err << "error: " << e.what() << "\n";
    return eval_error;
  }
  timer.lap(rep.timings, "command");
  rep.body["parameters"] = params;
  rep.body["results"] = results;
  rep.render(out, g.format == "json-like", !g.no_timings);
  return code;
}

inline int run(const std::vector<std::string>& args, std::ostream& out) { return run(args, out, std::cerr); }

}  // namespace vep::cli

#endif  // VEP_CLI_HPP
