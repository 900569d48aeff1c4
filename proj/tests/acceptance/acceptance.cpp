// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: vep_acceptance [--expect-fail 3,5]
// Exit status is 0 when the set of failing criteria equals the expected set.

#include "vep/vep.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>

using namespace vep;

namespace {

constexpr double kNuTol = 1e-9;
constexpr int kNuSamples = 10000;
constexpr double kNuSeconds = 5;
constexpr double kOracleSeconds = 10;
constexpr double kHullTol = 1e-9;
constexpr double kCoderivativeTol = 1e-9;
constexpr double kResidualTol = 1e-9;
constexpr double kWitnessTol = 1e-6;
constexpr double kGammaLo = 0.99, kGammaHi = 1.01;
constexpr double kErrorBoundGamma = 0.9;
constexpr double kErrorBoundSeconds = 30;
constexpr double kSolveTol = 1e-3;
constexpr std::size_t kMaxStages = 4;
constexpr int kSolveStarts = 5;
constexpr double kSolveSeconds = 60;
constexpr double kPropertySeconds = 30;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) { return detail::format_number(v); }

std::string secs(double t) { return fmt(std::round(t * 100) / 100) + " s"; }

std::string fmt(const Vec& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + ")";
}

std::string fmt(const std::vector<Vec>& pts) {
  std::string s = "{";
  for (std::size_t i = 0; i < pts.size(); ++i) s += (i ? ", " : "") + fmt(pts[i]);
  return s + "}";
}

bool same_points(const std::vector<Vec>& a, const std::vector<Vec>& b, double tol) {
  for (const auto& p : a) {
    if (dist(p, b) > tol) return false;
  }
  for (const auto& p : b) {
    if (dist(p, a) > tol) return false;
  }
  return true;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

const VepProblem& example() {
  static const VepProblem P = load_problem("example:paper");
  return P;
}

Outcome golden_nu() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  double worst = 0.0;
  bool exact_path = true;
  for (int k = 0; k < kNuSamples; ++k) {
    const Vec w = random_in_box(rng, vec({-3, -3}), vec({3, 3}));
    const auto e = eval_nu(example(), w.head(1), w.tail(1));
    exact_path = exact_path && e.method == "vertex-exact";
    worst = std::max(worst, std::abs(e.nu - std::max(std::abs(w[0]) + 1 - w[1], 0.0)));
  }
  const double t = seconds_since(t0);
  return {worst <= kNuTol && exact_path && t < kNuSeconds,
          "max error " + fmt(worst) + (exact_path ? ", vertex-exact" : ", non-exact path used") + ", " + secs(t)};
}

Outcome golden_solution_map() {
  const auto t0 = Clock::now();
  bool ok = true;
  double worst = 0.0;
  for (double xi : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    const auto sol = oracle_solutions(example(), vec({xi}));
    if (sol.points.empty()) ok = false;
    for (const auto& q : sol.points) {
      const double err = std::abs(q[0] - (std::abs(xi) + 1));
      worst = std::max(worst, err);
      ok = ok && err <= sol.step;
    }
  }
  const double t = seconds_since(t0);
  return {ok && t < kOracleSeconds, "max offset " + fmt(worst) + ", " + secs(t)};
}

Outcome golden_subdifferential() {
  const std::vector<Vec> expected{vec({-1, -1}), vec({-1, 1}), vec({0, 0})};
  const auto s = nu_subgradient_full(example(), vec({0}), vec({1}));
  const auto& got = s.body().hull_points;
  return {same_points(got, expected, kHullTol), "hull " + fmt(got) + ", expected " + fmt(expected)};
}

Outcome golden_coderivative() {
  bool ok = true;
  std::ostringstream det;
  for (double v : {-1.0, -0.5, 0.0, 0.5}) {
    const auto img = coderivative_K(example(), vec({0}), vec({1}), vec({v}));
    std::vector<Vec> got;
    for (const auto& b : img.branches) {
      for (const auto& p : b.hull_points) push_unique(got, p, kCoderivativeTol);
    }
    const bool good = v > 0 ? img.empty() : same_points(got, {vec({-v}), vec({v})}, kCoderivativeTol);
    ok = ok && good;
    det << "v=" << fmt(v) << ": " << (img.empty() ? "empty" : fmt(got)) << (good ? "" : " (mismatch)") << "; ";
  }
  return {ok, det.str()};
}

Outcome golden_stationarity() {
  const auto& P = example();
  const auto a = check_stationarity_general(P, vec({0}), vec({1}), {0.5}, 0.5);
  const std::vector<Vec> expected{vec({0, 2}), vec({0, 0}), vec({0, -1}), vec({0, -1})};
  bool witness_ok = a.witness.size() == expected.size();
  for (std::size_t i = 0; witness_ok && i < expected.size(); ++i) witness_ok = (a.witness[i] - expected[i]).norm() <= kWitnessTol;
  const bool first = a.verdict == StationarityVerdict::stationary && a.residual <= kResidualTol && witness_ok;

  const auto b = check_stationarity_general(P, vec({0.5}), vec({1.5}), {0.5}, 0.5);
  const bool second = b.verdict == StationarityVerdict::refuted && b.direction.size() == 2 &&
                      (b.direction.normalized() - vec({-1, 0})).norm() <= 1e-9;
  std::string det = "(0,1): " + stationarity_name(a.verdict) + " residual " + fmt(a.residual) + " witness " + fmt(a.witness) +
                    "; (0.5,1.5): " + stationarity_name(b.verdict) + " residual " + fmt(b.residual);
  if (b.verdict == StationarityVerdict::refuted) det += " direction " + fmt(b.direction);
  return {first && second, det};
}

Outcome error_bound() {
  const auto t0 = Clock::now();
  const auto g = estimate_gamma(example(), vec({0}), 1.0);
  ErrorBoundGrid grid;
  grid.xi_points = 41;
  grid.x_points = 161;
  grid.x_window = Window{vec({-4}), vec({4})};
  const auto eb = verify_error_bound(example(), vec({0}), 1.0, kErrorBoundGamma, grid);
  const double t = seconds_since(t0);
  const bool ok = g.constant >= kGammaLo && g.constant <= kGammaHi && eb.verdict == Verdict::certified && t < kErrorBoundSeconds;
  return {ok, "gamma_est " + fmt(g.constant) + ", error bound at 0.9 " + verdict_name(eb.verdict) + ", " + secs(t)};
}

Outcome solver_convergence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::vector<Vec> starts;
  for (int k = 0; k < kSolveStarts; ++k) starts.push_back(random_in_box(rng, vec({-2, -2}), vec({2, 2})));
  PenaltyConfig cfg;
  cfg.seed = 2024;
  const auto res = solve_penalized(example(), cfg, starts);
  const double t = seconds_since(t0);
  const double err = res.xi.size() == 1 ? (concat(res.xi, res.x) - vec({0, 1})).norm() : kInf;
  const bool ok = res.status == "converged" && err <= kSolveTol && res.stages.size() <= kMaxStages && t < kSolveSeconds;
  return {ok, res.status + ", distance " + fmt(err) + ", " + std::to_string(res.stages.size()) + " stage(s), " + secs(t)};
}

Outcome property_suites() {
  struct Suite {
    const char* binary;
    const char* filter;
  };
  const Suite suites[] = {
      {"test_expr", "ExprProperty.*"},         {"test_geometry", "GeometryProperty.*"},
      {"test_problem", "ProblemProperty.*"},   {"test_merit", "MeritProperty.*"},
      {"test_subdiff", "SubdiffProperty.*"},   {"test_diagnostics", "DiagnosticsProperty.*"},
      {"test_solver", "SolverProperty.*"},     {"test_properties", "*"},
  };
  bool ok = true;
  std::ostringstream det;
  for (const auto& s : suites) {
    const std::string cmd = std::string(VEP_TEST_BIN_DIR) + "/" + s.binary + " --gtest_filter='" + s.filter + "' > /dev/null 2>&1";
    const auto t0 = Clock::now();
    const int rc = std::system(cmd.c_str());
    const double t = seconds_since(t0);
    const bool good = rc == 0 && t < kPropertySeconds;
    ok = ok && good;
    det << s.binary << (good ? " ok " : " FAILED ") << secs(t) << "; ";
  }
  return {ok, det.str()};
}

Outcome determinism() {
  const std::vector<std::vector<std::string>> commands{
      {"eval", "example:paper", "--xi", "0.3", "--x", "-0.2"},
      {"check-erbo", "example:paper", "--xi-bar", "0", "--rho", "1"},
      {"check-subtransversality", "example:paper", "--xi-bar", "0", "--x-bar", "1"},
      {"check-stationarity", "example:paper", "--xi-bar", "0", "--x-bar", "1", "--gamma", "0.5"},
      {"solve", "example:paper"},
      {"probe-stability", "example:paper", "--xi-bar", "0", "--x-bar", "1", "--gamma", "0.9"},
      {"estimate-constants", "example:paper", "--xi", "0", "--x", "0"},
  };
  int same = 0, total = 0;
  for (const char* format : {"text", "json-like"}) {
    for (auto args : commands) {
      args.insert(args.end(), {"--seed", "99", "--no-timings", "--format", format});
      std::ostringstream a, b, ea, eb;
      const int ca = cli::run(args, a, ea), cb = cli::run(args, b, eb);
      ++total;
      if (ca == cb && a.str() == b.str() && !a.str().empty()) ++same;
    }
  }
  return {same == total, std::to_string(same) + "/" + std::to_string(total) + " command runs identical"};
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.insert(std::stoi(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> expected_failures;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--expect-fail" && i + 1 < argc) expected_failures = parse_list(argv[++i]);
  }
  const std::pair<const char*, Outcome (*)()> criteria[] = {
      {"golden nu formula", golden_nu},
      {"golden solution map", golden_solution_map},
      {"golden subdifferential", golden_subdifferential},
      {"golden coderivative", golden_coderivative},
      {"golden stationarity", golden_stationarity},
      {"error-bound reproduction", error_bound},
      {"solver convergence", solver_convergence},
      {"property suites", property_suites},
      {"determinism", determinism},
  };
  std::set<int> failures;
  int index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) failures.insert(index);
    std::cout << "criterion " << index << " " << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << std::endl;
  }
  const bool as_expected = failures == expected_failures;
  std::cout << failures.size() << " of 9 criteria failed";
  if (!expected_failures.empty()) std::cout << (as_expected ? " (as expected)" : " (differs from expected set)");
  std::cout << std::endl;
  return as_expected ? 0 : 1;
}
