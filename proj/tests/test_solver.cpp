#include "support.hpp"

#include <fstream>
#include <map>
#include <random>
#include <sstream>

using namespace vep;
using namespace vep::testing;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The example with one line of its file replaced.
VepProblem example_variant(const std::string& from, const std::string& to) {
  std::string text = read_file(problem_file("paper_example.vep"));
  const auto pos = text.find(from);
  if (pos == std::string::npos) throw std::runtime_error("pattern not found: " + from);
  text.replace(pos, from.size(), to);
  return parse_problem(text);
}

// dist(0, RHS) at (0.5, 1.5) by brute force over the explicit summands: objective gradient (1, 3),
// t·{(s, -s) : s in [0, 1]} from d-nu and t·([-1, 0] × [-1, 1]) from the coderivative branch.
double smooth_boundary_residual(double t) {
  double best = kInf;
  const int N = 100;
  for (int i = 0; i <= N; ++i) {
    const double s = static_cast<double>(i) / N;
    for (int j = 0; j <= N; ++j) {
      const double u = -static_cast<double>(j) / N;
      for (int k = 0; k <= 2 * N; ++k) {
        const double v = -1 + static_cast<double>(k) / N;
        best = std::min(best, std::hypot(1 + t * (s + u), 3 + t * (v - s)));
      }
    }
  }
  return best;
}

}  // namespace

TEST(SolverPenalized, Examples) {
  const auto& P = example();
  for (double lam : {0.1, 1.0, 7.0}) {
    for (double gam : {0.5, 2.0}) EXPECT_EQ(penalized_value(P, v1(0), v1(1), lam, gam), 1.0);
  }
  EXPECT_NEAR(penalized_value(P, v1(-1), v1(2), 2.0, 0.5), 7.0, 1e-12);
  EXPECT_NEAR(penalized_value(P, v1(0), v1(0), 1.0, 1.0), 1.0, 1e-12);
  EXPECT_THROW(penalized_value(P, v1(0), v1(0), 0.0, 1.0), PreconditionError);
  EXPECT_THROW(penalized_value(P, v1(0), v1(0), 1.0, -1.0), PreconditionError);
}

TEST(SolverStationarity, ExampleSolutionWitness) {
  const auto rep = check_stationarity_general(example(), v1(0), v1(1), {0.5}, 0.5);
  EXPECT_EQ(rep.verdict, StationarityVerdict::stationary);
  EXPECT_LE(rep.residual, 1e-9);
  ASSERT_EQ(rep.witness.size(), 4u);
  const std::vector<Vec> expected{v2(0, 2), v2(0, 0), v2(0, -1), v2(0, -1)};
  Vec sum = Vec::Zero(2);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR((rep.witness[i] - expected[i]).norm(), 0.0, 1e-6) << i << ": " << rep.witness[i].transpose();
    sum += rep.witness[i];
  }
  EXPECT_LE(sum.norm(), 1e-9);
}

TEST(SolverStationarity, SmoothBoundaryPoint) {
  const auto& P = example();
  const auto half = check_stationarity_general(P, v1(0.5), v1(1.5), {0.5}, 0.5);
  EXPECT_NE(half.verdict, StationarityVerdict::stationary);
  EXPECT_NEAR(half.residual, smooth_boundary_residual(1.0), 1e-3);
  EXPECT_NEAR(half.residual, std::sqrt(2.0), 1e-9);
  // With lambda/gamma = 2 the inclusion holds, so no direction can refute it for every lambda.
  const auto big = check_stationarity_general(P, v1(0.5), v1(1.5), {1.0}, 0.5);
  EXPECT_EQ(big.verdict, StationarityVerdict::stationary);
  EXPECT_NEAR(smooth_boundary_residual(2.0), 0.0, 1e-12);
  EXPECT_EQ(half.verdict, StationarityVerdict::inconclusive);

  const auto parts = detail::rhs_parts(P, v1(0.5), v1(1.5));
  const auto dnu = nu_subgradient_full(P, v1(0.5), v1(1.5)).body();
  double c0 = 0, c1 = 0;
  EXPECT_FALSE(detail::refuting_direction(parts, dnu, 0.5, v2(-1, 0), c0, c1));
  EXPECT_NEAR(c0, -1.0, 1e-12);
  EXPECT_GT(c1, 0.0);
}

TEST(SolverStationarity, ZeroGradientWholeSpace) {
  auto P = example_variant("expr = \"xi1^2 + x1^2\"", "expr = \"xi1^2 + (x1 - 1)^2\"");
  P.omega = ConvexSetRepr::whole(1);
  for (double lam : {0.01, 1.0, 100.0}) {
    const auto rep = check_stationarity_general(P, v1(0), v1(1), {lam}, 0.3);
    EXPECT_EQ(rep.verdict, StationarityVerdict::stationary) << lam;
    EXPECT_LE(rep.residual, 1e-12) << lam;
  }
}

TEST(SolverStationarity, Preconditions) {
  const auto& P = example();
  EXPECT_THROW(check_stationarity_general(P, v1(0), v1(0), {0.5}, 0.5), PreconditionError);
  EXPECT_THROW(check_stationarity_general(P, v1(-1), v1(2), {0.5}, 0.5), PreconditionError);
  EXPECT_THROW(check_stationarity_general(P, v1(0), v1(1), {0.5}, 0.0), PreconditionError);
  EXPECT_THROW(check_stationarity_general(P, v1(0), v1(1), {}, 0.5), PreconditionError);
}

TEST(SolverStationarity, RefutationIsSoundOnSupport) {
  // phi = xi1 with E(xi) = {1} for every xi and Omega the whole line.
  const auto P = parse_problem(R"VEP([problem]
p = 1
n = 1
m = 1
[cone]
type = orthant
[K]
type = box
lower = "-2"
upper = "1"
[f]
components = "x1 - z1"
[objective]
expr = "xi1"
)VEP");
  // D*K(xi | 1)(B) = {0} and d-nu = {(0, -1)..(0, 0)}, so d = (-1, 0) separates.
  const auto rep = check_stationarity_general(P, v1(0), v1(1), {0.5, 10.0}, 1.0);
  ASSERT_EQ(rep.verdict, StationarityVerdict::refuted);
  EXPECT_LT(rep.c0, 0.0);
  EXPECT_LE(rep.c1, 1e-12);
  for (double lam : {1e-3, 1.0, 1e3}) {
    const auto r = check_stationarity_general(P, v1(0), v1(1), {lam}, 1.0);
    EXPECT_GT(r.residual, 0.5) << lam;
  }
}

TEST(SolverSmoothConcave, ExampleSolution) {
  const auto rep = check_stationarity_smooth_concave(example(), v1(0), v1(1), {0.5}, 0.5, {0.05, 0.1}, 1.0);
  EXPECT_EQ(rep.verdict, StationarityVerdict::stationary);
  EXPECT_LE(rep.residual, 1e-9);
  EXPECT_EQ(rep.eps.size(), 2u);
}

TEST(SolverSmoothConcave, SmoothBoundaryNotRefuted) {
  const auto& P = example();
  const auto rep = check_stationarity_smooth_concave(P, v1(0.5), v1(1.5), {0.5}, 0.5, {0.05, 0.1}, 0.5);
  EXPECT_NE(rep.verdict, StationarityVerdict::refuted);
  const auto big = check_stationarity_smooth_concave(P, v1(0.5), v1(1.5), {1.0}, 0.5, {0.05, 0.1}, 0.5);
  EXPECT_EQ(big.verdict, StationarityVerdict::stationary);
}

TEST(SolverSolve, ConvergesToExampleSolution) {
  PenaltyConfig cfg;
  cfg.seed = 11;
  const auto res = solve_penalized(example(), cfg, {v2(0.5, -0.5), v2(-0.5, 2)});
  EXPECT_EQ(res.status, "converged");
  EXPECT_TRUE(res.feasible);
  EXPECT_NEAR(res.xi[0], 0.0, 1e-3);
  EXPECT_NEAR(res.x[0], 1.0, 1e-3);
  EXPECT_FALSE(res.stages.empty());
}

TEST(SolverSolve, AgreesWithChecker) {
  PenaltyConfig cfg;
  cfg.seed = 5;
  const auto res = solve_penalized(example(), cfg, default_starts(example(), 4, 5));
  ASSERT_EQ(res.status, "converged");
  const auto rep = check_stationarity_general(example(), res.xi, res.x, {0.5}, 0.5);
  EXPECT_LE(rep.residual, 1e-2);
}

TEST(SolverSolve, ZeroObjective) {
  const auto P = example_variant("expr = \"xi1^2 + x1^2\"", "expr = \"0\"");
  PenaltyConfig cfg;
  const auto res = solve_penalized(P, cfg, {v2(-0.7, 0.2), v2(0.4, 3.0)});
  EXPECT_EQ(res.status, "converged");
  EXPECT_LE(res.merit, cfg.tol_feasible);
  EXPECT_LE(dist(res.xi, P.omega), cfg.tol_feasible);
}

TEST(SolverSolve, StartAtSolutionStays) {
  PenaltyConfig cfg;
  cfg.lambda0 = 4.0;
  const auto res = solve_penalized(example(), cfg, {v2(0, 1)});
  EXPECT_EQ(res.status, "converged");
  ASSERT_EQ(res.stages.size(), 1u);
  EXPECT_NEAR(res.xi[0], 0.0, 1e-9);
  EXPECT_NEAR(res.x[0], 1.0, 1e-9);
  for (const auto& t : res.trace) {
    if (t.start == 0) {
      EXPECT_EQ(t.value, 1.0);
    }
  }
}

TEST(SolverSolve, InvalidConfig) {
  PenaltyConfig cfg;
  cfg.gamma = 0;
  EXPECT_THROW(solve_penalized(example(), cfg, {v2(0, 0)}), PreconditionError);
  EXPECT_THROW(solve_penalized(example(), PenaltyConfig{}, {}), PreconditionError);
  EXPECT_THROW(solve_penalized(example(), PenaltyConfig{}, {v1(0)}), PreconditionError);
}

TEST(SolverSolve, InfeasibleHitsCap) {
  const auto P = load_problem(problem_file("infeasible.vep"));
  PenaltyConfig cfg;
  cfg.lambda_max = 4;
  cfg.max_iter = 50;
  const auto res = solve_penalized(P, cfg, {v2(0, 0)});
  EXPECT_EQ(res.status, "iteration-cap");
  EXPECT_FALSE(res.feasible);
}

TEST(SolverProperty, PenaltyExactness) {
  // Lipschitz constant of the objective on the window is at most 2·sqrt(1 + 16); lambda = 20 is above it.
  const auto& P = example();
  const double lambda = 20.0, gamma = 1.0;
  double best = kInf;
  Vec arg;
  for (const auto& xi : box_grid(v1(-1), v1(1), 201)) {
    for (const auto& x : box_grid(v1(-4), v1(4), 801)) {
      const double v = penalized_value(P, xi, x, lambda, gamma);
      if (v < best) {
        best = v;
        arg = stack(xi, x);
      }
    }
  }
  EXPECT_LE((arg - v2(0, 1)).norm(), 0.01 + 1e-12) << arg.transpose();
  EXPECT_NEAR(best, 1.0, 1e-12);
}

TEST(SolverProperty, ResidualMonotoneUnderEnlargement) {
  const auto& P = example();
  std::mt19937_64 rng(61);
  for (int k = 0; k < 20; ++k) {
    const double xi = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const Vec a = v1(xi), b = v1(std::abs(xi) + 1);
    for (double lam : {0.25, 0.5, 1.0}) {
      const double general = check_stationarity_general(P, a, b, {lam}, 0.5).residual;
      double prev = kInf;
      for (double lip : {0.0, 0.5, 1.0, 2.0}) {
        const double r = check_stationarity_smooth_concave(P, a, b, {lam}, 0.5, {0.05}, lip).residual;
        EXPECT_LE(r, prev + 1e-9) << xi << " " << lam << " " << lip;
        EXPECT_LE(r, general + 1e-9) << xi << " " << lam << " " << lip;
        prev = r;
      }
    }
  }
}

TEST(SolverProperty, DescentTraceNonIncreasing) {
  for (const auto& P : {example(), load_problem(problem_file("zero_f.vep"))}) {
    PenaltyConfig cfg;
    cfg.seed = 3;
    const auto res = solve_penalized(P, cfg, default_starts(P, 4, 3));
    std::map<std::pair<int, int>, double> last;
    for (const auto& t : res.trace) {
      const auto key = std::make_pair(t.stage, t.start);
      if (auto it = last.find(key); it != last.end()) {
        EXPECT_LE(t.value, it->second + 1e-12) << P.id;
      }
      last[key] = t.value;
    }
  }
}

TEST(SolverProperty, StationaryWitnessSumsToZero) {
  const auto& P = example();
  for (double xi : {0.0, 0.3, 0.8}) {
    const auto rep = check_stationarity_general(P, v1(xi), v1(std::abs(xi) + 1), {0.5, 1.0, 2.0}, 0.5);
    if (rep.verdict != StationarityVerdict::stationary) continue;
    Vec sum = Vec::Zero(2);
    for (const auto& w : rep.witness) sum += w;
    EXPECT_LE(sum.norm(), 1e-6) << xi;
  }
}
