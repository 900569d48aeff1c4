#include "support.hpp"

#include <random>

using namespace vep;
using namespace vep::testing;

namespace {

const char* kMinimal = R"VEP([problem]
p = 1
n = 1
m = 1

[cone]
type = orthant

[K]
type = box
lower = "LOWER"
upper = "UPPER"

[f]
components = "x1 - z1"

[objective]
expr = "x1^2"
)VEP";

std::string with_bounds(const std::string& lo, const std::string& hi) {
  std::string s = kMinimal;
  s.replace(s.find("LOWER"), 5, lo);
  s.replace(s.find("UPPER"), 5, hi);
  return s;
}

}  // namespace

TEST(ProblemLoad, BuiltinExample) {
  const auto& P = example();
  EXPECT_EQ(P.p(), 1);
  EXPECT_EQ(P.n(), 1);
  EXPECT_EQ(P.m, 2);
  EXPECT_EQ(P.cone.form, ConeRepr::Form::orthant);
  ASSERT_EQ(P.f.size(), 2);
  EXPECT_EQ(to_string(P.f[0]), "(x1 - z1)");
  EXPECT_EQ(to_string(P.f[1]), "abs(xi1)");
  EXPECT_EQ(P.K.form, ParamSet::Form::box);
  EXPECT_EQ(to_string(P.K.lower[0]), "(-(abs(xi1)) - 1)");
  EXPECT_EQ(to_string(P.K.upper[0]), "(abs(xi1) + 1)");
  EXPECT_EQ(to_string(P.objective), "((xi1)^2 + (x1)^2)");
  EXPECT_EQ(P.omega.lower[0], 0.0);
  EXPECT_EQ(P.omega.upper[0], kInf);
  ASSERT_EQ(P.K.kinks.size(), 1u);
  EXPECT_EQ(P.K.kinks[0].at, 0.0);
  EXPECT_TRUE(P.hyp.nu_convex);
}

TEST(ProblemLoad, FileMatchesBuiltin) {
  const auto F = load_problem(problem_file("paper_example.vep"));
  const auto& P = example();
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const Vec xi = random_in_box(rng, v1(-2), v1(2)), x = random_in_box(rng, v1(-3), v1(3));
    EXPECT_EQ(eval_merit(F, xi, x).merit, eval_merit(P, xi, x).merit);
  }
}

TEST(ProblemLoad, LowerAboveUpperIsValidationError) {
  EXPECT_THROW(parse_problem(with_bounds("1", "0")), ValidationError);
  try {
    parse_problem(with_bounds("xi1", "0"));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("xi ="), std::string::npos);
  }
}

TEST(ProblemLoad, OmegaDefaultsToWholeSpace) {
  const auto P = parse_problem(with_bounds("-1", "1"));
  EXPECT_TRUE(P.omega.is_whole());
}

TEST(ProblemLoad, ParseErrorsCarryLocation) {
  std::string bad = with_bounds("-1", "1");
  bad.replace(bad.find("x1 - z1"), 7, "x1 - q1");
  try {
    parse_problem(bad, "bad.vep");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 15"), std::string::npos) << e.what();
  }
  std::string no_cone = with_bounds("-1", "1");
  no_cone.erase(no_cone.find("[cone]"), 22);
  EXPECT_THROW(parse_problem(no_cone), ParseError);
  std::string dep = with_bounds("x1", "1");
  EXPECT_THROW(parse_problem(dep), ParseError);
  EXPECT_THROW(load_problem("/nonexistent/problem.vep"), VepError);
}

TEST(ProblemLoad, HashIsStable) {
  const auto a = parse_problem(with_bounds("-1", "1"));
  const auto b = parse_problem(with_bounds("-1", "1"));
  const auto c = parse_problem(with_bounds("-1", "2"));
  EXPECT_EQ(problem_hash(a), problem_hash(b));
  EXPECT_NE(problem_hash(a), problem_hash(c));
  EXPECT_EQ(problem_hash(a).size(), 16u);
}

TEST(ProblemSlice, Examples) {
  const auto& P = example();
  auto S0 = slice(P, v1(0));
  EXPECT_EQ(S0.lower[0], -1.0);
  EXPECT_EQ(S0.upper[0], 1.0);
  auto S2 = slice(P, v1(2));
  EXPECT_EQ(S2.lower[0], -3.0);
  EXPECT_EQ(S2.upper[0], 3.0);
  const auto Q = parse_problem(with_bounds("-2", "5"));
  for (double xi : {-3.0, 0.0, 7.0}) {
    auto S = slice(Q, v1(xi));
    EXPECT_EQ(S.lower[0], -2.0);
    EXPECT_EQ(S.upper[0], 5.0);
  }
}

TEST(ProblemSlice, PolytopeForm) {
  const char* text = R"VEP([problem]
p = 1
n = 2
m = 1
[cone]
type = orthant
[K]
type = polytope
A_row = "1", "1"
b = "1 + abs(xi1)"
A_row = "-1", "0"
b = "0"
A_row = "0", "-1"
b = "0"
[f]
components = "x1 - z1"
[objective]
expr = "x1^2 + x2^2"
)VEP";
  const auto P = parse_problem(text);
  const auto S = slice(P, v1(1));
  EXPECT_TRUE(same_point_set(S.vertex_list(), {v2(0, 0), v2(2, 0), v2(0, 2)}));
  bool approx = true;
  const auto E = enlarged_slice(P, v1(0), 0.1, approx);
  EXPECT_TRUE(approx);
  EXPECT_TRUE(contains(E, v2(-0.1, -0.1)));
}

TEST(ProblemOracle, ExampleSolutions) {
  const auto& P = example();
  for (double xi : {0.0, 0.5}) {
    const auto sol = oracle_solutions(P, v1(xi));
    ASSERT_EQ(sol.points.size(), 1u) << xi;
    EXPECT_NEAR(sol.points[0][0], std::abs(xi) + 1, sol.step);
  }
}

TEST(ProblemOracle, ZeroMapAcceptsWholeSlice) {
  const auto P = load_problem(problem_file("zero_f.vep"));
  OracleGrid g;
  const auto sol = oracle_solutions(P, v1(0.3), g);
  EXPECT_EQ(static_cast<int>(sol.points.size()), g.x_points);
  EXPECT_NEAR(sol.points.front()[0], -0.7, 1e-12);
  EXPECT_NEAR(sol.points.back()[0], 1.3, 1e-12);
}

TEST(ProblemOracle, DistanceExamples) {
  const auto& P = example();
  EXPECT_NEAR(oracle_dist_to_solutions(P, v1(0), v1(0)), 1.0, 1e-12);
  EXPECT_NEAR(oracle_dist_to_solutions(P, v1(0), v1(1)), 0.0, 1e-12);
  EXPECT_NEAR(oracle_dist_to_solutions(P, v1(1), v1(-3)), std::abs(-3.0 - 2.0), 1e-12);
}

TEST(ProblemOracle, EmptySolutionSetIsInfinite) {
  const auto P = load_problem(problem_file("infeasible.vep"));
  EXPECT_TRUE(oracle_solutions(P, v1(0)).points.empty());
  EXPECT_EQ(oracle_dist_to_solutions(P, v1(0), v1(0)), kInf);
}

TEST(ProblemOracle, UnboundedSliceNeedsWindow) {
  const auto P = parse_problem(with_bounds("0", "inf"));
  EXPECT_THROW(oracle_solutions(P, v1(0)), PreconditionError);
  OracleGrid g;
  g.x_window = Window{v1(-1), v1(4)};
  const auto sol = oracle_solutions(P, v1(0), g);
  ASSERT_FALSE(sol.points.empty());
}

TEST(ProblemGraphNormals, KinkAtSolution) {
  const auto N = graph_normal_cone(example(), v1(0), v1(1));
  EXPECT_TRUE(N.contains(v2(1, 1)));
  EXPECT_TRUE(N.contains(v2(-2, 2)));
  EXPECT_TRUE(N.contains(v2(0, 0)));
  EXPECT_FALSE(N.contains(v2(0, 1)));
  EXPECT_FALSE(N.contains(v2(1, -1)));
  EXPECT_FALSE(N.contains(v2(1, 2)));
}

TEST(ProblemGraphNormals, SmoothUpperBoundary) {
  for (double xi0 : {0.5, 1.0}) {
    const auto N = graph_normal_cone(example(), v1(xi0), v1(xi0 + 1));
    EXPECT_TRUE(N.contains(v2(-1, 1)));
    EXPECT_FALSE(N.contains(v2(1, -1)));
    EXPECT_FALSE(N.contains(v2(1, 1)));
    EXPECT_FALSE(N.approximate);
  }
}

TEST(ProblemGraphNormals, InteriorIsZero) {
  EXPECT_TRUE(graph_normal_cone(example(), v1(0.2), v1(0.1)).is_zero());
}

TEST(ProblemProperty, OracleMatchesMeritZeroLevel) {
  const auto& P = example();
  OracleGrid g;
  for (const auto& xi : box_grid(v1(-1), v1(1), 21)) {
    const auto sol = oracle_solutions(P, xi, g);
    const auto S = slice(P, xi);
    for (const auto& x : box_grid(v1(S.lower[0]), v1(S.upper[0]), g.x_points)) {
      const bool in_oracle = dist(x, sol.points) <= 1e-12;
      EXPECT_EQ(in_oracle, eval_merit(P, xi, x).merit <= g.tol_C) << xi[0] << " " << x[0];
    }
  }
}

TEST(ProblemProperty, GraphClosedness) {
  const auto& P = example();
  std::mt19937_64 rng(9);
  for (int s = 0; s < 20; ++s) {
    const Vec lim = random_in_box(rng, v1(-1), v1(1));
    Vec last;
    for (int k = 1; k <= 64; k *= 2) {
      const Vec xi = lim + v1(0.5 / k);
      const auto sol = oracle_solutions(P, xi);
      ASSERT_FALSE(sol.points.empty());
      last = sol.points.front();
    }
    EXPECT_LE(eval_merit(P, lim, last).merit, 0.5 / 64 + 1e-9);
    EXPECT_LE(eval_merit(P, lim, oracle_solutions(P, lim).points.front()).merit, 1e-9);
  }
}

TEST(ProblemProperty, ProjectionOntoSliceIsIdempotent) {
  const auto& P = example();
  std::mt19937_64 rng(13);
  for (int k = 0; k < 500; ++k) {
    const Vec xi = random_in_box(rng, v1(-3), v1(3));
    const Vec x = random_in_box(rng, v1(-6), v1(6));
    const auto S = slice(P, xi);
    const Vec p = project(x, S);
    EXPECT_TRUE(contains(S, p, 1e-12));
    EXPECT_EQ(project(p, S)[0], p[0]);
  }
}
