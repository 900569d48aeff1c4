#include "support.hpp"

#include <numbers>
#include <random>

using namespace vep;
using namespace vep::testing;

namespace {

// Brute-force distance over a dense grid of a box truncated to [-r, r].
double grid_dist(const Vec& y, const std::function<bool(const Vec&)>& member, double r, int per_axis) {
  double best = kInf;
  for (const auto& q : box_grid(Vec::Constant(y.size(), -r), Vec::Constant(y.size(), r), per_axis)) {
    if (member(q)) best = std::min(best, (q - y).norm());
  }
  return best;
}

bool in_orthant(const Vec& q) { return (q.array() >= 0).all(); }

// Max of <y, d> over a dense sample of conv(points) ⊕ r·B in the plane.
double sampled_support(const std::vector<Vec>& points, double r, const Vec& d) {
  double best = -kInf;
  for (int i = 0; i <= 200; ++i) {
    const double t = i / 200.0;
    const Vec base = (1 - t) * points[0] + t * points[1];
    for (int k = 0; k < 720; ++k) {
      const double a = 2 * std::numbers::pi * k / 720;
      best = std::max(best, (base + r * v2(std::cos(a), std::sin(a))).dot(d));
    }
  }
  return best;
}

double sampled_min_norm(const std::vector<Vec>& points) {
  double best = kInf;
  for (int i = 0; i <= 10000; ++i) {
    const double t = i / 10000.0;
    best = std::min(best, ((1 - t) * points[0] + t * points[1]).norm());
  }
  return best;
}

}  // namespace

TEST(GeometryProject, Examples) {
  const auto R2p = ConeRepr::orthant(2);
  EXPECT_TRUE(same_point_set({project(v2(2, -1), R2p)}, {v2(2, 0)}));
  EXPECT_EQ(project(v1(0.5), ConvexSetRepr::box(v1(-2), v1(2)))[0], 0.5);
  const Vec y = v2(-0.3, 0.4);
  EXPECT_TRUE(same_point_set({project(y, R2p)}, {v2(0, 0.4)}));
  const double oracle = grid_dist(y, in_orthant, 1.0, 201);
  EXPECT_NEAR(dist(y, R2p), oracle, 1e-12);
  EXPECT_NEAR(dist(y, R2p), 0.3, 1e-12);
}

TEST(GeometryProject, VariationalInequality) {
  const auto S = ConvexSetRepr::polytope(2, {v2(0, 0), v2(2, 0), v2(0, 1), v2(2, 2)});
  std::mt19937_64 rng(5);
  for (int k = 0; k < 200; ++k) {
    const Vec y = random_in_box(rng, v2(-3, -3), v2(4, 4));
    const Vec s = project(y, S);
    for (const auto& v : S.vertices) EXPECT_LE((y - s).dot(v - s), 1e-9);
  }
}

TEST(GeometryDist, Examples) {
  const auto R2p = ConeRepr::orthant(2);
  for (double x : {0.0, 1.0, 2.5}) {
    for (double xi : {-1.0, 0.0, 2.0}) EXPECT_EQ(dist(v2(x - 0.0, std::abs(xi)), R2p), 0.0);
  }
  EXPECT_NEAR(dist(v2(-2, 1), R2p), grid_dist(v2(-2, 1), in_orthant, 3.0, 301), 1e-12);
  EXPECT_NEAR(dist(v2(-2, 1), R2p), 2.0, 1e-12);
  const std::vector<Vec> A{v2(-1, 0), v2(0, -3)};
  const double expected = std::max(orthant_dist(A[0]), orthant_dist(A[1]));
  EXPECT_NEAR(excess(A, R2p), expected, 1e-12);
  EXPECT_NEAR(excess(A, R2p), 3.0, 1e-12);
  EXPECT_EQ(excess(std::vector<Vec>{}, R2p), 0.0);
  EXPECT_EQ(dist(v1(0), std::vector<Vec>{}), kInf);
}

TEST(GeometryNormalCone, Examples) {
  const auto half_line = ConvexSetRepr::box(v1(0), v1(kInf));
  auto N = normal_cone(half_line, v1(0));
  EXPECT_TRUE(same_point_set(N.rays(), {v1(-1)}));
  EXPECT_TRUE(normal_cone(ConvexSetRepr::box(v1(-2), v1(2)), v1(0.5)).is_zero());
  EXPECT_TRUE(same_point_set(normal_cone(ConeRepr::orthant(2), v2(0, 1)).rays(), {v2(-1, 0)}));
  EXPECT_THROW(normal_cone(half_line, v1(-1)), GeometryError);
}

TEST(GeometryNormalCone, ValidOnVertices) {
  const auto S = ConvexSetRepr::polytope(2, {v2(0, 0), v2(2, 0), v2(1, 2)});
  for (const auto& p : S.vertices) {
    for (const auto& g : normal_cone(S, p).rays()) {
      for (const auto& v : S.vertices) EXPECT_LE(g.dot(v - p), 1e-9);
    }
  }
}

TEST(GeometryLimitingNormals, KinkedGraph) {
  std::vector<NormalBranch> branches;
  // Upper boundary x = |xi| + 1 approached from xi > 0 and xi < 0; outward normals (-1, 1) and (1, 1).
  branches.push_back({{{v2(-1, 1)}, {v2(-1, 1)}}});
  branches.push_back({{{v2(1, 1)}, {v2(1, 1)}}});
  const auto N = limiting_normal_graph(branches, 2);
  EXPECT_TRUE(N.contains(v2(-2, 2)));
  EXPECT_TRUE(N.contains(v2(3, 3)));
  EXPECT_FALSE(N.contains(v2(0, 1)));
  EXPECT_FALSE(N.contains(v2(1, -1)));
}

TEST(GeometryLimitingNormals, OscillationThrows) {
  std::vector<NormalBranch> branches{{{{v2(1, 0)}, {v2(0, 1)}}}};
  EXPECT_THROW(limiting_normal_graph(branches, 2), GeometryError);
}

TEST(GeometryLimitingNormals, FullSpaceGraph) {
  EXPECT_TRUE(limiting_normal_graph({}, 2).is_zero());
}

TEST(GeometryTruncatedNormal, ExampleTable) {
  for (double xi : {-0.5, 0.0, 1.0}) {
    const double r = std::abs(xi) + 1;
    const auto K = ConvexSetRepr::box(v1(-r), v1(r));
    auto at_lower = truncated_normal(v1(-r), K);
    EXPECT_TRUE(same_point_set(extreme_points(discretize(at_lower)), {v1(-1), v1(0)}));
    auto inside = truncated_normal(v1(0.3 * r), K);
    EXPECT_TRUE(same_point_set(discretize(inside), {v1(0)}));
    auto below = truncated_normal(v1(-r - 0.7), K);
    EXPECT_TRUE(same_point_set(discretize(below), {v1(-1)}));
  }
}

TEST(GeometrySupport, Examples) {
  const auto rect = ConvexBody::polytope(2, {v2(0, -1), v2(0, 1), v2(1, -1), v2(1, 1)});
  EXPECT_EQ(support(rect, v2(-1, 0)), 0.0);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) EXPECT_NEAR(support(ConvexBody::ball(2, 1.0), random_unit(rng, 2)), 1.0, 1e-12);
  ConvexBody seg = ConvexBody::polytope(2, {v2(1, 1), v2(1, -1)});
  seg.ball_radius = 0.5;
  const double oracle = sampled_support({v2(1, 1), v2(1, -1)}, 0.5, v2(1, 0));
  EXPECT_NEAR(support(seg, v2(1, 0)), oracle, 1e-9);
  EXPECT_NEAR(support(seg, v2(1, 0)), 1.5, 1e-12);
}

TEST(GeometrySupport, UnboundedCone) {
  ConvexBody b = ConvexBody::point(v2(0, 0));
  b.cone_parts.push_back({ConeRepr::orthant(2), kInf});
  EXPECT_EQ(support(b, v2(1, 0)), kInf);
  EXPECT_EQ(support(b, v2(-1, -2)), 0.0);
}

TEST(GeometryMinNorm, Examples) {
  EXPECT_NEAR(min_norm_point(ConvexBody::point(v2(3, 4))).dist0, 5.0, 1e-12);
  EXPECT_NEAR(min_norm_point(ConvexBody::polytope(2, {v2(1, 0), v2(-1, 0)})).dist0, 0.0, 1e-10);
  const std::vector<Vec> slice{v2(1, -1), v2(1, 1)};
  const auto mn = min_norm_point(ConvexBody::polytope(2, slice));
  EXPECT_NEAR(mn.dist0, sampled_min_norm(slice), 1e-8);
  EXPECT_NEAR(mn.dist0, 1.0, 1e-9);
  EXPECT_TRUE(same_point_set({mn.point}, {v2(1, 0)}, 1e-8));
  EXPECT_THROW(min_norm_point(ConvexBody::empty_body(2)), GeometryError);
}

TEST(GeometryMinNorm, BallShrinksDistance) {
  ConvexBody b = ConvexBody::point(v2(3, 4));
  b.ball_radius = 2;
  EXPECT_NEAR(min_norm_point(b).dist0, 3.0, 1e-12);
  b.ball_radius = 7;
  EXPECT_EQ(min_norm_point(b).dist0, 0.0);
}

TEST(GeometryDualCone, Examples) {
  const auto D = dual_cone(ConeRepr::orthant(2));
  EXPECT_TRUE(same_point_set(D.generator_list(), {v2(-1, 0), v2(0, -1)}));
  const auto H = dual_cone(ConeRepr::from_generators(2, {v2(1, 1)}));
  for (const auto& q : box_grid(v2(-2, -2), v2(2, 2), 41)) {
    const bool member = q[0] + q[1] <= 1e-12;
    EXPECT_EQ(contains(H, q, 1e-9), member) << q.transpose();
  }
  const auto W = dual_cone(ConeRepr::zero(2));
  for (const auto& q : box_grid(v2(-2, -2), v2(2, 2), 9)) EXPECT_TRUE(contains(W, q));
}

TEST(GeometryDualCone, DoubleDual) {
  const auto K = ConeRepr::from_generators(2, {v2(1, 0.2), v2(0.3, 1)});
  const auto KK = dual_cone(dual_cone(K));
  for (const auto& g : K.generator_list()) EXPECT_TRUE(contains(KK, g));
  for (const auto& g : KK.generator_list()) EXPECT_TRUE(contains(K, g, 1e-9));
}

TEST(GeometryProperty, ProjectionFirmness) {
  std::mt19937_64 rng(41);
  const std::vector<ConvexSetRepr> sets = {
      ConvexSetRepr::box(v2(-1, 0), v2(2, 1)),
      ConvexSetRepr::polytope(2, {v2(0, 0), v2(3, 1), v2(1, 2)}),
      ConvexSetRepr::box(v2(0, -kInf), v2(kInf, 0)),
  };
  for (const auto& S : sets) {
    for (int k = 0; k < 500; ++k) {
      const Vec a = random_in_box(rng, v2(-5, -5), v2(5, 5));
      const Vec b = random_in_box(rng, v2(-5, -5), v2(5, 5));
      EXPECT_LE((project(a, S) - project(b, S)).norm(), (a - b).norm() + 1e-9);
    }
  }
  const auto C = ConeRepr::from_generators(2, {v2(1, 2), v2(2, -1)});
  for (int k = 0; k < 500; ++k) {
    const Vec a = random_in_box(rng, v2(-5, -5), v2(5, 5));
    const Vec b = random_in_box(rng, v2(-5, -5), v2(5, 5));
    EXPECT_LE((project(a, C) - project(b, C)).norm(), (a - b).norm() + 1e-9);
  }
}

TEST(GeometryProperty, DistanceMatchesGridOracle) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(-2, 2);
  const int per_axis = 401;
  const double step = 6.0 / (per_axis - 1);
  for (int k = 0; k < 6; ++k) {
    Vec lo = v2(u(rng), u(rng));
    Vec hi = lo + v2(0.5 + std::abs(u(rng)), 0.5 + std::abs(u(rng)));
    const auto S = ConvexSetRepr::box(lo, hi);
    const auto T = ConvexSetRepr::polytope(2, {lo, v2(hi[0], lo[1]), v2(lo[0], hi[1])});
    for (int j = 0; j < 5; ++j) {
      const Vec y = v2(u(rng), u(rng)) * 1.4;
      EXPECT_NEAR(dist(y, S), grid_dist(y, [&](const Vec& q) { return contains(S, q, 0); }, 3.0, per_axis), 2 * step);
      EXPECT_NEAR(dist(y, T), grid_dist(y, [&](const Vec& q) { return contains(T, q, 1e-12); }, 3.0, per_axis), 2 * step);
    }
  }
}

TEST(GeometryProperty, NormalConeProductRule) {
  const auto S1 = ConvexSetRepr::box(v1(0), v1(2));
  const auto S2 = ConvexSetRepr::polytope(2, {v2(0, 0), v2(1, 0), v2(0, 1)});
  const auto S12 = ConvexSetRepr::halfspaces(
      (Mat(5, 3) << -1, 0, 0, 1, 0, 0, 0, -1, 0, 0, 0, -1, 0, 1, 1).finished(), (Vec(5) << 0, 2, 0, 0, 1).finished());
  for (double a : {0.0, 1.0, 2.0}) {
    for (const Vec& b : {v2(0, 0), v2(1, 0), v2(0.5, 0), v2(0.2, 0.3)}) {
      const auto prod = product(normal_cone(S1, v1(a)), normal_cone(S2, b));
      const auto direct = normal_cone(S12, concat(v1(a), b));
      std::mt19937_64 rng(7);
      for (int k = 0; k < 200; ++k) {
        const Vec v = random_unit(rng, 3);
        EXPECT_EQ(prod.contains(v, 1e-7), direct.contains(v, 1e-7)) << a << " " << b.transpose() << " " << v.transpose();
      }
      for (const auto& g : direct.rays()) EXPECT_TRUE(prod.contains(g, 1e-9));
      for (const auto& g : prod.rays()) EXPECT_TRUE(direct.contains(g, 1e-9));
    }
  }
}

TEST(GeometryProperty, SupportMinNormDuality) {
  std::mt19937_64 rng(47);
  std::vector<ConvexBody> bodies;
  bodies.push_back(ConvexBody::polytope(2, {v2(1, -1), v2(1, 1)}));
  bodies.push_back(ConvexBody::polytope(2, {v2(2, 1), v2(3, 0), v2(2.5, 2)}));
  ConvexBody capped = ConvexBody::point(v2(2, 2));
  capped.cone_parts.push_back({ConeRepr::from_generators(2, {v2(-1, 0), v2(0, -1)}), 1.0});
  bodies.push_back(capped);
  ConvexBody rounded = ConvexBody::polytope(2, {v2(0.5, 3), v2(-1, 2)});
  rounded.ball_radius = 0.5;
  bodies.push_back(rounded);
  for (const auto& b : bodies) {
    double dual = -kInf;
    for (int k = 0; k < 64; ++k) {
      const double t = 2 * std::numbers::pi * k / 64;
      dual = std::max(dual, -support(b, v2(std::cos(t), std::sin(t))));
    }
    EXPECT_NEAR(min_norm_point(b).dist0, std::max(dual, 0.0), 0.02);
  }
}

TEST(GeometryProperty, MinNormMatchesDenseSampling) {
  ConvexBody capped = ConvexBody::point(v2(1.5, 1));
  capped.cone_parts.push_back({ConeRepr::from_generators(2, {v2(-1, -1)}), 1.0});
  double best = kInf;
  for (int i = 0; i <= 20000; ++i) {
    const double t = i / 20000.0;
    best = std::min(best, (v2(1.5, 1) + t * v2(-1, -1).normalized()).norm());
  }
  EXPECT_NEAR(min_norm_point(capped).dist0, best, 0.02);
}

TEST(GeometryProperty, TruncatedNormalInUnitBall) {
  std::mt19937_64 rng(53);
  const auto S = ConvexSetRepr::polytope(2, {v2(0, 0), v2(2, 0), v2(1, 2)});
  for (int k = 0; k < 300; ++k) {
    Vec y = random_in_box(rng, v2(-2, -2), v2(4, 4));
    if (k % 3 == 0) y = S.vertices[static_cast<std::size_t>(k % 3)];
    for (const auto& q : discretize(truncated_normal(y, S))) EXPECT_LE(q.norm(), 1 + 1e-9);
  }
}
