#ifndef VEP_TESTS_SUPPORT_HPP
#define VEP_TESTS_SUPPORT_HPP

#include "vep/vep.hpp"

#include <gtest/gtest.h>

#include <string>

namespace vep::testing {

inline const VepProblem& example() {
  static const VepProblem P = load_problem("example:paper");
  return P;
}

inline std::string problem_file(const std::string& name) { return std::string(VEP_PROBLEMS_DIR) + "/" + name; }

inline Point point3(double xi, double x, double z) { return Point{vec({xi}), vec({x}), vec({z})}; }

inline Vec v1(double a) { return vec({a}); }
inline Vec v2(double a, double b) { return vec({a, b}); }

/// Every point of `a` is within tol of some point of `b` and vice versa.
inline ::testing::AssertionResult same_point_set(const std::vector<Vec>& a, const std::vector<Vec>& b, double tol = 1e-9) {
  auto covered = [&](const std::vector<Vec>& from, const std::vector<Vec>& in) -> const Vec* {
    for (const auto& p : from) {
      if (dist(p, in) > tol) return &p;
    }
    return nullptr;
  };
  if (const Vec* p = covered(a, b)) return ::testing::AssertionFailure() << "point " << p->transpose() << " missing from second set";
  if (const Vec* p = covered(b, a)) return ::testing::AssertionFailure() << "point " << p->transpose() << " missing from first set";
  return ::testing::AssertionSuccess();
}

/// dist(y, R^m_+) from the componentwise negative parts.
inline double orthant_dist(const Vec& y) { return y.cwiseMin(0.0).norm(); }

}  // namespace vep::testing

#endif  // VEP_TESTS_SUPPORT_HPP
