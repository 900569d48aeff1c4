#ifndef VEP_GEOMETRY_MIN_NORM_HPP
#define VEP_GEOMETRY_MIN_NORM_HPP

#include "vep/common.hpp"

namespace vep {

struct MinNormResult {
  Vec point;
  std::vector<double> weights;  // convex weights, one per input point
  double norm = 0.0;
  bool converged = false;
};

namespace detail {

inline Vec combine_points(const std::vector<Vec>& pts, const std::vector<double>& w) {
  Vec x = Vec::Zero(pts.front().size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (w[i] != 0.0) x += w[i] * pts[i];
  }
  return x;
}

// Pairwise Frank-Wolfe on the simplex; slow but unconditionally convergent.
inline MinNormResult frank_wolfe_min_norm(const std::vector<Vec>& pts, int iters) {
  const std::size_t k = pts.size();
  std::vector<double> w(k, 0.0);
  std::size_t best = 0;
  for (std::size_t i = 1; i < k; ++i) {
    if (pts[i].squaredNorm() < pts[best].squaredNorm()) best = i;
  }
  w[best] = 1.0;
  Vec x = pts[best];
  for (int it = 0; it < iters; ++it) {
    std::size_t s = 0, a = 0;
    double smin = kInf, amax = -kInf;
    for (std::size_t i = 0; i < k; ++i) {
      const double v = x.dot(pts[i]);
      if (v < smin) {
        smin = v;
        s = i;
      }
      if (w[i] > 0 && v > amax) {
        amax = v;
        a = i;
      }
    }
    const Vec dir = pts[s] - pts[a];
    const double dd = dir.squaredNorm();
    if (dd <= 0 || amax - smin <= 1e-15) break;
    const double step = std::clamp(-x.dot(dir) / dd, 0.0, w[a]);
    w[s] += step;
    w[a] -= step;
    x += step * dir;
  }
  MinNormResult r;
  r.point = x;
  r.weights = std::move(w);
  r.norm = x.norm();
  r.converged = false;
  return r;
}

}  // namespace detail

/// Minimum-norm point of conv(pts) by Wolfe's method; falls back to pairwise Frank-Wolfe
/// when the active-set iteration stalls.
inline MinNormResult wolfe_min_norm(const std::vector<Vec>& pts, double tol = 1e-10, int max_iter = 2000) {
  if (pts.empty()) throw GeometryError("min-norm point of an empty set");
  const std::size_t k = pts.size();
  double scale = 0.0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < k; ++i) {
    scale = std::max(scale, pts[i].squaredNorm());
    if (pts[i].squaredNorm() < pts[start].squaredNorm()) start = i;
  }
  MinNormResult res;
  res.weights.assign(k, 0.0);
  if (scale == 0.0) {
    res.point = pts.front();
    res.weights[0] = 1.0;
    res.converged = true;
    return res;
  }

  std::vector<std::size_t> S{start};
  std::vector<double> lam{1.0};
  Vec x = pts[start];
  const double eps = 1e-14;
  bool ok = false;

  for (int major = 0; major < max_iter; ++major) {
    std::size_t j = 0;
    double best = kInf;
    for (std::size_t i = 0; i < k; ++i) {
      const double v = x.dot(pts[i]);
      if (v < best) {
        best = v;
        j = i;
      }
    }
    if (x.squaredNorm() - best <= tol * scale) {
      ok = true;
      break;
    }
    if (std::find(S.begin(), S.end(), j) != S.end()) {
      ok = x.squaredNorm() - best <= 1e-6 * scale;
      break;
    }
    S.push_back(j);
    lam.push_back(0.0);

    for (int minor = 0; minor < 100 && !S.empty(); ++minor) {
      const auto s = static_cast<Eigen::Index>(S.size());
      Mat P(pts.front().size(), s);
      for (Eigen::Index c = 0; c < s; ++c) P.col(c) = pts[S[static_cast<std::size_t>(c)]];
      Mat kkt = Mat::Zero(s + 1, s + 1);
      kkt.topLeftCorner(s, s) = P.transpose() * P;
      kkt.block(0, s, s, 1).setOnes();
      kkt.block(s, 0, 1, s).setOnes();
      Vec rhs = Vec::Zero(s + 1);
      rhs[s] = 1.0;
      Vec sol = kkt.completeOrthogonalDecomposition().solve(rhs);
      Vec alpha = sol.head(s);
      if (std::abs(alpha.sum() - 1.0) > 1e-8) alpha /= alpha.sum();
      if ((alpha.array() > eps).all()) {
        for (Eigen::Index c = 0; c < s; ++c) lam[static_cast<std::size_t>(c)] = alpha[c];
        break;
      }
      double theta = 1.0;
      for (Eigen::Index c = 0; c < s; ++c) {
        const double l = lam[static_cast<std::size_t>(c)];
        if (alpha[c] <= eps && l - alpha[c] > 0) theta = std::min(theta, l / (l - alpha[c]));
      }
      std::vector<std::size_t> S2;
      std::vector<double> lam2;
      for (Eigen::Index c = 0; c < s; ++c) {
        const double l = (1 - theta) * lam[static_cast<std::size_t>(c)] + theta * alpha[c];
        if (l > eps) {
          S2.push_back(S[static_cast<std::size_t>(c)]);
          lam2.push_back(l);
        }
      }
      if (S2.empty()) {
        S2.push_back(j);
        lam2.push_back(1.0);
      }
      double total = 0;
      for (double l : lam2) total += l;
      for (double& l : lam2) l /= total;
      S = std::move(S2);
      lam = std::move(lam2);
    }
    x = Vec::Zero(pts.front().size());
    for (std::size_t c = 0; c < S.size(); ++c) x += lam[c] * pts[S[c]];
  }

  if (!ok) {
    auto fw = detail::frank_wolfe_min_norm(pts, 20000);
    if (fw.norm < x.norm()) return fw;
  }
  for (std::size_t c = 0; c < S.size(); ++c) res.weights[S[c]] = lam[c];
  res.point = x;
  res.norm = x.norm();
  res.converged = ok;
  return res;
}

}  // namespace vep

#endif  // VEP_GEOMETRY_MIN_NORM_HPP
