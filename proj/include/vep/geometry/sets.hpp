#ifndef VEP_GEOMETRY_SETS_HPP
#define VEP_GEOMETRY_SETS_HPP

#include "vep/common.hpp"
#include "vep/geometry/min_norm.hpp"

#include <string>

namespace vep {

/// Nonnegative least squares min ||A t - y||, t >= 0 (Lawson-Hanson).
inline Vec nnls(const Mat& A, const Vec& y, int max_iter = 0) {
  const Eigen::Index k = A.cols();
  Vec t = Vec::Zero(k);
  if (k == 0) return t;
  if (max_iter <= 0) max_iter = static_cast<int>(30 * k + 30);
  const double tol = 1e-12 * std::max(1.0, A.norm() * std::max(1.0, y.norm()));
  std::vector<bool> passive(static_cast<std::size_t>(k), false);
  Vec w = A.transpose() * (y - A * t);
  for (int outer = 0; outer < max_iter; ++outer) {
    Eigen::Index j = -1;
    double wmax = tol;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (!passive[static_cast<std::size_t>(i)] && w[i] > wmax) {
        wmax = w[i];
        j = i;
      }
    }
    if (j < 0) break;
    passive[static_cast<std::size_t>(j)] = true;
    for (int inner = 0; inner < max_iter; ++inner) {
      std::vector<Eigen::Index> P;
      for (Eigen::Index i = 0; i < k; ++i) {
        if (passive[static_cast<std::size_t>(i)]) P.push_back(i);
      }
      Mat AP(A.rows(), static_cast<Eigen::Index>(P.size()));
      for (std::size_t c = 0; c < P.size(); ++c) AP.col(static_cast<Eigen::Index>(c)) = A.col(P[c]);
      Vec sP = AP.completeOrthogonalDecomposition().solve(y);
      bool all_pos = true;
      for (Eigen::Index c = 0; c < sP.size(); ++c) {
        if (sP[c] <= 0) all_pos = false;
      }
      if (all_pos) {
        t.setZero();
        for (std::size_t c = 0; c < P.size(); ++c) t[P[c]] = sP[static_cast<Eigen::Index>(c)];
        break;
      }
      double alpha = 1.0;
      for (std::size_t c = 0; c < P.size(); ++c) {
        const double s = sP[static_cast<Eigen::Index>(c)];
        if (s <= 0) {
          const double denom = t[P[c]] - s;
          if (denom > 0) alpha = std::min(alpha, t[P[c]] / denom);
        }
      }
      for (std::size_t c = 0; c < P.size(); ++c) {
        t[P[c]] += alpha * (sP[static_cast<Eigen::Index>(c)] - t[P[c]]);
      }
      for (std::size_t c = 0; c < P.size(); ++c) {
        if (t[P[c]] <= 1e-15) {
          t[P[c]] = 0.0;
          passive[static_cast<std::size_t>(P[c])] = false;
        }
      }
    }
    w = A.transpose() * (y - A * t);
  }
  return t;
}

/// Least-norm w with G w >= h (Lawson-Hanson least distance programming).
/// Returns false when the system is infeasible.
inline bool least_distance(const Mat& G, const Vec& h, Vec& w) {
  const Eigen::Index n = G.cols(), m = G.rows();
  if (m == 0) {
    w = Vec::Zero(n);
    return true;
  }
  Mat E(n + 1, m);
  E.topRows(n) = G.transpose();
  E.row(n) = h.transpose();
  Vec f = Vec::Zero(n + 1);
  f[n] = 1.0;
  Vec u = nnls(E, f);
  Vec r = E * u - f;
  if (r.norm() < 1e-12 || std::abs(r[n]) < 1e-14) return false;
  w = -r.head(n) / r[n];
  return true;
}

inline std::vector<Vec> matrix_rows(const Mat& A) {
  std::vector<Vec> out;
  for (Eigen::Index i = 0; i < A.rows(); ++i) out.push_back(A.row(i).transpose());
  return out;
}

inline Mat rows_matrix(const std::vector<Vec>& rows, Eigen::Index dim) {
  Mat A(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) A.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return A;
}

inline Mat columns_matrix(const std::vector<Vec>& cols, Eigen::Index dim) {
  Mat A(dim, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) A.col(static_cast<Eigen::Index>(i)) = cols[i];
  return A;
}

namespace detail {

// Calls fn on every size-r subset of {0..n-1}; stops early when fn returns false.
inline void for_each_subset(int n, int r, const std::function<bool(const std::vector<int>&)>& fn) {
  std::vector<int> idx(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) idx[static_cast<std::size_t>(i)] = i;
  if (r > n) return;
  while (true) {
    if (!fn(idx)) return;
    int i = r - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - r + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < r; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

}  // namespace detail

/// Extreme rays (plus a lineality basis, both signs) of {y : <a_i, y> <= 0}.
inline std::vector<Vec> halfspace_cone_generators(const std::vector<Vec>& rows, int dim) {
  std::vector<Vec> out;
  if (dim == 0) return out;
  std::vector<Vec> nz;
  for (const auto& r : rows) {
    if (r.norm() > 1e-14) nz.push_back(r / r.norm());
  }
  if (nz.empty()) {
    for (int i = 0; i < dim; ++i) {
      out.push_back(Vec::Unit(dim, i));
      out.push_back(-Vec::Unit(dim, i));
    }
    return out;
  }
  Mat A = rows_matrix(nz, dim);
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
  const double thresh = 1e-10 * std::max(1.0, svd.singularValues().maxCoeff());
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    if (svd.singularValues()[i] > thresh) ++rank;
  }
  const Mat& V = svd.matrixV();
  Mat Q = V.leftCols(rank);
  for (int i = rank; i < dim; ++i) {
    out.push_back(V.col(i));
    out.push_back(-V.col(i));
  }
  Mat B = A * Q;
  const int m = static_cast<int>(B.rows());
  std::vector<Vec> rays;
  detail::for_each_subset(m, rank - 1, [&](const std::vector<int>& sub) {
    Vec k;
    if (rank == 1) {
      k = Vec::Ones(1);
    } else {
      Mat Bs(rank - 1, rank);
      for (int i = 0; i < rank - 1; ++i) Bs.row(i) = B.row(sub[static_cast<std::size_t>(i)]);
      Eigen::FullPivLU<Mat> lu(Bs);
      lu.setThreshold(1e-10);
      if (lu.rank() != rank - 1) return true;
      Mat ker = lu.kernel();
      k = ker.col(0).normalized();
    }
    for (double s : {1.0, -1.0}) {
      Vec c = s * k;
      if ((B * c).maxCoeff() <= 1e-9) push_unique(rays, Vec((Q * c).normalized()), 1e-9);
    }
    return true;
  });
  out.insert(out.end(), rays.begin(), rays.end());
  return out;
}

/// Vertices of the bounded polyhedron {y : A y <= b} (empty result if infeasible).
inline std::vector<Vec> polytope_vertices(const Mat& A, const Vec& b, double tol = 1e-9) {
  const int n = static_cast<int>(A.cols());
  const int m = static_cast<int>(A.rows());
  std::vector<Vec> out;
  detail::for_each_subset(m, n, [&](const std::vector<int>& sub) {
    Mat As(n, n);
    Vec bs(n);
    for (int i = 0; i < n; ++i) {
      As.row(i) = A.row(sub[static_cast<std::size_t>(i)]);
      bs[i] = b[sub[static_cast<std::size_t>(i)]];
    }
    Eigen::FullPivLU<Mat> lu(As);
    lu.setThreshold(1e-12);
    if (lu.rank() < n) return true;
    Vec v = lu.solve(bs);
    if (((A * v - b).array() <= tol * std::max(1.0, v.lpNorm<Eigen::Infinity>())).all()) push_unique(out, v, 1e-9);
    return true;
  });
  return out;
}

/// Closed convex cone in one of three forms. The zero cone is generators{} and the whole
/// space is halfspaces{}.
struct ConeRepr {
  enum class Form { orthant, generators, halfspaces };
  Form form = Form::orthant;
  int dim = 0;
  std::vector<Vec> rows;

  static ConeRepr orthant(int m) { return {Form::orthant, m, {}}; }
  static ConeRepr from_generators(int dim, std::vector<Vec> gens) { return {Form::generators, dim, std::move(gens)}; }
  static ConeRepr from_halfspaces(int dim, std::vector<Vec> normals) { return {Form::halfspaces, dim, std::move(normals)}; }
  static ConeRepr zero(int dim) { return from_generators(dim, {}); }
  static ConeRepr whole(int dim) { return from_halfspaces(dim, {}); }

  std::vector<Vec> generator_list() const {
    switch (form) {
      case Form::orthant: {
        std::vector<Vec> g;
        for (int i = 0; i < dim; ++i) g.push_back(Vec::Unit(dim, i));
        return g;
      }
      case Form::generators: {
        std::vector<Vec> g;
        for (const auto& r : rows) {
          if (r.norm() > 1e-14) g.push_back(r);
        }
        return g;
      }
      case Form::halfspaces: return halfspace_cone_generators(rows, dim);
    }
    return {};
  }

  /// Normals a_i with cone = {y : <a_i, y> <= 0}.
  std::vector<Vec> halfspace_list() const {
    switch (form) {
      case Form::orthant: {
        std::vector<Vec> h;
        for (int i = 0; i < dim; ++i) h.push_back(-Vec::Unit(dim, i));
        return h;
      }
      case Form::generators: return halfspace_cone_generators(generator_list(), dim);
      case Form::halfspaces: return rows;
    }
    return {};
  }

  bool is_zero() const { return form == Form::generators && generator_list().empty(); }
};

inline std::string form_name(ConeRepr::Form f) {
  switch (f) {
    case ConeRepr::Form::orthant: return "orthant";
    case ConeRepr::Form::generators: return "generators";
    case ConeRepr::Form::halfspaces: return "halfspaces";
  }
  return "";
}

inline Vec project(const Vec& y, const ConeRepr& K) {
  switch (K.form) {
    case ConeRepr::Form::orthant: return y.cwiseMax(0.0);
    case ConeRepr::Form::generators: {
      auto g = K.generator_list();
      if (g.empty()) return Vec::Zero(y.size());
      Mat G = columns_matrix(g, y.size());
      return G * nnls(G, y);
    }
    case ConeRepr::Form::halfspaces: {
      if (K.rows.empty()) return y;
      Mat G = columns_matrix(K.rows, y.size());
      return y - G * nnls(G, y);
    }
  }
  return y;
}

inline double dist(const Vec& y, const ConeRepr& K) { return (y - project(y, K)).norm(); }

inline bool contains(const ConeRepr& K, const Vec& y, double tol = 1e-9) {
  return dist(y, K) <= tol * std::max(1.0, y.norm());
}

/// Negative dual {y : <c, y> <= 0 for all c in K}.
inline ConeRepr dual_cone(const ConeRepr& K) {
  switch (K.form) {
    case ConeRepr::Form::orthant: {
      std::vector<Vec> g;
      for (int i = 0; i < K.dim; ++i) g.push_back(-Vec::Unit(K.dim, i));
      return ConeRepr::from_generators(K.dim, g);
    }
    case ConeRepr::Form::generators: return ConeRepr::from_halfspaces(K.dim, K.generator_list());
    case ConeRepr::Form::halfspaces: return ConeRepr::from_generators(K.dim, K.rows);
  }
  return K;
}

/// No generator's negation lies in the cone.
inline bool is_pointed(const ConeRepr& K, double tol = 1e-9) {
  if (K.form == ConeRepr::Form::orthant) return true;
  for (const auto& g : K.generator_list()) {
    if (g.norm() > 1e-14 && dist(Vec(-g), K) <= tol * g.norm()) return false;
  }
  return true;
}

/// Intersection of two cones, returned in generator form.
inline ConeRepr intersect(const ConeRepr& a, const ConeRepr& b) {
  auto h = a.halfspace_list();
  auto hb = b.halfspace_list();
  h.insert(h.end(), hb.begin(), hb.end());
  return ConeRepr::from_generators(a.dim, halfspace_cone_generators(h, a.dim));
}

/// Closed convex set: box (bounds may be infinite), vertex polytope, or {y : A y <= b}.
struct ConvexSetRepr {
  enum class Form { box, polytope, halfspaces };
  Form form = Form::box;
  int dim = 0;
  Vec lower, upper;
  std::vector<Vec> vertices;
  Mat A;
  Vec b;

  static ConvexSetRepr box(Vec lo, Vec hi) {
    if (lo.size() != hi.size()) throw GeometryError("box bounds differ in size");
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
      if (lo[i] > hi[i]) throw GeometryError("box has lower > upper");
    }
    ConvexSetRepr s;
    s.form = Form::box;
    s.dim = static_cast<int>(lo.size());
    s.lower = std::move(lo);
    s.upper = std::move(hi);
    return s;
  }
  static ConvexSetRepr whole(int dim) { return box(Vec::Constant(dim, -kInf), Vec::Constant(dim, kInf)); }
  static ConvexSetRepr polytope(int dim, std::vector<Vec> verts) {
    if (verts.empty()) throw GeometryError("polytope without vertices");
    ConvexSetRepr s;
    s.form = Form::polytope;
    s.dim = dim;
    s.vertices = std::move(verts);
    return s;
  }
  static ConvexSetRepr halfspaces(Mat A, Vec b) {
    ConvexSetRepr s;
    s.form = Form::halfspaces;
    s.dim = static_cast<int>(A.cols());
    s.A = std::move(A);
    s.b = std::move(b);
    return s;
  }

  bool is_whole() const {
    if (form == Form::box) return lower.array().isInf().all() && upper.array().isInf().all();
    if (form == Form::halfspaces) return A.rows() == 0;
    return false;
  }

  bool bounded() const {
    switch (form) {
      case Form::box: return lower.allFinite() && upper.allFinite();
      case Form::polytope: return true;
      case Form::halfspaces: return halfspace_cone_generators(matrix_rows(A), dim).empty();
    }
    return false;
  }

  /// Vertices of a bounded set.
  std::vector<Vec> vertex_list() const {
    if (!bounded()) throw GeometryError("vertex enumeration of an unbounded set");
    switch (form) {
      case Form::box: return box_grid(lower, upper, 2);
      case Form::polytope: return vertices;
      case Form::halfspaces: return polytope_vertices(A, b);
    }
    return {};
  }

  /// Halfspace description (boxes drop their infinite bounds).
  std::pair<Mat, Vec> halfspace_form() const {
    if (form == Form::halfspaces) return {A, b};
    if (form == Form::box) {
      std::vector<Vec> rows;
      std::vector<double> rhs;
      for (int i = 0; i < dim; ++i) {
        if (std::isfinite(upper[i])) {
          rows.push_back(Vec::Unit(dim, i));
          rhs.push_back(upper[i]);
        }
        if (std::isfinite(lower[i])) {
          rows.push_back(-Vec::Unit(dim, i));
          rhs.push_back(-lower[i]);
        }
      }
      return {rows_matrix(rows, dim), Eigen::Map<Vec>(rhs.data(), static_cast<Eigen::Index>(rhs.size()))};
    }
    throw GeometryError("halfspace form of a vertex polytope is not computed");
  }

  /// Axis-aligned bounding box (infinite where unbounded).
  std::pair<Vec, Vec> bounding_box() const {
    if (form == Form::box) return {lower, upper};
    if (!bounded()) return {Vec::Constant(dim, -kInf), Vec::Constant(dim, kInf)};
    auto v = vertex_list();
    if (v.empty()) throw GeometryError("empty set has no bounding box");
    Vec lo = v.front(), hi = v.front();
    for (const auto& p : v) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    return {lo, hi};
  }

  /// Intersection with a box (used to window unbounded slices).
  ConvexSetRepr clipped(const Vec& lo, const Vec& hi) const {
    if (form == Form::box) {
      Vec l = lower.cwiseMax(lo), u = upper.cwiseMin(hi);
      if ((l.array() > u.array()).any()) throw GeometryError("window does not meet the set");
      return box(l, u);
    }
    if (form == Form::polytope) return *this;
    auto [Ab, bb] = box(lo, hi).halfspace_form();
    Mat A2(A.rows() + Ab.rows(), dim);
    A2 << A, Ab;
    Vec b2(b.size() + bb.size());
    b2 << b, bb;
    return halfspaces(A2, b2);
  }
};

inline Vec project(const Vec& y, const ConvexSetRepr& S) {
  switch (S.form) {
    case ConvexSetRepr::Form::box: return y.cwiseMax(S.lower).cwiseMin(S.upper);
    case ConvexSetRepr::Form::polytope: {
      std::vector<Vec> shifted;
      for (const auto& v : S.vertices) shifted.push_back(v - y);
      return y + wolfe_min_norm(shifted, 1e-14).point;
    }
    case ConvexSetRepr::Form::halfspaces: {
      if (S.A.rows() == 0) return y;
      Vec w;
      if (!least_distance(-S.A, S.A * y - S.b, w)) throw GeometryError("halfspace set is infeasible");
      return y + w;
    }
  }
  return y;
}

inline double dist(const Vec& y, const ConvexSetRepr& S) { return (y - project(y, S)).norm(); }

inline bool contains(const ConvexSetRepr& S, const Vec& y, double tol = 1e-9) {
  if (S.form == ConvexSetRepr::Form::box) {
    return ((y - S.lower).array() >= -tol).all() && ((S.upper - y).array() >= -tol).all();
  }
  return dist(y, S) <= tol * std::max(1.0, y.norm());
}

/// dist to a finite point set; +inf when the set is empty.
inline double dist(const Vec& y, const std::vector<Vec>& pts) {
  double best = kInf;
  for (const auto& p : pts) best = std::min(best, (y - p).norm());
  return best;
}

/// sup over a in A of dist(a, S); 0 for empty A.
template <class Set>
double excess(const std::vector<Vec>& A, const Set& S) {
  double e = 0.0;
  for (const auto& a : A) e = std::max(e, dist(a, S));
  return e;
}

}  // namespace vep

#endif  // VEP_GEOMETRY_SETS_HPP
