#ifndef VEP_PROBLEM_HPP
#define VEP_PROBLEM_HPP

#include "vep/expr.hpp"
#include "vep/geometry/normals.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace vep {

/// Hypotheses the user asserts for a problem; the tool never proves them.
struct Hypotheses {
  bool nu_convex = false;
  bool mu_convex = false;
  bool f_c_concave = false;
  bool f_smooth = false;
  bool k_concave = false;
  bool k_lsc = false;

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    if (nu_convex) out.push_back("nu_convex");
    if (mu_convex) out.push_back("mu_convex");
    if (f_c_concave) out.push_back("f_c_concave");
    if (f_smooth) out.push_back("f_smooth");
    if (k_concave) out.push_back("k_concave");
    if (k_lsc) out.push_back("k_lsc");
    return out;
  }
};

/// Hyperplane xi_k = at across which the bound expressions switch smooth piece.
struct Kink {
  int xi_index = 0;  // 0-based
  double at = 0.0;
};

/// The constraint map K(xi): a box with expression bounds or {y : A(xi) y <= b(xi)}.
struct ParamSet {
  enum class Form { box, polytope };
  Form form = Form::box;
  std::vector<Expr> lower, upper;
  std::vector<std::vector<Expr>> A;
  std::vector<Expr> b;
  std::vector<Kink> kinks;
};

struct Window {
  Vec lower, upper;
};

struct VepProblem {
  std::string id;
  Dims dims;
  int m = 0;
  VectorFunc f;
  ConeRepr cone;
  ParamSet K;
  Expr objective;
  ConvexSetRepr omega;
  std::optional<Window> window_xi;
  std::optional<Window> window_x;
  Hypotheses hyp;
  std::vector<Expr> graph_constraints;  // g_i(xi, x) <= 0 describing graph K

  int p() const { return dims.p; }
  int n() const { return dims.n; }
};

inline Point make_point(const VepProblem& /*P*/, const Vec& xi, const Vec& x, const Vec& z) { return {xi, x, z}; }
inline Point make_point(const VepProblem& P, const Vec& xi, const Vec& x) { return {xi, x, Vec::Zero(P.dims.nz)}; }
inline Point make_point(const VepProblem& P, const Vec& xi) { return {xi, Vec::Zero(P.dims.n), Vec::Zero(P.dims.nz)}; }

inline Vec stack(const Vec& xi, const Vec& x) { return concat(xi, x); }

/// Splits a (xi, x) vector.
inline std::pair<Vec, Vec> split(const VepProblem& P, const Vec& w) { return {w.head(P.p()), w.tail(P.n())}; }

/// Exact slice K(xi).
inline ConvexSetRepr slice(const VepProblem& P, const Vec& xi) {
  const Point pt = make_point(P, xi);
  const auto view = pt.view();
  const int n = P.n();
  if (P.K.form == ParamSet::Form::box) {
    Vec lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
      lo[i] = eval(P.K.lower[static_cast<std::size_t>(i)], view);
      hi[i] = eval(P.K.upper[static_cast<std::size_t>(i)], view);
      if (lo[i] > hi[i] + 1e-12 * std::max(1.0, std::abs(hi[i]))) throw ValidationError("empty slice of K: lower > upper");
      if (lo[i] > hi[i]) lo[i] = hi[i];
    }
    return ConvexSetRepr::box(lo, hi);
  }
  const auto rows = static_cast<Eigen::Index>(P.K.A.size());
  Mat A(rows, n);
  Vec b(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int j = 0; j < n; ++j) A(r, j) = eval(P.K.A[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)], view);
    b[r] = eval(P.K.b[static_cast<std::size_t>(r)], view);
  }
  auto S = ConvexSetRepr::halfspaces(A, b);
  Vec w;
  if (!least_distance(-A, -b, w)) throw ValidationError("empty slice of K: polytope infeasible");
  return S;
}

/// Slice inflated by eps: box bounds move by eps, halfspace rows by eps·||a_i||. Exact in 1-D,
/// a superset of the Euclidean enlargement otherwise (approximate set to true).
inline ConvexSetRepr enlarged_slice(const VepProblem& P, const Vec& xi, double eps, bool& approximate) {
  auto S = slice(P, xi);
  approximate = false;
  if (eps <= 0) return S;
  approximate = P.n() > 1;
  if (S.form == ConvexSetRepr::Form::box) {
    return ConvexSetRepr::box(S.lower.array() - eps, S.upper.array() + eps);
  }
  Vec b = S.b;
  for (Eigen::Index r = 0; r < S.A.rows(); ++r) b[r] += eps * S.A.row(r).norm();
  return ConvexSetRepr::halfspaces(S.A, b);
}

/// A bounded version of `S`: windowed by window_x when unbounded (flag set), else an error.
inline ConvexSetRepr bounded_or_windowed(const VepProblem& P, const ConvexSetRepr& S, bool& windowed,
                                         const std::optional<Window>& window = std::nullopt) {
  windowed = false;
  if (S.bounded()) return S;
  const auto& w = window ? window : P.window_x;
  if (!w) throw PreconditionError("unbounded slice of K and no x window supplied");
  windowed = true;
  return S.clipped(w->lower, w->upper);
}

inline Vec graph_constraint_values(const VepProblem& P, const Vec& xi, const Vec& x) {
  const Point pt = make_point(P, xi, x);
  Vec out(static_cast<Eigen::Index>(P.graph_constraints.size()));
  for (std::size_t i = 0; i < P.graph_constraints.size(); ++i) out[static_cast<Eigen::Index>(i)] = eval(P.graph_constraints[i], pt.view());
  return out;
}

namespace detail {

inline Vec sel_grad(const VepProblem& P, const Expr& g, const Vec& at, const Vec& select) {
  auto [xa, ya] = split(P, at);
  auto [xs, ys] = split(P, select);
  const Point pa = make_point(P, xa, ya), ps = make_point(P, xs, ys);
  return grad_selected(g, pa.view(), ps.view(), Wrt::xi_x);
}

// Moves x (xi fixed) onto {g_j = 0, j in J} by least-norm Newton steps.
inline bool correct_onto(const VepProblem& P, const std::vector<int>& J, Vec& w) {
  const int p = P.p();
  for (int it = 0; it < 30; ++it) {
    auto [xi, x] = split(P, w);
    Vec r(static_cast<Eigen::Index>(J.size()));
    Mat Jx(static_cast<Eigen::Index>(J.size()), P.n());
    for (std::size_t k = 0; k < J.size(); ++k) {
      const Point pt = make_point(P, xi, x);
      const auto& g = P.graph_constraints[static_cast<std::size_t>(J[k])];
      r[static_cast<Eigen::Index>(k)] = eval(g, pt.view());
      Jx.row(static_cast<Eigen::Index>(k)) = grad_selected(g, pt.view(), pt.view(), Wrt::xi_x).tail(P.n()).transpose();
    }
    if (r.lpNorm<Eigen::Infinity>() <= 1e-13 * std::max(1.0, w.norm())) return true;
    Vec step = Jx.completeOrthogonalDecomposition().solve(-r);
    if (!step.allFinite()) return false;
    w.tail(P.n()) += step;
    (void)p;
  }
  return false;
}

}  // namespace detail

struct GraphNormalOptions {
  std::vector<double> deltas{1e-3, 1e-5, 1e-7};
  int direction_samples = 400;
  double tol_ray = 1e-3;
  std::uint64_t seed = 7;
};

/// Limiting normal cone of graph K at (xi, x), assembled from the declared kink cells: the
/// Fréchet cone at the point plus, per cell and realizable active set, the limit of constraint
/// gradients along points inside the cell. Undeclared kinks fall back to sampled proximal normals
/// (flagged approximate).
inline RayUnion graph_normal_cone(const VepProblem& P, const Vec& xi, const Vec& x, const GraphNormalOptions& opt = {}) {
  const int p = P.p(), n = P.n(), dim = p + n;
  const Vec pbar = stack(xi, x);
  const Vec g0 = graph_constraint_values(P, xi, x);
  const double scale = std::max(1.0, pbar.norm());
  if (g0.size() > 0 && g0.maxCoeff() > kOnSetTol * scale) throw PreconditionError("point is not on graph K");
  std::vector<int> active;
  for (Eigen::Index i = 0; i < g0.size(); ++i) {
    if (g0[i] >= -1e-9 * scale) active.push_back(static_cast<int>(i));
  }
  if (active.empty()) return RayUnion::zero(dim);

  std::vector<Kink> kinks;
  for (const auto& k : P.K.kinks) {
    if (std::abs(xi[k.xi_index] - k.at) <= 1e-9 * std::max(1.0, std::abs(k.at))) kinks.push_back(k);
  }
  bool undeclared = false;
  if (kinks.empty()) {
    const Point pt = make_point(P, xi, x);
    for (int i : active) {
      if (grad_hull(P.graph_constraints[static_cast<std::size_t>(i)], pt.view(), Wrt::xi_x).generators.size() > 1) undeclared = true;
    }
  }
  if (undeclared) {
    auto projector = [&](const Vec& y) -> Vec {
      auto [yx, yy] = split(P, y);
      const double r = (y - pbar).norm();
      Vec best = y;
      double bd = kInf;
      const int per = p == 1 ? 801 : (p == 2 ? 61 : 15);
      auto grid = box_grid(Vec(yx.array() - 2 * r), Vec(yx.array() + 2 * r), per);
      for (const auto& s : grid) {
        auto S = slice(P, s);
        const Vec q = project(yy, S);
        const double d = (s - yx).squaredNorm() + (q - yy).squaredNorm();
        if (d < bd) {
          bd = d;
          best = stack(s, q);
        }
      }
      return best;
    };
    return sampled_limiting_normals(projector, pbar, {1e-2, 5e-3}, dim == 2 ? 720 : 400, opt.seed, 0.05);
  }

  const int nk = static_cast<int>(kinks.size());
  const int cells = 1 << std::min(nk, 8);
  std::mt19937_64 rng(opt.seed);
  std::vector<NormalBranch> branches;
  std::vector<std::vector<Vec>> cell_frechet_rows;

  for (int c = 0; c < cells; ++c) {
    Vec cell_dir = Vec::Zero(dim);
    std::vector<double> sigma(static_cast<std::size_t>(nk));
    for (int k = 0; k < nk; ++k) {
      sigma[static_cast<std::size_t>(k)] = (c >> k) & 1 ? 1.0 : -1.0;
      cell_dir[kinks[static_cast<std::size_t>(k)].xi_index] += sigma[static_cast<std::size_t>(k)];
    }
    const Vec sel = pbar + 1e-7 * cell_dir;
    std::vector<Vec> grads;
    for (int i : active) grads.push_back(detail::sel_grad(P, P.graph_constraints[static_cast<std::size_t>(i)], pbar, sel));

    std::vector<Vec> frechet = grads;
    for (int k = 0; k < nk; ++k) frechet.push_back(-sigma[static_cast<std::size_t>(k)] * Vec::Unit(dim, kinks[static_cast<std::size_t>(k)].xi_index));
    cell_frechet_rows.push_back(frechet);

    const int na = static_cast<int>(active.size());
    std::vector<std::vector<int>> realized;
    for (int size = na; size >= 1; --size) {
      detail::for_each_subset(na, size, [&](const std::vector<int>& sub) {
        for (const auto& R : realized) {
          if (std::includes(R.begin(), R.end(), sub.begin(), sub.end())) return true;
        }
        Mat GJ(size, dim);
        for (int k = 0; k < size; ++k) GJ.row(k) = grads[static_cast<std::size_t>(sub[static_cast<std::size_t>(k)])].transpose();
        Eigen::FullPivLU<Mat> lu(GJ);
        Mat null = lu.kernel();
        if (lu.rank() == dim) null = Mat::Zero(dim, 1);
        std::vector<Vec> cands;
        const Vec cd = null * (null.transpose() * cell_dir);
        cands.push_back(cd);
        for (Eigen::Index j = 0; j < null.cols(); ++j) {
          cands.push_back(null.col(j));
          cands.push_back(-null.col(j));
        }
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int s = 0; s < opt.direction_samples; ++s) {
          Vec coef(null.cols());
          for (Eigen::Index j = 0; j < coef.size(); ++j) coef[j] = normal(rng);
          cands.push_back(null * coef);
        }
        auto strict_ok = [&](const Vec& d) {
          for (int k = 0; k < na; ++k) {
            if (std::find(sub.begin(), sub.end(), k) != sub.end()) continue;
            if (grads[static_cast<std::size_t>(k)].dot(d) >= -1e-9) return false;
          }
          for (int k = 0; k < nk; ++k) {
            if (sigma[static_cast<std::size_t>(k)] * d[kinks[static_cast<std::size_t>(k)].xi_index] <= 1e-9) return false;
          }
          return true;
        };
        for (const auto& d0 : cands) {
          const bool zero_ok = size == na && nk == 0;
          if (d0.norm() < 1e-12 && !zero_ok) continue;
          const Vec d = d0.norm() > 1e-12 ? Vec(d0.normalized()) : Vec(d0);
          if (d.norm() > 0 && !strict_ok(d)) continue;
          std::vector<int> J;
          for (int k : sub) J.push_back(active[static_cast<std::size_t>(k)]);
          NormalBranch br;
          bool ok = true;
          for (double delta : opt.deltas) {
            Vec w = pbar + delta * d;
            if (!detail::correct_onto(P, J, w)) {
              ok = false;
              break;
            }
            std::vector<Vec> gens;
            for (int j : J) gens.push_back(detail::sel_grad(P, P.graph_constraints[static_cast<std::size_t>(j)], w, w));
            br.samples.push_back(gens);
          }
          if (!ok) continue;
          branches.push_back(std::move(br));
          realized.push_back(sub);
          break;
        }
        return true;
      });
    }
  }

  RayUnion cells_union = limiting_normal_graph(branches, dim, opt.tol_ray);
  std::vector<Vec> rows;
  for (const auto& fr : cell_frechet_rows) {
    auto h = ConeRepr::from_generators(dim, fr).halfspace_list();
    rows.insert(rows.end(), h.begin(), h.end());
  }
  ConeRepr frechet = ConeRepr::from_generators(dim, halfspace_cone_generators(rows, dim));

  RayUnion out;
  out.dim = dim;
  out.branches.push_back(frechet);
  for (const auto& b : cells_union.branches) {
    bool dup = false;
    for (const auto& e : out.branches) {
      auto ga = b.generator_list(), ge = e.generator_list();
      const bool a_in_e = std::all_of(ga.begin(), ga.end(), [&](const Vec& v) { return contains(e, v, 1e-9); });
      const bool e_in_a = std::all_of(ge.begin(), ge.end(), [&](const Vec& v) { return contains(b, v, 1e-9); });
      if (a_in_e && e_in_a) dup = true;
    }
    if (!dup) out.branches.push_back(b);
  }
  return out;
}

/// Brute-force grid settings for the solution oracle.
struct OracleGrid {
  int x_points = 201;
  int z_points = 201;
  double tol_C = 1e-9;
  std::optional<Window> x_window;
};

struct OracleSet {
  std::vector<Vec> points;
  double step = 0.0;  // largest per-axis x-grid spacing
};

namespace detail {

inline int per_axis(int requested, int dim, int cap_total) {
  if (dim <= 1) return requested;
  const int cap = std::max(3, static_cast<int>(std::floor(std::pow(static_cast<double>(cap_total), 1.0 / dim))));
  return std::min(requested, cap);
}

}  // namespace detail

/// Grid points x of K(xi) with dist(f(xi, x, z), C) <= tol_C for every grid z of K(xi)
/// (vertices of K(xi) included among the z).
inline OracleSet oracle_solutions(const VepProblem& P, const Vec& xi, const OracleGrid& grid = {}) {
  bool windowed = false;
  const auto S = bounded_or_windowed(P, slice(P, xi), windowed, grid.x_window);
  auto [lo, hi] = S.bounding_box();
  const int n = P.n();
  const auto xs = box_grid(lo, hi, detail::per_axis(grid.x_points, n, 60000));
  auto zs = box_grid(lo, hi, detail::per_axis(grid.z_points, n, 20000));
  for (const auto& v : S.vertex_list()) zs.push_back(v);
  std::vector<Vec> zin;
  for (auto& z : zs) {
    if (contains(S, z, 1e-12)) zin.push_back(z);
  }
  OracleSet out;
  const int per = detail::per_axis(grid.x_points, n, 60000);
  for (int i = 0; i < n; ++i) out.step = std::max(out.step, per > 1 ? (hi[i] - lo[i]) / (per - 1) : 0.0);
  Point pt{xi, Vec::Zero(n), Vec::Zero(n)};
  for (const auto& x : xs) {
    if (!contains(S, x, 1e-12)) continue;
    pt.x = x;
    bool ok = true;
    for (const auto& z : zin) {
      pt.z = z;
      if (dist(P.f.eval(pt.view()), P.cone) > grid.tol_C) {
        ok = false;
        break;
      }
    }
    if (ok) out.points.push_back(x);
  }
  return out;
}

inline double oracle_dist_to_solutions(const VepProblem& P, const Vec& xi, const Vec& x, const OracleGrid& grid = {}) {
  return dist(x, oracle_solutions(P, xi, grid).points);
}

// ---------------------------------------------------------------------------------------------
// Problem files

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

// Comma-separated items; quotes and parentheses protect embedded commas.
inline std::vector<std::string> split_items(const std::string& value) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  bool quoted = false, was_quoted = false;
  for (char c : value) {
    if (c == '"') {
      quoted = !quoted;
      was_quoted = true;
      continue;
    }
    if (!quoted) {
      if (c == '(') ++depth;
      if (c == ')') --depth;
      if (c == ',' && depth == 0) {
        out.push_back(was_quoted ? cur : trim(cur));
        cur.clear();
        was_quoted = false;
        continue;
      }
    }
    cur += c;
  }
  if (quoted) throw VepError("unterminated quote");
  std::string last = was_quoted ? cur : trim(cur);
  if (!last.empty() || !out.empty() || was_quoted) out.push_back(last);
  return out;
}

inline double parse_real(const std::string& s) {
  const std::string t = trim(s);
  if (t == "inf" || t == "+inf") return kInf;
  if (t == "-inf") return -kInf;
  double v = 0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw VepError("not a number: '" + t + "'");
  return v;
}

inline int parse_int(const std::string& s) {
  const std::string t = trim(s);
  int v = 0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw VepError("not an integer: '" + t + "'");
  return v;
}

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
  std::size_t offset = 0;
};

using Sections = std::map<std::string, std::vector<Entry>>;

inline Sections read_sections(const std::string& text) {
  Sections out;
  std::string current;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::size_t end = eol == std::string::npos ? text.size() : eol;
    ++line_no;
    const std::string line = trim(std::string_view(text).substr(pos, end - pos));
    if (!line.empty() && line[0] != '#' && line[0] != ';') {
      if (line.front() == '[') {
        if (line.back() != ']') throw ParseError("line " + std::to_string(line_no) + ": malformed section header", pos);
        current = trim(line.substr(1, line.size() - 2));
        out[current];
      } else {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("line " + std::to_string(line_no) + ": expected key = value", pos);
        if (current.empty()) throw ParseError("line " + std::to_string(line_no) + ": entry outside a section", pos);
        out[current].push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no, pos});
      }
    }
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  return out;
}

class SectionReader {
 public:
  SectionReader(const Sections& s, std::string name) : name_(std::move(name)) {
    auto it = s.find(name_);
    if (it != s.end()) {
      entries_ = &it->second;
      present_ = true;
    }
  }
  bool present() const { return present_; }
  const Entry* get(const std::string& key) const {
    const Entry* found = nullptr;
    if (!entries_) return nullptr;
    for (const auto& e : *entries_) {
      if (e.key == key) found = &e;
    }
    return found;
  }
  std::vector<const Entry*> all(const std::string& key) const {
    std::vector<const Entry*> out;
    if (!entries_) return out;
    for (const auto& e : *entries_) {
      if (e.key == key) out.push_back(&e);
    }
    return out;
  }
  const Entry& require(const std::string& key) const {
    const Entry* e = get(key);
    if (!e) throw ParseError("section [" + name_ + "]: missing key '" + key + "'", 0);
    return *e;
  }

 private:
  std::string name_;
  const std::vector<Entry>* entries_ = nullptr;
  bool present_ = false;
};

[[noreturn]] inline void entry_error(const Entry& e, const std::string& what) {
  throw ParseError("line " + std::to_string(e.line) + ": " + what, e.offset);
}

template <class Fn>
auto with_location(const Entry& e, Fn fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ParseError& err) {
    throw ParseError("line " + std::to_string(e.line) + ": " + err.message(), e.offset + err.offset());
  } catch (const VepError& err) {
    entry_error(e, err.what());
  }
}

inline std::vector<double> reals(const Entry& e) {
  return with_location(e, [&] {
    std::vector<double> out;
    for (const auto& s : split_items(e.value)) out.push_back(parse_real(s));
    return out;
  });
}

// `allow_infinite` admits the literals inf, +inf and -inf as whole items (unbounded box sides).
inline std::vector<Expr> exprs(const Entry& e, Dims dims, bool allow_infinite = false) {
  return with_location(e, [&] {
    std::vector<Expr> out;
    for (const auto& s : split_items(e.value)) {
      const std::string t = trim(s);
      if (allow_infinite && (t == "inf" || t == "+inf" || t == "-inf")) {
        out.emplace_back(Expr::make_const(t == "-inf" ? -kInf : kInf), dims);
        continue;
      }
      out.push_back(parse(s, dims));
    }
    return out;
  });
}

inline Window parse_window(const Entry& e, int dim) {
  auto v = reals(e);
  Window w{Vec(dim), Vec(dim)};
  if (v.size() == 2) {
    w.lower.setConstant(v[0]);
    w.upper.setConstant(v[1]);
  } else if (static_cast<int>(v.size()) == 2 * dim) {
    for (int i = 0; i < dim; ++i) {
      w.lower[i] = v[static_cast<std::size_t>(2 * i)];
      w.upper[i] = v[static_cast<std::size_t>(2 * i + 1)];
    }
  } else {
    entry_error(e, "window needs 2 or 2*dim numbers");
  }
  if ((w.lower.array() > w.upper.array()).any() || !w.lower.allFinite() || !w.upper.allFinite()) entry_error(e, "window bounds must be finite with lower <= upper");
  return w;
}

inline NodePtr graph_row(const std::vector<Expr>& row, const Expr& rhs, int n) {
  NodePtr acc = Expr::make_unary(Op::neg, rhs.root());
  for (int j = 0; j < n; ++j) {
    acc = Expr::make_binary(Op::add, acc, Expr::make_binary(Op::mul, row[static_cast<std::size_t>(j)].root(), Expr::make_var(Block::x, j)));
  }
  return acc;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

inline void build_graph_constraints(VepProblem& P) {
  P.graph_constraints.clear();
  const int n = P.n();
  if (P.K.form == ParamSet::Form::box) {
    for (int i = 0; i < n; ++i) {
      P.graph_constraints.emplace_back(Expr::make_binary(Op::sub, P.K.lower[static_cast<std::size_t>(i)].root(), Expr::make_var(Block::x, i)), P.dims);
      P.graph_constraints.emplace_back(Expr::make_binary(Op::sub, Expr::make_var(Block::x, i), P.K.upper[static_cast<std::size_t>(i)].root()), P.dims);
    }
  } else {
    for (std::size_t r = 0; r < P.K.A.size(); ++r) P.graph_constraints.emplace_back(detail::graph_row(P.K.A[r], P.K.b[r], n), P.dims);
  }
}

/// Canonical description used for the report hash.
inline std::string canonical_text(const VepProblem& P) {
  std::ostringstream os;
  os << "p=" << P.p() << " n=" << P.n() << " m=" << P.m << "\ncone=" << form_name(P.cone.form);
  for (const auto& r : P.cone.rows) {
    os << " [";
    for (Eigen::Index i = 0; i < r.size(); ++i) os << (i ? "," : "") << detail::format_number(r[i]);
    os << "]";
  }
  os << "\nK=";
  for (const auto& e : P.graph_constraints) os << to_string(e) << ";";
  for (const auto& k : P.K.kinks) os << " kink xi" << k.xi_index + 1 << "@" << detail::format_number(k.at);
  os << "\nf=";
  for (const auto& e : P.f.components()) os << to_string(e) << ";";
  os << "\nobjective=" << to_string(P.objective) << "\nomega=";
  if (P.omega.form == ConvexSetRepr::Form::box) {
    for (int i = 0; i < P.omega.dim; ++i) os << "[" << detail::format_number(P.omega.lower[i]) << "," << detail::format_number(P.omega.upper[i]) << "]";
  } else {
    os << P.omega.A.rows() << " halfspaces";
  }
  return os.str();
}

inline std::string problem_hash(const VepProblem& P) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(canonical_text(P))));
  return buf;
}

/// Samples 1000 parameters (window or [-1,1]^p, plus center and corners) and requires nonempty slices.
inline void validate_slices(const VepProblem& P, std::uint64_t seed = 0) {
  Vec lo = Vec::Constant(P.p(), -1.0), hi = Vec::Constant(P.p(), 1.0);
  if (P.window_xi) {
    lo = P.window_xi->lower;
    hi = P.window_xi->upper;
  }
  std::vector<Vec> samples{Vec(0.5 * (lo + hi))};
  for (const auto& c : box_grid(lo, hi, 2)) samples.push_back(c);
  std::mt19937_64 rng(seed);
  while (samples.size() < 1000) samples.push_back(random_in_box(rng, lo, hi));
  for (const auto& xi : samples) {
    try {
      slice(P, xi);
    } catch (const ValidationError& e) {
      std::ostringstream os;
      os << e.what() << " at xi = (";
      for (Eigen::Index i = 0; i < xi.size(); ++i) os << (i ? ", " : "") << xi[i];
      os << ")";
      throw ValidationError(os.str());
    }
  }
}

inline VepProblem parse_problem(const std::string& text, const std::string& origin = "<text>") {
  using namespace detail;
  const auto sections = read_sections(text);
  VepProblem P;
  SectionReader prob(sections, "problem");
  if (!prob.present()) throw ParseError("missing [problem] section", 0);
  auto int_of = [&](const std::string& key) {
    const auto& e = prob.require(key);
    return with_location(e, [&] { return parse_int(e.value); });
  };
  const int p = int_of("p"), n = int_of("n"), m = int_of("m");
  if (p < 1 || n < 1 || m < 1) entry_error(prob.require("p"), "dimensions must be positive");
  P.dims = {p, n, n};
  P.m = m;
  P.id = origin;
  if (const auto* e = prob.get("id")) P.id = e->value;
  if (const auto* e = prob.get("window_xi")) P.window_xi = parse_window(*e, p);
  if (const auto* e = prob.get("window_x")) P.window_x = parse_window(*e, n);
  if (const auto* e = prob.get("hypotheses")) {
    for (const auto& h : split_items(e->value)) {
      if (h == "nu_convex") P.hyp.nu_convex = true;
      else if (h == "mu_convex") P.hyp.mu_convex = true;
      else if (h == "f_c_concave") P.hyp.f_c_concave = true;
      else if (h == "f_smooth") P.hyp.f_smooth = true;
      else if (h == "k_concave") P.hyp.k_concave = true;
      else if (h == "k_lsc") P.hyp.k_lsc = true;
      else if (!h.empty()) entry_error(*e, "unknown hypothesis '" + h + "'");
    }
  }

  SectionReader cone(sections, "cone");
  if (!cone.present()) throw ParseError("missing [cone] section", 0);
  {
    const auto& t = cone.require("type");
    std::vector<Vec> rows;
    for (const auto* r : cone.all("row")) {
      auto v = reals(*r);
      if (static_cast<int>(v.size()) != m) entry_error(*r, "cone row must have m entries");
      rows.push_back(Eigen::Map<Vec>(v.data(), m));
    }
    if (t.value == "orthant") P.cone = ConeRepr::orthant(m);
    else if (t.value == "generators") P.cone = ConeRepr::from_generators(m, rows);
    else if (t.value == "halfspaces") P.cone = ConeRepr::from_halfspaces(m, rows);
    else entry_error(t, "unknown cone type '" + t.value + "'");
    if (P.cone.generator_list().empty()) entry_error(t, "ordering cone must be nontrivial");
    if (!is_pointed(P.cone)) entry_error(t, "ordering cone must be pointed");
  }

  const Dims xi_only{p, n, n};
  auto require_xi_only = [&](const Entry& e, const std::vector<Expr>& es) {
    for (const auto& x : es) {
      if (depends_on(x, Block::x) || depends_on(x, Block::z)) entry_error(e, "K data may depend on xi only");
    }
  };
  SectionReader ks(sections, "K");
  if (!ks.present()) throw ParseError("missing [K] section", 0);
  {
    const auto& t = ks.require("type");
    if (t.value == "box") {
      P.K.form = ParamSet::Form::box;
      const auto& lo = ks.require("lower");
      const auto& hi = ks.require("upper");
      P.K.lower = exprs(lo, xi_only, true);
      P.K.upper = exprs(hi, xi_only, true);
      if (static_cast<int>(P.K.lower.size()) != n) entry_error(lo, "need n lower bounds");
      if (static_cast<int>(P.K.upper.size()) != n) entry_error(hi, "need n upper bounds");
      require_xi_only(lo, P.K.lower);
      require_xi_only(hi, P.K.upper);
    } else if (t.value == "polytope") {
      P.K.form = ParamSet::Form::polytope;
      for (const auto* r : ks.all("A_row")) {
        auto row = exprs(*r, xi_only);
        if (static_cast<int>(row.size()) != n) entry_error(*r, "A_row must have n entries");
        require_xi_only(*r, row);
        P.K.A.push_back(row);
      }
      for (const auto* r : ks.all("b")) {
        auto bs = exprs(*r, xi_only);
        require_xi_only(*r, bs);
        P.K.b.insert(P.K.b.end(), bs.begin(), bs.end());
      }
      if (P.K.A.empty() || P.K.A.size() != P.K.b.size()) entry_error(t, "polytope needs matching A_row and b entries");
    } else {
      entry_error(t, "unknown K type '" + t.value + "'");
    }
    if (const auto* e = ks.get("kinks")) {
      for (const auto& item : split_items(e->value)) {
        const auto at = item.find('@');
        if (at == std::string::npos || item.rfind("xi", 0) != 0) entry_error(*e, "kink must look like xi1@0");
        const int idx = with_location(*e, [&] { return parse_int(item.substr(2, at - 2)); });
        if (idx < 1 || idx > p) entry_error(*e, "kink index out of range");
        P.K.kinks.push_back({idx - 1, with_location(*e, [&] { return parse_real(item.substr(at + 1)); })});
      }
    }
  }

  SectionReader fs(sections, "f");
  {
    const auto& c = fs.require("components");
    auto comps = exprs(c, P.dims);
    if (static_cast<int>(comps.size()) != m) entry_error(c, "f needs m components");
    P.f = VectorFunc(comps, P.dims);
  }

  SectionReader obj(sections, "objective");
  {
    const auto& e = obj.require("expr");
    auto es = exprs(e, P.dims);
    if (es.size() != 1) entry_error(e, "objective must be a single expression");
    if (depends_on(es.front(), Block::z)) entry_error(e, "objective may not depend on z");
    P.objective = es.front();
  }

  SectionReader om(sections, "Omega");
  P.omega = ConvexSetRepr::whole(p);
  if (om.present()) {
    const auto* t = om.get("type");
    const std::string type = t ? t->value : "box";
    if (type == "box") {
      Vec lo = Vec::Constant(p, -kInf), hi = Vec::Constant(p, kInf);
      if (const auto* e = om.get("lower")) {
        auto v = reals(*e);
        if (static_cast<int>(v.size()) != p) entry_error(*e, "Omega lower needs p entries");
        lo = Eigen::Map<Vec>(v.data(), p);
      }
      if (const auto* e = om.get("upper")) {
        auto v = reals(*e);
        if (static_cast<int>(v.size()) != p) entry_error(*e, "Omega upper needs p entries");
        hi = Eigen::Map<Vec>(v.data(), p);
      }
      if ((lo.array() > hi.array()).any()) throw ValidationError("Omega box has lower > upper");
      P.omega = ConvexSetRepr::box(lo, hi);
    } else if (type == "halfspaces") {
      std::vector<Vec> rows;
      std::vector<double> rhs;
      for (const auto* r : om.all("A_row")) {
        auto v = reals(*r);
        if (static_cast<int>(v.size()) != p) entry_error(*r, "Omega A_row needs p entries");
        rows.push_back(Eigen::Map<Vec>(v.data(), p));
      }
      for (const auto* r : om.all("b")) {
        auto v = reals(*r);
        rhs.insert(rhs.end(), v.begin(), v.end());
      }
      if (rows.size() != rhs.size()) entry_error(*t, "Omega needs matching A_row and b entries");
      P.omega = ConvexSetRepr::halfspaces(rows_matrix(rows, p), Eigen::Map<Vec>(rhs.data(), static_cast<Eigen::Index>(rhs.size())));
      Vec w;
      if (!least_distance(-P.omega.A, -P.omega.b, w)) entry_error(*t, "Omega is empty");
    } else {
      entry_error(*t, "unknown Omega type '" + type + "'");
    }
  }

  build_graph_constraints(P);
  validate_slices(P);
  return P;
}

inline const char* kPaperExampleText = R"VEP([problem]
id = example:paper
p = 1
n = 1
m = 2
window_xi = -1, 1
window_x = -4, 4
hypotheses = nu_convex, k_lsc

[cone]
type = orthant

[K]
type = box
lower = "-abs(xi1) - 1"
upper = "abs(xi1) + 1"
kinks = "xi1@0"

[f]
components = "x1 - z1", "abs(xi1)"

[objective]
expr = "xi1^2 + x1^2"

[Omega]
type = box
lower = 0
upper = inf
)VEP";

/// Loads a builtin id ("example:paper") or a problem file.
inline VepProblem load_problem(const std::string& source) {
  if (source == "example:paper") return parse_problem(kPaperExampleText, source);
  std::ifstream in(source, std::ios::binary);
  if (!in) throw VepError("cannot open problem file '" + source + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_problem(ss.str(), source);
  } catch (const ParseError& e) {
    throw ParseError(source + ": " + e.message(), e.offset());
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

}  // namespace vep

#endif  // VEP_PROBLEM_HPP
