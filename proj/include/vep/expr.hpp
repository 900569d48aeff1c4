#ifndef VEP_EXPR_HPP
#define VEP_EXPR_HPP

#include "vep/common.hpp"

#include <array>
#include <charconv>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vep {

enum class Block { xi, x, z };

/// Variable block sizes: p parameters, n decisions, nz auxiliary (z has the size of x).
struct Dims {
  int p = 0;
  int n = 0;
  int nz = 0;
  bool operator==(const Dims&) const = default;
  int size(Block b) const { return b == Block::xi ? p : (b == Block::x ? n : nz); }
};

/// Variable blocks a gradient is taken with respect to.
enum class Wrt { xi, x, z, xi_x };

inline int wrt_size(const Dims& d, Wrt w) {
  switch (w) {
    case Wrt::xi: return d.p;
    case Wrt::x: return d.n;
    case Wrt::z: return d.nz;
    case Wrt::xi_x: return d.p + d.n;
  }
  return 0;
}

/// Position of a variable inside the gradient vector for `w`, or -1 when not part of it.
inline int wrt_offset(const Dims& d, Wrt w, Block b, int index) {
  switch (w) {
    case Wrt::xi: return b == Block::xi ? index : -1;
    case Wrt::x: return b == Block::x ? index : -1;
    case Wrt::z: return b == Block::z ? index : -1;
    case Wrt::xi_x:
      if (b == Block::xi) return index;
      if (b == Block::x) return d.p + index;
      return -1;
  }
  return -1;
}

/// Values of the three blocks at which an expression is evaluated.
struct PointView {
  std::span<const double> xi;
  std::span<const double> x;
  std::span<const double> z;

  double get(Block b, int i) const {
    const auto& s = b == Block::xi ? xi : (b == Block::x ? x : z);
    return s[static_cast<std::size_t>(i)];
  }
};

/// Owning point; `view()` feeds the evaluators.
struct Point {
  Vec xi;
  Vec x;
  Vec z;
  PointView view() const { return {as_span(xi), as_span(x), as_span(z)}; }
};

inline constexpr double kDivEps = 1e-12;
inline constexpr double kActiveTol = 1e-9;

enum class Op { constant, variable, add, sub, mul, div, pow, neg, abs, min, max };

struct Node {
  Op op = Op::constant;
  double value = 0.0;
  Block block = Block::xi;
  int index = 0;     // 0-based variable index
  int exponent = 0;  // for pow
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
};

using NodePtr = std::shared_ptr<const Node>;

/// Immutable expression tree over the (xi, x, z) blocks.
class Expr {
 public:
  Expr() : root_(make_const(0.0)) {}
  Expr(NodePtr root, Dims dims) : root_(std::move(root)), dims_(dims) {}

  const NodePtr& root() const { return root_; }
  const Dims& dims() const { return dims_; }

  static NodePtr make_const(double v) {
    auto n = std::make_shared<Node>();
    n->op = Op::constant;
    n->value = v;
    return n;
  }
  static NodePtr make_var(Block b, int index) {
    auto n = std::make_shared<Node>();
    n->op = Op::variable;
    n->block = b;
    n->index = index;
    return n;
  }
  static NodePtr make_unary(Op op, NodePtr a, int exponent = 0) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->exponent = exponent;
    return n;
  }
  static NodePtr make_binary(Op op, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }

 private:
  NodePtr root_;
  Dims dims_;
};

namespace detail {

inline std::string block_name(Block b) {
  return b == Block::xi ? "xi" : (b == Block::x ? "x" : "z");
}

class Parser {
 public:
  Parser(std::string_view text, Dims dims) : text_(text), dims_(dims) {}

  NodePtr parse_all() {
    auto e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError("syntax error: " + what, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r')) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  NodePtr parse_expr() {
    auto lhs = parse_term();
    while (true) {
      if (accept('+')) {
        lhs = Expr::make_binary(Op::add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = Expr::make_binary(Op::sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    auto lhs = parse_factor();
    while (true) {
      if (accept('*')) {
        lhs = Expr::make_binary(Op::mul, lhs, parse_factor());
      } else if (accept('/')) {
        lhs = Expr::make_binary(Op::div, lhs, parse_factor());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_factor() {
    auto base = parse_atom();
    if (accept('^')) {
      skip_ws();
      const std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (start == pos_) fail("expected integer exponent");
      int k = 0;
      auto res = std::from_chars(text_.data() + start, text_.data() + pos_, k);
      if (res.ec != std::errc()) fail("exponent out of range");
      return Expr::make_unary(Op::pow, base, k);
    }
    return base;
  }

  bool at_number_start() const {
    if (pos_ >= text_.size()) return false;
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) return true;
    return c == '.' && pos_ + 1 < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]));
  }

  double parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t q = pos_ + 1;
      if (q < text_.size() && (text_[q] == '+' || text_[q] == '-')) ++q;
      if (q < text_.size() && std::isdigit(static_cast<unsigned char>(text_[q]))) {
        pos_ = q;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return v;
  }

  NodePtr parse_atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (at_number_start()) return Expr::make_const(parse_number());
    if (c == '(') {
      ++pos_;
      auto e = parse_expr();
      expect(')');
      return e;
    }
    if (c == '-') {
      ++pos_;
      skip_ws();
      if (at_number_start()) return Expr::make_const(-parse_number());
      return Expr::make_unary(Op::neg, parse_atom());
    }
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string word(text_.substr(start, pos_ - start));
    if (word == "abs" || word == "min" || word == "max") {
      expect('(');
      auto a = parse_expr();
      if (word == "abs") {
        expect(')');
        return Expr::make_unary(Op::abs, a);
      }
      expect(',');
      auto b = parse_expr();
      expect(')');
      return Expr::make_binary(word == "min" ? Op::min : Op::max, a, b);
    }
    Block block;
    if (word == "xi") {
      block = Block::xi;
    } else if (word == "x") {
      block = Block::x;
    } else if (word == "z") {
      block = Block::z;
    } else {
      throw ParseError("unknown identifier '" + word + "'", start);
    }
    const std::size_t digits = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (digits == pos_) throw ParseError("unknown identifier '" + word + "'", start);
    int idx = 0;
    auto res = std::from_chars(text_.data() + digits, text_.data() + pos_, idx);
    if (res.ec != std::errc() || idx < 1 || idx > dims_.size(block)) {
      throw ParseError("index out of range in '" + std::string(text_.substr(start, pos_ - start)) + "'", start);
    }
    return Expr::make_var(block, idx - 1);
  }

  std::string_view text_;
  Dims dims_;
  std::size_t pos_ = 0;
};

inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline void print_node(const Node& n, std::string& out) {
  auto bin = [&](const char* op) {
    out += '(';
    print_node(*n.a, out);
    out += op;
    print_node(*n.b, out);
    out += ')';
  };
  auto fn = [&](const char* name) {
    out += name;
    out += '(';
    print_node(*n.a, out);
    if (n.b) {
      out += ", ";
      print_node(*n.b, out);
    }
    out += ')';
  };
  switch (n.op) {
    case Op::constant: out += format_number(n.value); break;
    case Op::variable: out += block_name(n.block) + std::to_string(n.index + 1); break;
    case Op::add: bin(" + "); break;
    case Op::sub: bin(" - "); break;
    case Op::mul: bin(" * "); break;
    case Op::div: bin(" / "); break;
    case Op::pow:
      out += '(';
      print_node(*n.a, out);
      out += ")^" + std::to_string(n.exponent);
      break;
    case Op::neg:
      out += "-(";
      print_node(*n.a, out);
      out += ')';
      break;
    case Op::abs: fn("abs"); break;
    case Op::min: fn("min"); break;
    case Op::max: fn("max"); break;
  }
}

inline double eval_node(const Node& n, const PointView& pt) {
  switch (n.op) {
    case Op::constant: return n.value;
    case Op::variable: return pt.get(n.block, n.index);
    case Op::add: return eval_node(*n.a, pt) + eval_node(*n.b, pt);
    case Op::sub: return eval_node(*n.a, pt) - eval_node(*n.b, pt);
    case Op::mul: return eval_node(*n.a, pt) * eval_node(*n.b, pt);
    case Op::div: {
      const double den = eval_node(*n.b, pt);
      if (std::abs(den) < kDivEps) throw EvalError("division by near-zero value");
      return eval_node(*n.a, pt) / den;
    }
    case Op::pow: {
      const double a = eval_node(*n.a, pt);
      double r = 1.0;
      for (int k = 0; k < n.exponent; ++k) r *= a;
      return r;
    }
    case Op::neg: return -eval_node(*n.a, pt);
    case Op::abs: return std::abs(eval_node(*n.a, pt));
    case Op::min: return std::min(eval_node(*n.a, pt), eval_node(*n.b, pt));
    case Op::max: return std::max(eval_node(*n.a, pt), eval_node(*n.b, pt));
  }
  return 0.0;
}

inline bool is_kink_abs(double a) { return std::abs(a) <= kActiveTol * std::max(1.0, std::abs(a)); }
inline bool is_kink_pair(double a, double b) {
  return std::abs(a - b) <= kActiveTol * std::max({1.0, std::abs(a), std::abs(b)});
}

struct GradCtx {
  const Dims* dims;
  Wrt wrt;
  int size;
  std::size_t cap;
};

/// Value and all active-branch gradients of a node.
struct Branches {
  double value = 0.0;
  std::vector<Vec> grads;
};

inline void dedupe(std::vector<Vec>& v, std::size_t cap) {
  std::vector<Vec> out;
  for (auto& g : v) {
    push_unique(out, g, 1e-12);
    if (out.size() >= cap) break;
  }
  v = std::move(out);
}

inline std::vector<Vec> combine(const std::vector<Vec>& a, const std::vector<Vec>& b, std::size_t cap,
                                const std::function<Vec(const Vec&, const Vec&)>& op) {
  std::vector<Vec> out;
  for (const auto& ga : a) {
    for (const auto& gb : b) {
      push_unique(out, op(ga, gb), 1e-12);
      if (out.size() >= cap) return out;
    }
  }
  return out;
}

// Branch decisions are read from `sel`, derivatives evaluated at `at`. With sel == nullptr every
// branch active at `at` contributes.
inline Branches grad_node(const Node& n, const PointView& at, const PointView* sel, const GradCtx& ctx) {
  Branches r;
  switch (n.op) {
    case Op::constant:
      r.value = n.value;
      r.grads.push_back(Vec::Zero(ctx.size));
      return r;
    case Op::variable: {
      r.value = at.get(n.block, n.index);
      Vec g = Vec::Zero(ctx.size);
      const int off = wrt_offset(*ctx.dims, ctx.wrt, n.block, n.index);
      if (off >= 0) g[off] = 1.0;
      r.grads.push_back(std::move(g));
      return r;
    }
    case Op::add:
    case Op::sub: {
      auto a = grad_node(*n.a, at, sel, ctx);
      auto b = grad_node(*n.b, at, sel, ctx);
      const double s = n.op == Op::add ? 1.0 : -1.0;
      r.value = a.value + s * b.value;
      r.grads = combine(a.grads, b.grads, ctx.cap, [s](const Vec& x, const Vec& y) { return Vec(x + s * y); });
      return r;
    }
    case Op::mul: {
      auto a = grad_node(*n.a, at, sel, ctx);
      auto b = grad_node(*n.b, at, sel, ctx);
      r.value = a.value * b.value;
      const double av = a.value, bv = b.value;
      r.grads = combine(a.grads, b.grads, ctx.cap, [av, bv](const Vec& x, const Vec& y) { return Vec(bv * x + av * y); });
      return r;
    }
    case Op::div: {
      auto a = grad_node(*n.a, at, sel, ctx);
      auto b = grad_node(*n.b, at, sel, ctx);
      if (std::abs(b.value) < kDivEps) throw EvalError("division by near-zero value");
      r.value = a.value / b.value;
      const double av = a.value, bv = b.value;
      r.grads = combine(a.grads, b.grads, ctx.cap,
                        [av, bv](const Vec& x, const Vec& y) { return Vec((x * bv - av * y) / (bv * bv)); });
      return r;
    }
    case Op::pow: {
      auto a = grad_node(*n.a, at, sel, ctx);
      double v = 1.0, dv = 0.0;
      for (int k = 0; k < n.exponent; ++k) v *= a.value;
      if (n.exponent > 0) {
        dv = n.exponent;
        for (int k = 0; k < n.exponent - 1; ++k) dv *= a.value;
      }
      r.value = v;
      for (auto& g : a.grads) r.grads.push_back(dv * g);
      dedupe(r.grads, ctx.cap);
      return r;
    }
    case Op::neg: {
      auto a = grad_node(*n.a, at, sel, ctx);
      r.value = -a.value;
      for (auto& g : a.grads) r.grads.push_back(-g);
      return r;
    }
    case Op::abs: {
      auto a = grad_node(*n.a, at, sel, ctx);
      r.value = std::abs(a.value);
      const double s = sel ? eval_node(*n.a, *sel) : a.value;
      const bool kink = sel ? s == 0.0 : is_kink_abs(s);
      for (auto& g : a.grads) {
        if (kink) {
          r.grads.push_back(-g);
          r.grads.push_back(g);
        } else {
          r.grads.push_back(s > 0 ? g : Vec(-g));
        }
      }
      dedupe(r.grads, ctx.cap);
      return r;
    }
    case Op::min:
    case Op::max: {
      auto a = grad_node(*n.a, at, sel, ctx);
      auto b = grad_node(*n.b, at, sel, ctx);
      const bool is_max = n.op == Op::max;
      r.value = is_max ? std::max(a.value, b.value) : std::min(a.value, b.value);
      double sa = a.value, sb = b.value;
      if (sel) {
        sa = eval_node(*n.a, *sel);
        sb = eval_node(*n.b, *sel);
      }
      const bool tie = sel ? sa == sb : is_kink_pair(sa, sb);
      const bool pick_a = is_max ? sa > sb : sa < sb;
      if (tie || pick_a) r.grads.insert(r.grads.end(), a.grads.begin(), a.grads.end());
      if (tie || !pick_a) r.grads.insert(r.grads.end(), b.grads.begin(), b.grads.end());
      dedupe(r.grads, ctx.cap);
      return r;
    }
  }
  return r;
}

inline bool node_depends(const Node& n, Block b) {
  if (n.op == Op::variable) return n.block == b;
  if (n.op == Op::constant) return false;
  return (n.a && node_depends(*n.a, b)) || (n.b && node_depends(*n.b, b));
}

inline bool node_affine(const Node& n, Block b) {
  if (!node_depends(n, b)) return true;
  switch (n.op) {
    case Op::constant:
    case Op::variable: return true;
    case Op::add:
    case Op::sub: return node_affine(*n.a, b) && node_affine(*n.b, b);
    case Op::neg: return node_affine(*n.a, b);
    case Op::mul:
      return (!node_depends(*n.a, b) && node_affine(*n.b, b)) || (!node_depends(*n.b, b) && node_affine(*n.a, b));
    case Op::div: return !node_depends(*n.b, b) && node_affine(*n.a, b);
    case Op::pow: return n.exponent == 1 && node_affine(*n.a, b);
    default: return false;
  }
}

inline int node_depth(const Node& n) {
  int d = 0;
  if (n.a) d = std::max(d, node_depth(*n.a));
  if (n.b) d = std::max(d, node_depth(*n.b));
  return d + 1;
}

inline void collect_vars(const Node& n, std::set<std::pair<int, int>>& out) {
  if (n.op == Op::variable) out.insert({static_cast<int>(n.block), n.index});
  if (n.a) collect_vars(*n.a, out);
  if (n.b) collect_vars(*n.b, out);
}

inline bool node_equal(const Node& a, const Node& b) {
  if (a.op != b.op) return false;
  switch (a.op) {
    case Op::constant: return a.value == b.value;
    case Op::variable: return a.block == b.block && a.index == b.index;
    case Op::pow: return a.exponent == b.exponent && node_equal(*a.a, *b.a);
    default:
      if (!node_equal(*a.a, *b.a)) return false;
      if (a.b && b.b) return node_equal(*a.b, *b.b);
      return !a.b && !b.b;
  }
}

}  // namespace detail

inline Expr parse(std::string_view text, Dims dims) {
  detail::Parser parser(text, dims);
  return Expr(parser.parse_all(), dims);
}

/// Canonical text form; parse(to_string(e)) is structurally equal to e.
inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print_node(*e.root(), out);
  return out;
}

inline double eval(const Expr& e, const PointView& pt) { return detail::eval_node(*e.root(), pt); }

inline bool structurally_equal(const Expr& a, const Expr& b) { return detail::node_equal(*a.root(), *b.root()); }

inline int depth(const Expr& e) { return detail::node_depth(*e.root()); }

/// Names of referenced variables, e.g. {"x1", "xi1"}, sorted by block then index.
inline std::vector<std::string> variables(const Expr& e) {
  std::set<std::pair<int, int>> vars;
  detail::collect_vars(*e.root(), vars);
  std::vector<std::string> out;
  for (auto [b, i] : vars) out.push_back(detail::block_name(static_cast<Block>(b)) + std::to_string(i + 1));
  return out;
}

inline bool depends_on(const Expr& e, Block b) { return detail::node_depends(*e.root(), b); }

/// Syntactic check that `e` is affine in block `b` for every fixed value of the other blocks.
inline bool is_affine_in(const Expr& e, Block b) { return detail::node_affine(*e.root(), b); }

/// Gradients of the smooth selections active at a point.
struct GradHull {
  std::vector<Vec> generators;
  double active_tol = kActiveTol;
  double value = 0.0;
  bool smooth() const { return generators.size() == 1; }
};

inline GradHull grad_hull(const Expr& e, const PointView& pt, Wrt wrt, std::size_t cap = 256) {
  detail::GradCtx ctx{&e.dims(), wrt, wrt_size(e.dims(), wrt), cap};
  auto br = detail::grad_node(*e.root(), pt, nullptr, ctx);
  GradHull h;
  h.value = br.value;
  h.generators = std::move(br.grads);
  return h;
}

/// Gradient at `at` of the smooth piece that is active at `select`. Branch ties at `select`
/// (exact equality) fall back to the first generator.
inline Vec grad_selected(const Expr& e, const PointView& at, const PointView& select, Wrt wrt) {
  detail::GradCtx ctx{&e.dims(), wrt, wrt_size(e.dims(), wrt), 64};
  auto br = detail::grad_node(*e.root(), at, &select, ctx);
  return br.grads.front();
}

/// Vector-valued map with shared dimensions, e.g. f(xi, x, z) with m components.
class VectorFunc {
 public:
  VectorFunc() = default;
  VectorFunc(std::vector<Expr> components, Dims dims) : components_(std::move(components)), dims_(dims) {
    for (const auto& c : components_) {
      if (!(c.dims() == dims_)) throw ValidationError("vector function components declare different dimensions");
    }
  }

  int size() const { return static_cast<int>(components_.size()); }
  const Dims& dims() const { return dims_; }
  const std::vector<Expr>& components() const { return components_; }
  const Expr& operator[](int i) const { return components_[static_cast<std::size_t>(i)]; }

  Vec eval(const PointView& pt) const {
    Vec out(size());
    for (int i = 0; i < size(); ++i) out[i] = vep::eval(components_[static_cast<std::size_t>(i)], pt);
    return out;
  }

  bool is_affine_in(Block b) const {
    return std::all_of(components_.begin(), components_.end(), [b](const Expr& e) { return vep::is_affine_in(e, b); });
  }
  bool depends_on(Block b) const {
    return std::any_of(components_.begin(), components_.end(), [b](const Expr& e) { return vep::depends_on(e, b); });
  }

  /// Jacobian (m x |wrt|) of the pieces selected at `select`, evaluated at `at`.
  Mat jacobian_selected(const PointView& at, const PointView& select, Wrt wrt) const {
    Mat J(size(), wrt_size(dims_, wrt));
    for (int i = 0; i < size(); ++i) J.row(i) = grad_selected(components_[static_cast<std::size_t>(i)], at, select, wrt).transpose();
    return J;
  }

  Mat jacobian(const PointView& at, Wrt wrt) const { return jacobian_selected(at, at, wrt); }

  /// Every Jacobian obtained by picking one active-branch gradient per row (capped).
  std::vector<Mat> jacobian_hull(const PointView& at, Wrt wrt, std::size_t cap = 64) const {
    std::vector<std::vector<Vec>> rows;
    for (const auto& c : components_) rows.push_back(grad_hull(c, at, wrt).generators);
    std::vector<Mat> out;
    std::vector<std::size_t> idx(rows.size(), 0);
    const int cols = wrt_size(dims_, wrt);
    while (out.size() < cap) {
      Mat J(size(), cols);
      for (std::size_t i = 0; i < rows.size(); ++i) J.row(static_cast<Eigen::Index>(i)) = rows[i][idx[i]].transpose();
      out.push_back(std::move(J));
      std::size_t k = 0;
      while (k < rows.size()) {
        if (++idx[k] < rows[k].size()) break;
        idx[k] = 0;
        ++k;
      }
      if (k == rows.size()) break;
    }
    return out;
  }

 private:
  std::vector<Expr> components_;
  Dims dims_;
};

}  // namespace vep

#endif  // VEP_EXPR_HPP
