#ifndef VEP_COMMON_HPP
#define VEP_COMMON_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <optional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vep {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Base class of every error raised by the toolkit.
class VepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text or problem file.
class ParseError : public VepError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : VepError(what + " (at offset " + std::to_string(offset) + ")"), message_(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }
  /// The message without the offset suffix.
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  std::size_t offset_;
};

class EvalError : public VepError {
 public:
  using VepError::VepError;
};

class GeometryError : public VepError {
 public:
  using VepError::VepError;
};

/// A loaded problem violates a structural requirement (empty slice, bad cone).
class ValidationError : public VepError {
 public:
  using VepError::VepError;
};

/// An operation was called outside its domain (point off the graph, missing window).
class PreconditionError : public VepError {
 public:
  using VepError::VepError;
};

inline Vec vec(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double d : values) v[i++] = d;
  return v;
}

inline Vec concat(const Vec& a, const Vec& b) {
  Vec out(a.size() + b.size());
  out << a, b;
  return out;
}

inline std::span<const double> as_span(const Vec& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

inline double rel_tol(double tol, double scale) { return tol * std::max(1.0, std::abs(scale)); }

/// Unit vector of `v`, or zero when `v` is (numerically) zero.
inline Vec normalized_or_zero(const Vec& v, double tol = 1e-300) {
  const double n = v.norm();
  if (n <= tol) return Vec::Zero(v.size());
  return v / n;
}

/// Appends `v` to `out` unless an entry within `tol` (max-norm) is already present.
inline void push_unique(std::vector<Vec>& out, const Vec& v, double tol = 1e-12) {
  for (const auto& w : out) {
    if (w.size() == v.size() && (w - v).lpNorm<Eigen::Infinity>() <= tol) return;
  }
  out.push_back(v);
}

/// Evenly spaced values covering [lo, hi] inclusive; a single point when lo == hi.
inline std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> out;
  if (count <= 1 || hi <= lo) {
    out.push_back(lo);
    return out;
  }
  out.reserve(static_cast<std::size_t>(count));
  const double step = (hi - lo) / (count - 1);
  for (int i = 0; i < count; ++i) out.push_back(i + 1 == count ? hi : lo + step * i);
  return out;
}

/// Cartesian product grid over a box with `per_axis` points per coordinate.
inline std::vector<Vec> box_grid(const Vec& lower, const Vec& upper, int per_axis) {
  const auto dim = lower.size();
  std::vector<std::vector<double>> axes;
  for (Eigen::Index i = 0; i < dim; ++i) axes.push_back(linspace(lower[i], upper[i], per_axis));
  std::vector<Vec> out;
  if (dim == 0) {
    out.emplace_back(0);
    return out;
  }
  std::vector<std::size_t> idx(static_cast<std::size_t>(dim), 0);
  while (true) {
    Vec p(dim);
    for (Eigen::Index i = 0; i < dim; ++i) p[i] = axes[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
    out.push_back(std::move(p));
    Eigen::Index k = 0;
    while (k < dim) {
      auto& c = idx[static_cast<std::size_t>(k)];
      if (++c < axes[static_cast<std::size_t>(k)].size()) break;
      c = 0;
      ++k;
    }
    if (k == dim) break;
  }
  return out;
}

/// Uniformly distributed unit vector.
inline Vec random_unit(std::mt19937_64& rng, Eigen::Index dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(dim);
  do {
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = normal(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

inline Vec random_in_box(std::mt19937_64& rng, const Vec& lower, const Vec& upper) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vec v(lower.size());
  for (Eigen::Index i = 0; i < lower.size(); ++i) v[i] = lower[i] + (upper[i] - lower[i]) * unif(rng);
  return v;
}

/// Worker count for sweeps; VEP_THREADS caps it.
inline unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("VEP_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap > 0) hw = std::min(hw, static_cast<unsigned>(cap));
  }
  return hw;
}

/// Runs fn(i) for i in [0, count). Each index is handled by exactly one thread, so
/// callers writing to slot i of a pre-sized vector get deterministic results.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace vep

#endif  // VEP_COMMON_HPP
