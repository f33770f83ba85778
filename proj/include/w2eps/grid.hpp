#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "w2eps/error.hpp"

namespace w2eps {

using Point = std::vector<double>;

inline double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double c : x) s += c * c;
  return s;
}

inline double distance2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline std::string format_point(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
  os << ')';
  return os.str();
}

/// Uniform isotropic Cartesian grid. Nodes are origin + h * index, last axis fastest.
class GridSpec {
 public:
  GridSpec(std::vector<std::size_t> shape, Point origin, double spacing)
      : shape_(std::move(shape)), origin_(std::move(origin)), spacing_(spacing) {
    if (shape_.size() < 2) throw DomainError("grid dimension must be at least 2");
    if (origin_.size() != shape_.size()) throw DomainError("origin dimension does not match shape");
    if (!(spacing_ > 0.0) || !std::isfinite(spacing_)) throw DomainError("spacing must be positive");
    for (std::size_t s : shape_)
      if (s < 3) throw DomainError("every axis needs at least 3 points");
    strides_.assign(shape_.size(), 1);
    for (std::size_t k = shape_.size() - 1; k > 0; --k) strides_[k - 1] = strides_[k] * shape_[k];
    size_ = strides_[0] * shape_[0];
  }

  /// Cube of the given side centered at `center` with `points` nodes per axis.
  static GridSpec cube(std::size_t dim, double side, std::size_t points, Point center = {}) {
    if (center.empty()) center.assign(dim, 0.0);
    if (points < 3) throw DomainError("every axis needs at least 3 points");
    const double h = side / static_cast<double>(points - 1);
    Point origin(dim);
    for (std::size_t i = 0; i < dim; ++i) origin[i] = center[i] - side / 2.0;
    return GridSpec(std::vector<std::size_t>(dim, points), std::move(origin), h);
  }

  std::size_t dim() const { return shape_.size(); }
  const std::vector<std::size_t>& shape() const { return shape_; }
  const std::vector<std::size_t>& strides() const { return strides_; }
  const Point& origin() const { return origin_; }
  double spacing() const { return spacing_; }
  std::size_t size() const { return size_; }
  double cell_volume() const { return std::pow(spacing_, static_cast<double>(dim())); }
  double extent(std::size_t axis) const { return spacing_ * static_cast<double>(shape_[axis] - 1); }

  double coordinate(std::size_t axis, std::ptrdiff_t index) const {
    return origin_[axis] + spacing_ * static_cast<double>(index);
  }

  std::vector<std::size_t> multi_index(std::size_t flat) const {
    std::vector<std::size_t> idx(dim());
    for (std::size_t k = 0; k < dim(); ++k) {
      idx[k] = flat / strides_[k];
      flat %= strides_[k];
    }
    return idx;
  }

  std::size_t flat(std::span<const std::size_t> idx) const {
    std::size_t f = 0;
    for (std::size_t k = 0; k < dim(); ++k) f += idx[k] * strides_[k];
    return f;
  }

  void node(std::size_t flat, std::span<double> out) const {
    for (std::size_t k = 0; k < dim(); ++k) {
      out[k] = coordinate(k, static_cast<std::ptrdiff_t>(flat / strides_[k]));
      flat %= strides_[k];
    }
  }

  Point node(std::size_t flat) const {
    Point x(dim());
    node(flat, x);
    return x;
  }

  /// Nearest node to x, clamped into the grid.
  std::size_t nearest(std::span<const double> x) const {
    std::size_t f = 0;
    for (std::size_t k = 0; k < dim(); ++k) {
      const double t = std::round((x[k] - origin_[k]) / spacing_);
      const double c = std::clamp(t, 0.0, static_cast<double>(shape_[k] - 1));
      f += static_cast<std::size_t>(c) * strides_[k];
    }
    return f;
  }

  bool operator==(const GridSpec& o) const {
    return shape_ == o.shape_ && origin_ == o.origin_ && spacing_ == o.spacing_;
  }

 private:
  std::vector<std::size_t> shape_;
  Point origin_;
  double spacing_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

/// Real values on every node of a grid.
struct GridFunction {
  GridSpec spec;
  std::vector<double> values;

  explicit GridFunction(GridSpec s, double fill = 0.0) : spec(std::move(s)), values(spec.size(), fill) {}
  GridFunction(GridSpec s, std::vector<double> v) : spec(std::move(s)), values(std::move(v)) {
    if (values.size() != spec.size()) throw DomainError("value count does not match grid size");
  }

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  std::size_t size() const { return values.size(); }
};

/// Boolean flag per node, with Lebesgue measure by cell counting.
struct GridMask {
  GridSpec spec;
  std::vector<std::uint8_t> flags;

  explicit GridMask(GridSpec s, bool fill = false) : spec(std::move(s)), flags(spec.size(), fill ? 1 : 0) {}
  GridMask(GridSpec s, std::vector<std::uint8_t> f) : spec(std::move(s)), flags(std::move(f)) {
    if (flags.size() != spec.size()) throw DomainError("flag count does not match grid size");
  }

  bool operator[](std::size_t i) const { return flags[i] != 0; }
  void set(std::size_t i, bool b = true) { flags[i] = b ? 1 : 0; }
  std::size_t size() const { return flags.size(); }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
  }
  bool any() const { return std::find(flags.begin(), flags.end(), std::uint8_t{1}) != flags.end(); }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < flags.size(); ++i)
      if (flags[i]) out.push_back(i);
    return out;
  }
};

inline void require_same_spec(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) throw DomainError(std::string(what) + ": grid specs differ");
}

inline GridMask operator&(const GridMask& a, const GridMask& b) {
  require_same_spec(a.spec, b.spec, "mask intersection");
  GridMask out(a.spec);
  for (std::size_t i = 0; i < a.size(); ++i) out.flags[i] = a.flags[i] & b.flags[i];
  return out;
}

inline GridMask operator|(const GridMask& a, const GridMask& b) {
  require_same_spec(a.spec, b.spec, "mask union");
  GridMask out(a.spec);
  for (std::size_t i = 0; i < a.size(); ++i) out.flags[i] = a.flags[i] | b.flags[i];
  return out;
}

/// a \ b
inline GridMask operator-(const GridMask& a, const GridMask& b) {
  require_same_spec(a.spec, b.spec, "mask difference");
  GridMask out(a.spec);
  for (std::size_t i = 0; i < a.size(); ++i) out.flags[i] = a.flags[i] & (b.flags[i] ^ 1);
  return out;
}

inline bool is_subset(const GridMask& a, const GridMask& b) {
  require_same_spec(a.spec, b.spec, "mask inclusion");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.flags[i] && !b.flags[i]) return false;
  return true;
}

/// h^n times the number of set flags.
inline double measure(const GridMask& m) {
  return m.spec.cell_volume() * static_cast<double>(m.count());
}

enum class DomainKind { cube, ball, annulus };

/// Axis-aligned cube given by center and side.
struct Box {
  Point center;
  double side = 0.0;
};

/// Cube, ball or annulus inside a bounding cube.
///
/// Cubes use the open convention {y : |y_i - x_i| < side/2}; `outer` holds
/// the side for cubes and the radius for balls and annuli. Closed variants
/// (`closed = true`) use non-strict inequalities.
struct DomainSpec {
  DomainKind kind = DomainKind::cube;
  Point center;
  double outer = 0.0;
  double inner = 0.0;
  bool closed = false;
  Box bounding;

  static DomainSpec cube(Point center, double side, Box bounding, bool closed = false) {
    DomainSpec d{DomainKind::cube, std::move(center), side, 0.0, closed, std::move(bounding)};
    d.validate();
    return d;
  }
  static DomainSpec ball(Point center, double radius, Box bounding, bool closed = false) {
    DomainSpec d{DomainKind::ball, std::move(center), radius, 0.0, closed, std::move(bounding)};
    d.validate();
    return d;
  }
  static DomainSpec annulus(Point center, double inner, double outer, Box bounding) {
    DomainSpec d{DomainKind::annulus, std::move(center), outer, inner, false, std::move(bounding)};
    d.validate();
    return d;
  }

  /// Smallest cube containing the whole grid (the grid must be a cube).
  static Box bounding_of(const GridSpec& g) {
    Box b;
    b.center.resize(g.dim());
    b.side = g.extent(0);
    for (std::size_t k = 0; k < g.dim(); ++k) {
      b.center[k] = g.origin()[k] + g.extent(k) / 2.0;
      b.side = std::max(b.side, g.extent(k));
    }
    return b;
  }

  /// The closed bounding cube of the grid: every node belongs to it.
  static DomainSpec whole(const GridSpec& g) {
    Box b = bounding_of(g);
    return cube(b.center, b.side, b, true);
  }

  std::size_t dim() const { return center.size(); }

  void validate() const {
    if (center.size() < 2) throw DomainError("domain dimension must be at least 2");
    if (bounding.center.size() != center.size()) throw DomainError("bounding cube dimension mismatch");
    if (!(outer > 0.0)) throw DomainError("domain size must be positive");
    if (kind == DomainKind::annulus && !(inner >= 0.0 && inner < outer))
      throw DomainError("annulus needs 0 <= inner < outer");
    const double eps = 1e-12 * std::max(1.0, bounding.side);
    const double half = kind == DomainKind::cube ? outer / 2.0 : outer;
    for (std::size_t k = 0; k < center.size(); ++k) {
      if (center[k] - half < bounding.center[k] - bounding.side / 2.0 - eps ||
          center[k] + half > bounding.center[k] + bounding.side / 2.0 + eps)
        throw DomainError("region is not contained in its bounding cube");
    }
  }

  bool contains(std::span<const double> x) const {
    const double eps = 1e-12 * std::max(1.0, outer);
    switch (kind) {
      case DomainKind::cube: {
        for (std::size_t k = 0; k < center.size(); ++k) {
          const double d = std::abs(x[k] - center[k]);
          if (closed ? d > outer / 2.0 + eps : d >= outer / 2.0 - eps) return false;
        }
        return true;
      }
      case DomainKind::ball: {
        const double r = std::sqrt(distance2(x, center));
        return closed ? r <= outer + eps : r < outer - eps;
      }
      case DomainKind::annulus: {
        const double r = std::sqrt(distance2(x, center));
        return r > inner + eps && r < outer - eps;
      }
    }
    return false;
  }

  /// Lebesgue measure of the continuum region.
  double volume() const;

  /// (n-1)-dimensional boundary measure of the continuum region.
  double perimeter() const;
};

namespace detail {
inline double unit_ball_volume(std::size_t n) {
  return std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0 + 1.0);
}
}  // namespace detail

inline double DomainSpec::volume() const {
  const auto n = static_cast<double>(dim());
  switch (kind) {
    case DomainKind::cube:
      return std::pow(outer, n);
    case DomainKind::ball:
      return detail::unit_ball_volume(dim()) * std::pow(outer, n);
    case DomainKind::annulus:
      return detail::unit_ball_volume(dim()) * (std::pow(outer, n) - std::pow(inner, n));
  }
  return 0.0;
}

inline double DomainSpec::perimeter() const {
  const auto n = static_cast<double>(dim());
  switch (kind) {
    case DomainKind::cube:
      return 2.0 * n * std::pow(outer, n - 1.0);
    case DomainKind::ball:
      return n * detail::unit_ball_volume(dim()) * std::pow(outer, n - 1.0);
    case DomainKind::annulus:
      return n * detail::unit_ball_volume(dim()) * (std::pow(outer, n - 1.0) + std::pow(inner, n - 1.0));
  }
  return 0.0;
}

/// Flags the nodes lying in the region of d.
inline GridMask mask_of_domain(const DomainSpec& d, const GridSpec& spec) {
  if (d.dim() != spec.dim()) throw DomainError("domain and grid dimensions differ");
  // The bounding cube must lie inside the grid box (up to rounding).
  const double eps = 1e-9 * spec.spacing();
  for (std::size_t k = 0; k < spec.dim(); ++k) {
    const double lo = spec.origin()[k];
    const double hi = lo + spec.extent(k);
    if (d.bounding.center[k] - d.bounding.side / 2.0 < lo - eps ||
        d.bounding.center[k] + d.bounding.side / 2.0 > hi + eps)
      throw DomainError("bounding cube exceeds the grid extent on axis " + std::to_string(k));
  }
  GridMask m(spec);
  Point x(spec.dim());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    spec.node(i, x);
    m.flags[i] = d.contains(x) ? 1 : 0;
  }
  return m;
}

/// Ball around which a singular profile is evaluated at the radial projection.
struct ExcludedBall {
  Point center;
  double radius = 0.0;
};

/// Samples f at every node. Nodes inside the guard ball are evaluated at their
/// radial projection onto the guard sphere.
template <class F>
GridFunction sample(F&& f, const GridSpec& spec, const std::optional<ExcludedBall>& guard = std::nullopt) {
  GridFunction out(spec);
  Point x(spec.dim());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    spec.node(i, x);
    if (guard) {
      const double r = std::sqrt(distance2(x, guard->center));
      if (r < guard->radius) {
        for (std::size_t k = 0; k < x.size(); ++k) {
          const double dir = r > 0.0 ? (x[k] - guard->center[k]) / r : (k == 0 ? 1.0 : 0.0);
          x[k] = guard->center[k] + guard->radius * dir;
        }
      }
    }
    const double y = f(std::span<const double>(x));
    if (!std::isfinite(y)) {
      spec.node(i, x);
      throw SamplingError("non-finite value at node " + std::to_string(i) + " " + format_point(x));
    }
    out.values[i] = y;
  }
  return out;
}

}  // namespace w2eps
