#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "w2eps/error.hpp"
#include "w2eps/grid.hpp"

namespace w2eps {

/// Node-index cube [lo, lo + side) on every axis.
struct IndexBox {
  std::vector<std::ptrdiff_t> lo;
  std::size_t side = 0;

  /// The concentric cube of three times the side.
  IndexBox dilated() const {
    IndexBox b{lo, 3 * side};
    for (auto& l : b.lo) l -= static_cast<std::ptrdiff_t>(side);
    return b;
  }

  bool inside(const IndexBox& outer) const {
    for (std::size_t k = 0; k < lo.size(); ++k)
      if (lo[k] < outer.lo[k] ||
          lo[k] + static_cast<std::ptrdiff_t>(side) > outer.lo[k] + static_cast<std::ptrdiff_t>(outer.side))
        return false;
    return true;
  }

  std::size_t volume() const {
    std::size_t v = 1;
    for (std::size_t k = 0; k < lo.size(); ++k) v *= side;
    return v;
  }

  /// The 2^n half-side sub-cubes in lexicographic order.
  std::vector<IndexBox> children() const {
    const std::size_t n = lo.size(), half = side / 2;
    std::vector<IndexBox> out;
    for (std::size_t c = 0; c < (std::size_t{1} << n); ++c) {
      IndexBox b{lo, half};
      for (std::size_t k = 0; k < n; ++k)
        if (c & (std::size_t{1} << (n - 1 - k))) b.lo[k] += static_cast<std::ptrdiff_t>(half);
      out.push_back(std::move(b));
    }
    return out;
  }
};

/// Summed-volume table of a mask for O(2^n) box counts.
class BoxCounter {
 public:
  explicit BoxCounter(const GridMask& m) : shape_(m.spec.shape()) {
    const std::size_t n = shape_.size();
    ext_.resize(n);
    stride_.assign(n, 1);
    for (std::size_t k = 0; k < n; ++k) ext_[k] = shape_[k] + 1;
    for (std::size_t k = n - 1; k > 0; --k) stride_[k - 1] = stride_[k] * ext_[k];
    table_.assign(stride_[0] * ext_[0], 0);
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m[i]) continue;
      const auto idx = m.spec.multi_index(i);
      std::size_t f = 0;
      for (std::size_t k = 0; k < n; ++k) f += (idx[k] + 1) * stride_[k];
      table_[f] = 1;
    }
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t f = 0; f < table_.size(); ++f)
        if ((f / stride_[k]) % ext_[k] > 0) table_[f] += table_[f - stride_[k]];
  }

  /// Set flags inside the box, clipped to the grid.
  std::size_t count(const IndexBox& b) const {
    const std::size_t n = shape_.size();
    std::vector<std::size_t> lo(n), hi(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::ptrdiff_t a = std::max<std::ptrdiff_t>(0, b.lo[k]);
      const std::ptrdiff_t e =
          std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(shape_[k]), b.lo[k] + static_cast<std::ptrdiff_t>(b.side));
      if (e <= a) return 0;
      lo[k] = static_cast<std::size_t>(a);
      hi[k] = static_cast<std::size_t>(e);
    }
    long long total = 0;
    for (std::size_t c = 0; c < (std::size_t{1} << n); ++c) {
      std::size_t f = 0, lows = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const bool low = c & (std::size_t{1} << k);
        f += (low ? lo[k] : hi[k]) * stride_[k];
        lows += low;
      }
      total += (lows % 2 ? -1 : 1) * static_cast<long long>(table_[f]);
    }
    return static_cast<std::size_t>(total);
  }

 private:
  std::vector<std::size_t> shape_, ext_, stride_;
  std::vector<std::size_t> table_;
};

/// Root cube of a dyadic decomposition: the nodes of an open cube, 2^L per axis, cell-centred.
struct DyadicFrame {
  IndexBox root;
  std::size_t levels = 0;
};

/// Frame for the open cube of the given center and side.
///
/// Requires the cube's nodes to be cell centres: side = (node count) * h with a power-of-two count.
inline DyadicFrame dyadic_frame(const GridSpec& g, const Point& center, double side) {
  const std::size_t n = g.dim();
  DyadicFrame f;
  f.root.lo.resize(n);
  std::size_t count = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double lo = center[k] - side / 2.0, hi = center[k] + side / 2.0;
    const double eps = 1e-9 * g.spacing();
    const auto first = static_cast<std::ptrdiff_t>(std::floor((lo - g.origin()[k]) / g.spacing() + 1.0 - eps));
    const auto last = static_cast<std::ptrdiff_t>(std::ceil((hi - g.origin()[k]) / g.spacing() - 1.0 + eps));
    if (first < 0 || last >= static_cast<std::ptrdiff_t>(g.shape()[k]) || last < first)
      throw AlignmentError("cube does not fit on the grid");
    const auto c = static_cast<std::size_t>(last - first + 1);
    if (k && c != count) throw AlignmentError("cube has unequal node counts per axis");
    count = c;
    f.root.lo[k] = first;
    // cell-centred: the faces sit half a spacing outside the extreme nodes
    const double face = g.coordinate(k, first) - g.spacing() / 2.0;
    if (std::abs(face - lo) > 1e-9 * g.spacing()) throw AlignmentError("cube faces are not at cell boundaries");
  }
  if (count == 0 || (count & (count - 1)) != 0) throw AlignmentError("cube node count is not a power of two");
  f.root.side = count;
  while ((std::size_t{1} << f.levels) < count) ++f.levels;
  return f;
}

/// Sets the flags of the nodes of b that lie on the grid.
inline void add_box(GridMask& m, const IndexBox& b) {
  const GridSpec& g = m.spec;
  const std::size_t n = g.dim();
  std::vector<std::size_t> lo(n), hi(n);
  for (std::size_t k = 0; k < n; ++k) {
    lo[k] = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, b.lo[k]));
    hi[k] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(b.lo[k] + static_cast<std::ptrdiff_t>(b.side), 0,
                                                                static_cast<std::ptrdiff_t>(g.shape()[k])));
    if (hi[k] <= lo[k]) return;
  }
  std::vector<std::size_t> idx = lo;
  for (;;) {
    m.set(g.flat(idx));
    std::size_t k = n;
    while (k > 0) {
      --k;
      if (++idx[k] < hi[k]) break;
      idx[k] = lo[k];
      if (k == 0) return;
    }
  }
}

inline GridMask mask_of_box(const GridSpec& g, const IndexBox& b) {
  GridMask m(g);
  add_box(m, b);
  return m;
}

struct CZResult {
  std::vector<IndexBox> selected;
  /// Union of the dilations of the selected cubes, clipped to the grid.
  GridMask dilated_union;
  /// False when a selected cube's dilation leaves the root or is not contained in E.
  bool hypothesis_met = true;
  std::string hypothesis_note;
  double measure_D = 0.0, measure_E = 0.0;
  double delta = 0.0;
  double slack = 0.0;
  /// |D| <= delta |E| + slack; asserted only when the hypothesis is met.
  bool conclusion_holds = false;
  /// |D| <= delta |E| with no slack.
  bool strict_holds = false;
  /// D is empty: the conclusion holds vacuously and nothing was exercised.
  bool degenerate = false;
};

/// Dyadic Calderón-Zygmund selection of maximal cubes with |D ∩ Q| >= delta |Q|.
///
/// Each selected Q_r must satisfy Q_3r ⊆ root and Q_3r ⊆ E for the hypothesis to hold.
/// Splitting is by halves: the parent of a selected cube lies inside its
/// threefold dilation, which is what the covering argument needs.
inline CZResult cz_decompose(const GridMask& D, const GridMask& E, const DyadicFrame& frame, double delta,
                             double slack = 0.0) {
  require_same_spec(D.spec, E.spec, "cz_decompose");
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must lie in (0, 1)");
  if (!is_subset(D, E)) throw ContractViolation("D is not contained in E");
  const GridMask root = mask_of_box(D.spec, frame.root);
  if (!is_subset(E, root)) throw ContractViolation("E is not contained in the root cube");

  CZResult r{{}, GridMask(D.spec), true, {}, measure(D), measure(E), delta, slack, false, false, false};
  r.degenerate = !D.any();
  if (static_cast<double>(D.count()) > delta * static_cast<double>(frame.root.volume())) {
    r.hypothesis_met = false;
    r.hypothesis_note = "|D| exceeds delta |root|";
  }
  const BoxCounter cd(D), ce(E);
  std::vector<IndexBox> stack{frame.root};
  std::vector<IndexBox> dilations;
  while (!stack.empty()) {
    IndexBox q = std::move(stack.back());
    stack.pop_back();
    const double vol = static_cast<double>(q.volume());
    if (static_cast<double>(cd.count(q)) >= delta * vol) {
      const IndexBox big = q.dilated();
      if (!big.inside(frame.root)) {
        if (r.hypothesis_met) r.hypothesis_note = "dilation of a selected cube leaves the root cube";
        r.hypothesis_met = false;
      } else if (ce.count(big) != big.volume()) {
        if (r.hypothesis_met) r.hypothesis_note = "dilation of a selected cube is not contained in E";
        r.hypothesis_met = false;
      }
      r.selected.push_back(q);
      dilations.push_back(big);
      continue;
    }
    if (q.side > 1) {
      auto ch = q.children();
      // reverse so that pops visit children in lexicographic order
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(std::move(*it));
    }
  }
  for (const IndexBox& b : dilations) add_box(r.dilated_union, b);
  r.strict_holds = r.measure_D <= delta * r.measure_E;
  r.conclusion_holds = r.measure_D <= delta * r.measure_E + slack;
  return r;
}

}  // namespace w2eps
