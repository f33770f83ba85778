#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "w2eps/parallel.hpp"

namespace w2eps {

inline constexpr std::size_t no_source = std::numeric_limits<std::size_t>::max();

struct EnvelopeWorkspace {
  std::vector<std::ptrdiff_t> site;
  std::vector<double> bound;
};

/// Lower envelope of the parabolas f[j] + a (t - j)^2 sampled at t = q - offset.
///
/// out[q] = min_j f[j] + a (q - offset - j)^2 over finite f[j]; arg[q] is the
/// minimizing j, or -1 when no f[j] is finite. Linear in f.size() + out.size().
/// On exact ties the smaller j wins.
inline void lower_envelope_1d(std::span<const double> f, double a, std::ptrdiff_t offset,
                              std::span<double> out, std::span<std::ptrdiff_t> arg,
                              EnvelopeWorkspace& ws) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto n = static_cast<std::ptrdiff_t>(f.size());
  ws.site.resize(f.size() + 1);
  ws.bound.resize(f.size() + 2);
  std::ptrdiff_t k = -1;
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    if (!std::isfinite(f[j])) continue;
    if (k < 0) {
      k = 0;
      ws.site[0] = j;
      ws.bound[0] = -inf;
      ws.bound[1] = inf;
      continue;
    }
    double s = 0.0;
    for (;;) {
      const std::ptrdiff_t p = ws.site[k];
      // Abscissa where parabola j overtakes parabola p, written to avoid a*j^2 cancellation.
      s = (f[j] - f[p]) / (2.0 * a * static_cast<double>(j - p)) + 0.5 * static_cast<double>(j + p);
      if (s <= ws.bound[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= ws.bound[k]) {
      // k == 0 and parabola j dominates the whole line
      ws.site[0] = j;
      continue;
    }
    ++k;
    ws.site[k] = j;
    ws.bound[k] = s;
    ws.bound[k + 1] = inf;
  }
  if (k < 0) {
    for (std::size_t q = 0; q < out.size(); ++q) {
      out[q] = inf;
      arg[q] = -1;
    }
    return;
  }
  std::ptrdiff_t cur = 0;
  for (std::size_t q = 0; q < out.size(); ++q) {
    const double t = static_cast<double>(static_cast<std::ptrdiff_t>(q) - offset);
    while (cur < k && ws.bound[cur + 1] < t) ++cur;
    const std::ptrdiff_t j = ws.site[cur];
    const double d = t - static_cast<double>(j);
    out[q] = f[j] + a * d * d;
    arg[q] = j;
  }
}

/// Result of a separable min-plus convolution with a quadratic kernel.
struct SeparableMin {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  /// Flat index (into the input array) of the minimizer, or no_source.
  std::vector<std::size_t> source;
};

/// out(q) = min_x in(x) + a |q - offset - x|^2 over a Cartesian lattice, in index units.
///
/// Axes are processed last to first, so exact ties resolve to the
/// lexicographically smallest input index. Non-finite inputs are skipped.
inline SeparableMin separable_min_convolution(std::span<const double> input,
                                              const std::vector<std::size_t>& in_shape, double a,
                                              const std::vector<std::ptrdiff_t>& offset,
                                              const std::vector<std::size_t>& out_shape,
                                              bool track_source = true) {
  const std::size_t dim = in_shape.size();
  std::vector<std::size_t> shape = in_shape;
  std::vector<double> cur(input.begin(), input.end());
  std::vector<std::size_t> src;
  if (track_source) {
    src.resize(cur.size());
    for (std::size_t i = 0; i < src.size(); ++i) src[i] = i;
  }

  for (std::size_t ax = dim; ax-- > 0;) {
    std::size_t outer = 1, inner = 1;
    for (std::size_t k = 0; k < ax; ++k) outer *= shape[k];
    for (std::size_t k = ax + 1; k < dim; ++k) inner *= shape[k];
    const std::size_t n_in = shape[ax];
    const std::size_t n_out = out_shape[ax];
    std::vector<double> next(outer * n_out * inner);
    std::vector<std::size_t> next_src(track_source ? next.size() : 0);
    const std::size_t lines = outer * inner;

    parallel_for(lines, [&](std::size_t begin, std::size_t end) {
      EnvelopeWorkspace ws;
      std::vector<double> line_in(n_in), line_out(n_out);
      std::vector<std::ptrdiff_t> line_arg(n_out);
      for (std::size_t l = begin; l < end; ++l) {
        const std::size_t o = l / inner, i = l % inner;
        const std::size_t base_in = o * n_in * inner + i;
        const std::size_t base_out = o * n_out * inner + i;
        for (std::size_t j = 0; j < n_in; ++j) line_in[j] = cur[base_in + j * inner];
        lower_envelope_1d(line_in, a, offset[ax], line_out, line_arg, ws);
        for (std::size_t q = 0; q < n_out; ++q) {
          next[base_out + q * inner] = line_out[q];
          if (track_source)
            next_src[base_out + q * inner] =
                line_arg[q] < 0 ? no_source : src[base_in + static_cast<std::size_t>(line_arg[q]) * inner];
        }
      }
    });
    cur = std::move(next);
    src = std::move(next_src);
    shape[ax] = n_out;
  }
  return SeparableMin{std::move(shape), std::move(cur), std::move(src)};
}

}  // namespace w2eps
