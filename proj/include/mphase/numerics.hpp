#pragma once

// Shared numerical primitives: natural units, uniform grids, composite
// Simpson quadrature and phase unwrapping.

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace mphase {

using cplx = std::complex<double>;

/// Internal unit system: hbar = 1 everywhere.
inline constexpr double hbar = 1.0;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double quiet_nan = std::numeric_limits<double>::quiet_NaN();

/// Uniform sample grid t_k = start + k * step, k = 0..count-1.
struct UniformGrid {
  double start = 0.0;
  double step = 0.0;
  std::size_t count = 0;

  double operator[](std::size_t k) const { return start + static_cast<double>(k) * step; }
  double back() const { return (*this)[count - 1]; }
  std::size_t size() const { return count; }

  /// Grid covering [start, stop] with spacing as close to `approx_step` as
  /// possible while landing exactly on `stop`.
  static UniformGrid covering(double start, double stop, double approx_step) {
    if (!(approx_step > 0.0) || !(stop > start)) {
      throw std::invalid_argument("UniformGrid::covering requires stop > start and step > 0");
    }
    const auto intervals =
        static_cast<std::size_t>(std::ceil((stop - start) / approx_step - 1e-9));
    return UniformGrid{start, (stop - start) / static_cast<double>(intervals), intervals + 1};
  }

  std::vector<double> values() const {
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) out[k] = (*this)[k];
    return out;
  }
};

/// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, two_pi);
  if (r <= -pi) r += two_pi;
  return r;
}

/// Composite Simpson integral of uniformly spaced samples. An odd number of
/// intervals closes with a 3/8 panel on the last three intervals.
inline double simpson(std::span<const double> f, double h) {
  const std::size_t n = f.size();
  if (n < 2) return 0.0;
  if (n == 2) return 0.5 * h * (f[0] + f[1]);
  const std::size_t intervals = n - 1;
  std::size_t simpson_end = intervals;
  double tail = 0.0;
  if (intervals % 2 == 1) {
    if (intervals == 1) return 0.5 * h * (f[0] + f[1]);
    simpson_end = intervals - 3;
    tail = 3.0 * h / 8.0 * (f[n - 4] + 3.0 * f[n - 3] + 3.0 * f[n - 2] + f[n - 1]);
  }
  double acc = 0.0;
  for (std::size_t k = 0; k + 2 <= simpson_end; k += 2) {
    acc += f[k] + 4.0 * f[k + 1] + f[k + 2];
  }
  return acc * h / 3.0 + tail;
}

/// Running integral I_k = int_{x_0}^{x_k} f on a uniform grid, fourth-order
/// accurate at every sample: Simpson panels at even k, a one-interval
/// quadratic correction at odd k.
inline std::vector<double> cumulative_simpson(std::span<const double> f, double h) {
  const std::size_t n = f.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  if (n == 2) {
    out[1] = 0.5 * h * (f[0] + f[1]);
    return out;
  }
  out[1] = h / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2]);
  for (std::size_t k = 2; k < n; ++k) {
    if (k % 2 == 0) {
      out[k] = out[k - 2] + h / 3.0 * (f[k - 2] + 4.0 * f[k - 1] + f[k]);
    } else {
      out[k] = out[k - 1] + h / 12.0 * (-f[k - 2] + 8.0 * f[k - 1] + 5.0 * f[k]);
    }
  }
  return out;
}

/// Integral of a callable over [a, b] with composite Simpson on `intervals`
/// uniform intervals.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        std::size_t intervals = 2048) {
  if (a == b) return 0.0;
  if (intervals < 2) intervals = 2;
  if (intervals % 2 == 1) ++intervals;
  const double h = (b - a) / static_cast<double>(intervals);
  std::vector<double> samples(intervals + 1);
  for (std::size_t k = 0; k <= intervals; ++k) samples[k] = f(a + static_cast<double>(k) * h);
  return simpson(samples, h);
}

/// Unwrap a phase series in place: each sample is shifted by a multiple of
/// 2 pi so that consecutive samples differ by at most pi. NaN samples are
/// skipped and the next finite sample continues from the last finite one.
inline void unwrap_in_place(std::span<double> phase) {
  double last = quiet_nan;
  for (double& p : phase) {
    if (std::isnan(p)) continue;
    if (!std::isnan(last)) p = last + wrap_angle(p - last);
    last = p;
  }
}

}  // namespace mphase
