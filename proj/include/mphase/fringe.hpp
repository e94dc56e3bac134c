#pragma once

// Least-squares fit of a sampled fringe pattern to A + B cos(k x + theta).

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mphase/numerics.hpp"

namespace mphase {

class NoFringesError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FringeFit {
  double offset = 0.0;     ///< A
  double amplitude = 0.0;  ///< B >= 0
  double wavenumber = 0.0; ///< k > 0
  double phase = 0.0;      ///< theta, wrapped into (-pi, pi]
  double period = 0.0;     ///< 2 pi / k
  double visibility = 0.0; ///< B / A, i.e. (max - min) / (max + min) of the model
  double residual = 0.0;   ///< RMS of the fit residual
  int iterations = 0;
  bool converged = false;
};

struct FringeFitOptions {
  int max_iterations = 50;
  double step_tolerance = 1e-10;
  double min_visibility = 0.05;
  double min_periods = 3.0;
};

namespace detail {

inline double fringe_rms(std::span<const double> x, std::span<const double> y, const Eigen::Vector4d& p) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = p[0] + p[1] * std::cos(p[2] * x[i] + p[3]) - y[i];
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace detail

/// Fit y(x) ~ A + B cos(k x + theta). k starts at the strongest peak of a
/// zero-padded discrete Fourier transform of the mean-removed data, then
/// Gauss-Newton (with step halving) refines all four parameters.
inline FringeFit fringe_analysis(std::span<const double> x, std::span<const double> y,
                                 const FringeFitOptions& opt = {}) {
  const std::size_t n = x.size();
  if (n != y.size()) throw std::invalid_argument("fringe_analysis: x and y differ in length");
  if (n < 8) throw std::invalid_argument("fringe_analysis needs at least 8 samples");
  const double span = x[n - 1] - x[0];
  if (!(span > 0.0)) throw std::invalid_argument("fringe_analysis: x must be increasing");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);

  // Spectral peak on a 4x oversampled wavenumber grid up to the Nyquist limit.
  const double dk = two_pi / (4.0 * span);
  const double k_nyquist = pi * static_cast<double>(n - 1) / span;
  double best_k = 0.0, best_power = -1.0;
  std::complex<double> best_c{};
  for (double k = dk; k <= k_nyquist; k += dk) {
    std::complex<double> c{};
    for (std::size_t i = 0; i < n; ++i) c += (y[i] - mean) * std::polar(1.0, -k * x[i]);
    if (std::norm(c) > best_power) {
      best_power = std::norm(c);
      best_k = k;
      best_c = c;
    }
  }
  if (best_k == 0.0) throw NoFringesError("no spectral peak in the fringe data");

  Eigen::Vector4d p{mean, 2.0 * std::abs(best_c) / static_cast<double>(n), best_k, std::arg(best_c)};
  FringeFit fit;
  double rms = detail::fringe_rms(x, y, p);
  Eigen::MatrixX4d J(n, 4);
  Eigen::VectorXd r(n);
  for (int it = 1; it <= opt.max_iterations; ++it) {
    fit.iterations = it;
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const double c = std::cos(p[2] * x[i] + p[3]);
      const double s = std::sin(p[2] * x[i] + p[3]);
      J(row, 0) = 1.0;
      J(row, 1) = c;
      J(row, 2) = -p[1] * x[i] * s;
      J(row, 3) = -p[1] * s;
      r[row] = p[0] + p[1] * c - y[i];
    }
    Eigen::Vector4d step = J.colPivHouseholderQr().solve(-r);
    double scale = 1.0;
    Eigen::Vector4d trial = p + step;
    double trial_rms = detail::fringe_rms(x, y, trial);
    while (trial_rms > rms && scale > 1e-4) {
      scale *= 0.5;
      trial = p + scale * step;
      trial_rms = detail::fringe_rms(x, y, trial);
    }
    const double moved = (scale * step).norm();
    if (trial_rms <= rms) {
      p = trial;
      rms = trial_rms;
    }
    if (moved < opt.step_tolerance) {
      fit.converged = true;
      break;
    }
  }

  if (p[1] < 0.0) {
    p[1] = -p[1];
    p[3] += pi;
  }
  if (p[2] < 0.0) {
    p[2] = -p[2];
    p[3] = -p[3];
  }
  fit.offset = p[0];
  fit.amplitude = p[1];
  fit.wavenumber = p[2];
  fit.phase = wrap_angle(p[3]);
  fit.period = two_pi / p[2];
  fit.visibility = p[0] > 0.0 ? std::min(1.0, p[1] / p[0]) : 0.0;
  fit.residual = rms;
  if (fit.visibility < opt.min_visibility) {
    throw NoFringesError("fringe visibility " + std::to_string(fit.visibility) + " below " +
                         std::to_string(opt.min_visibility) + ": no fringes");
  }
  // Each sample stands for one cell of the window.
  const double coverage = span * static_cast<double>(n) / static_cast<double>(n - 1);
  if (coverage / fit.period < opt.min_periods - 1e-9) {
    throw std::invalid_argument("fringe window holds only " + std::to_string(coverage / fit.period) +
                                " periods; at least " + std::to_string(opt.min_periods) + " required");
  }
  return fit;
}

}  // namespace mphase
