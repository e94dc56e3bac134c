#pragma once

// One-dimensional wave mechanics in hydrodynamic form: spectral split-operator
// propagation on a periodic grid, the polar split psi = R exp(iS/hbar), the
// amplitude-derived statistical term U = -(hbar^2/2m) R''/R, residuals of the
// Hamilton-Jacobi and continuity equations, and Bohmian trajectories.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mphase/numerics.hpp"

namespace mphase {

/// Nodes: samples with R below this fraction of max R.
inline constexpr double node_threshold_fraction = 1e-6;

/// Periodic uniform grid x_k = x0 + k dx, k = 0..N-1, length L = N dx.
struct SpatialGrid {
  double x0 = 0.0;
  double dx = 1.0;
  std::size_t count = 0;

  static SpatialGrid centered(double length, std::size_t n) {
    if (!(length > 0.0) || n == 0) throw std::invalid_argument("grid needs length > 0 and N > 0");
    return {-0.5 * length, length / static_cast<double>(n), n};
  }

  double operator[](std::size_t k) const { return x0 + static_cast<double>(k) * dx; }
  std::size_t size() const { return count; }
  double length() const { return static_cast<double>(count) * dx; }

  /// Angular wavenumber of FFT bin k (standard FFT ordering).
  double wavenumber(std::size_t k) const {
    const auto n = static_cast<std::ptrdiff_t>(count);
    auto j = static_cast<std::ptrdiff_t>(k);
    if (j >= n / 2) j -= n;
    return two_pi * static_cast<double>(j) / length();
  }
  double max_wavenumber() const { return pi / dx; }

  bool operator==(const SpatialGrid&) const = default;
};

class UnderResolvedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Velocity requested where the amplitude vanishes.
class NodeVelocityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Wavefunction1D {
  SpatialGrid grid;
  std::vector<cplx> values;
  double mass = 1.0;
  double time = 0.0;

  std::size_t size() const { return values.size(); }

  void validate() const {
    if (grid.count < 8 || !std::has_single_bit(grid.count)) {
      throw std::invalid_argument("grid size N must be a power of two >= 8 (got " +
                                  std::to_string(grid.count) + ")");
    }
    if (values.size() != grid.count) throw std::invalid_argument("wavefunction size does not match its grid");
    if (!(mass > 0.0)) throw std::invalid_argument("mass must be > 0");
    if (!(grid.dx > 0.0)) throw std::invalid_argument("grid spacing must be > 0");
  }

  double norm() const {
    double acc = 0.0;
    for (const auto& v : values) acc += std::norm(v);
    return acc * grid.dx;
  }

  Wavefunction1D& normalize() {
    const double n = norm();
    if (!(n > 0.0)) throw EmptyStateError("cannot normalise a vanishing wavefunction");
    const double s = 1.0 / std::sqrt(n);
    for (auto& v : values) v *= s;
    return *this;
  }

  std::vector<double> density() const {
    std::vector<double> out(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) out[k] = std::norm(values[k]);
    return out;
  }
};

/// Normalised Gaussian packet exp(-(x-x0)^2/4 sigma^2 + i k0 (x-x0) + i phase).
inline Wavefunction1D gaussian_packet(const SpatialGrid& grid, double mass, double center, double sigma,
                                      double k0 = 0.0, double phase = 0.0) {
  if (!(sigma > 0.0)) throw std::invalid_argument("packet width must be > 0");
  Wavefunction1D psi{grid, std::vector<cplx>(grid.count), mass, 0.0};
  const double amp = std::pow(two_pi * sigma * sigma, -0.25);
  for (std::size_t k = 0; k < grid.count; ++k) {
    const double u = grid[k] - center;
    psi.values[k] = amp * std::exp(cplx{-u * u / (4.0 * sigma * sigma), k0 * u + phase});
  }
  return psi;
}

struct PositionMoments {
  double mean = 0.0;
  double sigma = 0.0;
};

inline PositionMoments position_moments(const Wavefunction1D& psi) {
  double w = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const double p = std::norm(psi.values[k]);
    const double x = psi.grid[k];
    w += p;
    m1 += p * x;
    m2 += p * x * x;
  }
  const double mean = m1 / w;
  return {mean, std::sqrt(std::max(0.0, m2 / w - mean * mean))};
}

/// Time for a free Gaussian of width sigma0 to spread by sqrt(2).
inline double spreading_time(double sigma0, double mass) { return 2.0 * mass * sigma0 * sigma0 / hbar; }

/// Probability within `width` of either end of the periodic domain.
inline double edge_probability(const Wavefunction1D& psi, double width) {
  double acc = 0.0;
  const double lo = psi.grid.x0 + width;
  const double hi = psi.grid.x0 + psi.grid.length() - width;
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const double x = psi.grid[k];
    if (x < lo || x > hi) acc += std::norm(psi.values[k]);
  }
  return acc * psi.grid.dx;
}

enum class PotentialKind { free, harmonic, double_slit, tabulated };

inline std::string to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::free: return "free";
    case PotentialKind::harmonic: return "harmonic";
    case PotentialKind::double_slit: return "double_slit";
    case PotentialKind::tabulated: return "tabulated";
  }
  return "unknown";
}

/// Real, bounded potential on the grid.
///   harmonic:    m omega0^2 (x - center)^2 / 2
///   double_slit: barrier_height everywhere except two openings of width
///                slit_width centred at center +- slit_separation / 2
///   tabulated:   one value per grid sample
struct PotentialSpec {
  PotentialKind kind = PotentialKind::free;
  double omega0 = 0.0;
  double center = 0.0;
  double barrier_height = 0.0;
  double slit_separation = 0.0;
  double slit_width = 0.0;
  std::vector<double> table;

  static PotentialSpec free() { return {}; }
  static PotentialSpec harmonic(double omega0, double center = 0.0) {
    PotentialSpec p;
    p.kind = PotentialKind::harmonic;
    p.omega0 = omega0;
    p.center = center;
    return p;
  }
  static PotentialSpec double_slit(double height, double separation, double width, double center = 0.0) {
    PotentialSpec p;
    p.kind = PotentialKind::double_slit;
    p.barrier_height = height;
    p.slit_separation = separation;
    p.slit_width = width;
    p.center = center;
    return p;
  }
  static PotentialSpec tabulated(std::vector<double> values) {
    PotentialSpec p;
    p.kind = PotentialKind::tabulated;
    p.table = std::move(values);
    return p;
  }

  std::vector<double> sample(const SpatialGrid& grid, double mass) const {
    std::vector<double> v(grid.count, 0.0);
    switch (kind) {
      case PotentialKind::free: break;
      case PotentialKind::harmonic:
        if (!(omega0 > 0.0)) throw std::invalid_argument("harmonic potential needs omega0 > 0");
        for (std::size_t k = 0; k < grid.count; ++k) {
          const double u = grid[k] - center;
          v[k] = 0.5 * mass * omega0 * omega0 * u * u;
        }
        break;
      case PotentialKind::double_slit:
        if (!(slit_width > 0.0) || !(slit_separation > slit_width)) {
          throw std::invalid_argument("double slit needs separation > width > 0");
        }
        for (std::size_t k = 0; k < grid.count; ++k) {
          const double u = grid[k] - center;
          const bool open = std::abs(u - 0.5 * slit_separation) < 0.5 * slit_width ||
                            std::abs(u + 0.5 * slit_separation) < 0.5 * slit_width;
          v[k] = open ? 0.0 : barrier_height;
        }
        break;
      case PotentialKind::tabulated:
        if (table.size() != grid.count) throw std::invalid_argument("tabulated potential does not match the grid");
        v = table;
        break;
    }
    for (double x : v) {
      if (!std::isfinite(x)) throw std::invalid_argument("potential must be finite on the grid");
    }
    return v;
  }
};

namespace detail {

/// In-place complex FFT of fixed size backed by FFTW. Not thread-safe to
/// construct concurrently (FFTW planning is global).
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n), buf_(fftw_alloc_complex(n)) {
    if (!buf_) throw std::bad_alloc();
    const int size = static_cast<int>(n);
    fwd_ = fftw_plan_dft_1d(size, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(size, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~Fft() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  void forward(std::vector<cplx>& data) { run(fwd_, data, 1.0); }
  /// Normalised inverse.
  void backward(std::vector<cplx>& data) { run(bwd_, data, 1.0 / static_cast<double>(n_)); }

 private:
  void run(fftw_plan plan, std::vector<cplx>& data, double scale) {
    auto* b = reinterpret_cast<cplx*>(buf_);
    std::copy(data.begin(), data.end(), b);
    fftw_execute(plan);
    for (std::size_t k = 0; k < n_; ++k) data[k] = scale * b[k];
  }

  std::size_t n_;
  fftw_complex* buf_;
  fftw_plan fwd_{};
  fftw_plan bwd_{};
};

inline std::size_t wrap_index(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

/// Fourth-order central first derivative on a periodic grid.
template <typename T>
std::vector<T> derivative(const std::vector<T>& f, double dx) {
  const std::size_t n = f.size();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = static_cast<std::ptrdiff_t>(i);
    out[i] = (-f[wrap_index(p + 2, n)] + 8.0 * f[wrap_index(p + 1, n)] - 8.0 * f[wrap_index(p - 1, n)] +
              f[wrap_index(p - 2, n)]) /
             (12.0 * dx);
  }
  return out;
}

/// Fourth-order central second derivative on a periodic grid.
inline std::vector<double> second_derivative(const std::vector<double>& f, double dx) {
  const std::size_t n = f.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = static_cast<std::ptrdiff_t>(i);
    out[i] = (-f[wrap_index(p + 2, n)] + 16.0 * f[wrap_index(p + 1, n)] - 30.0 * f[i] +
              16.0 * f[wrap_index(p - 1, n)] - f[wrap_index(p - 2, n)]) /
             (12.0 * dx * dx);
  }
  return out;
}

}  // namespace detail

namespace detail {

/// Spectral power above two thirds of the Nyquist wavenumber must stay below
/// 1e-6 of the total.
inline void check_spectrum(const SpatialGrid& grid, const std::vector<cplx>& spectrum) {
  const double cutoff = 2.0 / 3.0 * grid.max_wavenumber();
  double total = 0.0, high = 0.0;
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    const double p = std::norm(spectrum[k]);
    total += p;
    if (std::abs(grid.wavenumber(k)) > cutoff) high += p;
  }
  if (high > 1e-6 * total) {
    throw UnderResolvedError("wavefunction under-resolved: " + std::to_string(high / total) +
                             " of the spectral power lies in the top third of the grid wavenumbers");
  }
}

}  // namespace detail

/// Throws UnderResolvedError if the state is too sharp for its grid.
inline void check_spectral_resolution(const Wavefunction1D& psi) {
  psi.validate();
  detail::Fft fft(psi.grid.count);
  auto y = psi.values;
  fft.forward(y);
  detail::check_spectrum(psi.grid, y);
}

/// Strang-split propagator: half kinetic step in k-space, full potential step,
/// half kinetic step. Exact for V = 0.
class SplitOperatorPropagator {
 public:
  SplitOperatorPropagator(const SpatialGrid& grid, double mass, const PotentialSpec& potential, double dt)
      : grid_(grid), mass_(mass), dt_(dt), fft_(grid.count), free_(potential.kind == PotentialKind::free) {
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be > 0");
    const std::vector<double> v = potential.sample(grid, mass);
    const double k_max = grid.max_wavenumber();
    const double e_max = hbar * k_max * k_max / (2.0 * mass);
    if (!free_ && dt * e_max > 0.1) {
      throw std::invalid_argument("time step violates dt*E_max <= 0.1 (dt=" + std::to_string(dt) +
                                  ", E_max=" + std::to_string(e_max) + ")");
    }
    kinetic_half_.resize(grid.count);
    for (std::size_t k = 0; k < grid.count; ++k) {
      const double kk = grid.wavenumber(k);
      kinetic_half_[k] = std::polar(1.0, -hbar * kk * kk / (2.0 * mass) * 0.5 * dt);
    }
    potential_.resize(grid.count);
    for (std::size_t k = 0; k < grid.count; ++k) potential_[k] = std::polar(1.0, -v[k] * dt / hbar);
  }

  double dt() const { return dt_; }

  /// One Strang step in place. Throws UnderResolvedError if more than 1e-6 of
  /// the spectral power sits in the top third of the wavenumber range.
  void step(Wavefunction1D& psi) {
    if (!(psi.grid == grid_) || psi.mass != mass_) {
      throw std::invalid_argument("wavefunction does not match the propagator grid/mass");
    }
    auto& y = psi.values;
    fft_.forward(y);
    detail::check_spectrum(grid_, y);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] *= kinetic_half_[k];
    if (free_) {
      for (std::size_t k = 0; k < y.size(); ++k) y[k] *= kinetic_half_[k];
      fft_.backward(y);
    } else {
      fft_.backward(y);
      for (std::size_t k = 0; k < y.size(); ++k) y[k] *= potential_[k];
      fft_.forward(y);
      for (std::size_t k = 0; k < y.size(); ++k) y[k] *= kinetic_half_[k];
      fft_.backward(y);
    }
    psi.time += dt_;
  }

 private:
  SpatialGrid grid_;
  double mass_;
  double dt_;
  detail::Fft fft_;
  bool free_;
  std::vector<cplx> kinetic_half_;
  std::vector<cplx> potential_;
};

inline Wavefunction1D split_operator_step(Wavefunction1D psi, const PotentialSpec& potential, double dt) {
  psi.validate();
  SplitOperatorPropagator prop(psi.grid, psi.mass, potential, dt);
  prop.step(psi);
  return psi;
}

/// Propagate `steps` steps, keeping every `stride`-th frame (the initial state
/// is always frame 0).
inline std::vector<Wavefunction1D> propagate(Wavefunction1D psi, const PotentialSpec& potential, double dt,
                                             std::size_t steps, std::size_t stride = 1) {
  psi.validate();
  if (stride == 0) throw std::invalid_argument("frame stride must be >= 1");
  SplitOperatorPropagator prop(psi.grid, psi.mass, potential, dt);
  std::vector<Wavefunction1D> frames;
  frames.reserve(steps / stride + 1);
  frames.push_back(psi);
  for (std::size_t s = 1; s <= steps; ++s) {
    prop.step(psi);
    if (s % stride == 0) frames.push_back(psi);
  }
  return frames;
}

/// Polar form psi = R exp(iS/hbar) and the fields derived from it. S, U and v
/// are NaN on the node mask; the current j = R^2 v is defined everywhere.
struct MadelungFields {
  SpatialGrid grid;
  double mass = 1.0;
  double time = 0.0;
  std::vector<double> R;
  std::vector<double> S;
  std::vector<double> U;
  std::vector<double> v;
  std::vector<double> current;
  std::vector<bool> node_mask;

  /// Material phase -S/hbar, for display.
  double material_phase(std::size_t k) const { return -S[k] / hbar; }
};

inline MadelungFields polar_decompose(const Wavefunction1D& psi) {
  psi.validate();
  const std::size_t n = psi.size();
  MadelungFields f;
  f.grid = psi.grid;
  f.mass = psi.mass;
  f.time = psi.time;
  f.R.resize(n);
  double r_max = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    f.R[k] = std::abs(psi.values[k]);
    r_max = std::max(r_max, f.R[k]);
  }
  if (!(r_max > 0.0)) throw EmptyStateError("wavefunction vanishes everywhere: no polar decomposition");
  const double eps = node_threshold_fraction * r_max;
  f.node_mask.resize(n);
  for (std::size_t k = 0; k < n; ++k) f.node_mask[k] = f.R[k] < eps;

  // Action, unwrapped independently within each run of non-node samples.
  f.S.assign(n, quiet_nan);
  double last = quiet_nan;
  for (std::size_t k = 0; k < n; ++k) {
    if (f.node_mask[k]) {
      last = quiet_nan;
      continue;
    }
    double p = std::arg(psi.values[k]);
    if (!std::isnan(last)) p = last + wrap_angle(p - last);
    f.S[k] = hbar * p;
    last = p;
  }

  const auto dpsi = detail::derivative(psi.values, psi.grid.dx);
  const auto d2R = detail::second_derivative(f.R, psi.grid.dx);
  f.current.resize(n);
  f.v.assign(n, quiet_nan);
  f.U.assign(n, quiet_nan);
  for (std::size_t k = 0; k < n; ++k) {
    f.current[k] = hbar / psi.mass * std::imag(std::conj(psi.values[k]) * dpsi[k]);
    if (f.node_mask[k]) continue;
    f.U[k] = -(hbar * hbar / (2.0 * psi.mass)) * d2R[k] / f.R[k];
    // dS/dx from wrapped phase differences; next to a node, where the
    // stencil would cross the mask, from the current instead.
    const auto p = static_cast<std::ptrdiff_t>(k);
    bool clear = true;
    std::array<double, 4> d{};
    constexpr std::array<std::ptrdiff_t, 4> offsets{-2, -1, 1, 2};
    for (std::size_t j = 0; j < 4; ++j) {
      const std::size_t q = detail::wrap_index(p + offsets[j], n);
      if (f.node_mask[q]) {
        clear = false;
        break;
      }
      d[j] = wrap_angle(std::arg(psi.values[q] * std::conj(psi.values[k])));
    }
    f.v[k] = clear ? hbar * (d[0] - 8.0 * d[1] + 8.0 * d[2] - d[3]) / (12.0 * psi.grid.dx * psi.mass)
                   : f.current[k] / (f.R[k] * f.R[k]);
  }
  return f;
}

/// Pointwise residual (NaN where undefined) and its max-norm.
struct ResidualField {
  std::vector<double> values;
  double max_norm = 0.0;
};

namespace detail {

inline ResidualField summarise(std::vector<double> values) {
  ResidualField r{std::move(values), 0.0};
  for (double x : r.values) {
    if (!std::isnan(x)) r.max_norm = std::max(r.max_norm, std::abs(x));
  }
  return r;
}

}  // namespace detail

/// dS/dt by central difference between frames `before` and `after`, spanning
/// `span` in time. Differences are wrapped, so the phase may change by up to
/// pi between the frames.
inline std::vector<double> action_rate(const MadelungFields& before, const MadelungFields& after, double span) {
  if (!(before.grid == after.grid)) throw std::invalid_argument("action_rate: frames on different grids");
  std::vector<double> out(before.S.size(), quiet_nan);
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (before.node_mask[k] || after.node_mask[k]) continue;
    out[k] = hbar * wrap_angle((after.S[k] - before.S[k]) / hbar) / span;
  }
  return out;
}

/// dS/dt + m v^2/2 + V + U, off the node mask.
inline ResidualField hj_residual(const MadelungFields& f, const PotentialSpec& potential,
                                 const std::vector<double>& dS_dt) {
  const auto V = potential.sample(f.grid, f.mass);
  if (dS_dt.size() != V.size()) throw std::invalid_argument("hj_residual: dS/dt does not match the grid");
  std::vector<double> r(V.size(), quiet_nan);
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (f.node_mask[k] || std::isnan(dS_dt[k])) continue;
    r[k] = dS_dt[k] + 0.5 * f.mass * f.v[k] * f.v[k] + V[k] + f.U[k];
  }
  return detail::summarise(std::move(r));
}

/// (rho_2 - rho_1)/dt + d/dx of the time-averaged current, centred between
/// the two frames.
inline ResidualField continuity_residual(const MadelungFields& first, const MadelungFields& second, double dt) {
  if (!(first.grid == second.grid)) throw std::invalid_argument("continuity_residual: frames on different grids");
  const auto dj1 = detail::derivative(first.current, first.grid.dx);
  const auto dj2 = detail::derivative(second.current, second.grid.dx);
  std::vector<double> r(first.R.size(), quiet_nan);
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (first.node_mask[k] || second.node_mask[k]) continue;
    const double drho = second.R[k] * second.R[k] - first.R[k] * first.R[k];
    r[k] = drho / dt + 0.5 * (dj1[k] + dj2[k]);
  }
  return detail::summarise(std::move(r));
}

namespace detail {

/// Cubic Lagrange interpolation of a periodic grid field at x. Returns NaN if
/// any stencil value is NaN.
inline double interpolate_cubic(const SpatialGrid& grid, const std::vector<double>& f, double x) {
  const double s = (x - grid.x0) / grid.dx;
  const double fl = std::floor(s);
  const double u = s - fl;
  const auto i = static_cast<std::ptrdiff_t>(fl);
  const std::size_t n = grid.count;
  const double fm1 = f[wrap_index(i - 1, n)];
  const double f0 = f[wrap_index(i, n)];
  const double f1 = f[wrap_index(i + 1, n)];
  const double f2 = f[wrap_index(i + 2, n)];
  return -u * (u - 1.0) * (u - 2.0) / 6.0 * fm1 + (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0 * f0 -
         (u + 1.0) * u * (u - 2.0) / 2.0 * f1 + (u + 1.0) * u * (u - 1.0) / 6.0 * f2;
}

}  // namespace detail

/// Bohmian velocity v = (1/m) dS/dx at x, by cubic interpolation.
inline double bohmian_velocity(const MadelungFields& f, double x) {
  const double lo = f.grid.x0;
  const double hi = f.grid.x0 + f.grid.length();
  if (!(x >= lo && x < hi)) throw std::out_of_range("bohmian_velocity: position outside the grid");
  const double v = detail::interpolate_cubic(f.grid, f.v, x);
  if (std::isnan(v)) {
    throw NodeVelocityError("velocity undefined at x=" + std::to_string(x) + ": amplitude node nearby");
  }
  return v;
}

struct TrajectoryEnsemble {
  std::uint64_t seed = 0;
  std::vector<double> times;
  /// positions[i][k]: trajectory i at times[k].
  std::vector<std::vector<double>> positions;
  /// Trajectories that left the periodic domain and were wrapped.
  std::vector<bool> wrapped;

  std::size_t count() const { return positions.size(); }
  std::vector<double> snapshot(std::size_t k) const {
    std::vector<double> out(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) out[i] = positions[i][k];
    return out;
  }
};

/// Sorted positions drawn from |psi|^2 by inverse-CDF sampling, treating the
/// density as constant on each grid cell.
inline std::vector<double> sample_positions(const MadelungFields& f, std::size_t n, std::uint64_t seed) {
  const std::size_t m = f.R.size();
  std::vector<double> cdf(m + 1, 0.0);
  for (std::size_t k = 0; k < m; ++k) cdf[k + 1] = cdf[k] + f.R[k] * f.R[k];
  const double total = cdf[m];
  std::mt19937_64 rng(seed);
  std::vector<double> out(n);
  for (auto& x : out) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * total;
    const auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), u);
    const auto cell = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin() - 1, m - 1));
    const double mass = cdf[cell + 1] - cdf[cell];
    const double frac = mass > 0.0 ? (u - cdf[cell]) / mass : 0.5;
    x = f.grid[cell] - 0.5 * f.grid.dx + frac * f.grid.dx;
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Advance |psi(t0)|^2-distributed trajectories through the frames with RK4,
/// the velocity interpolated cubically in space and linearly in time.
inline TrajectoryEnsemble integrate_trajectories(const std::vector<MadelungFields>& frames, std::size_t n_traj,
                                                 std::uint64_t seed) {
  if (frames.size() < 2) throw std::invalid_argument("integrate_trajectories needs at least two frames");
  if (n_traj == 0) throw std::invalid_argument("integrate_trajectories needs n_traj >= 1");
  const SpatialGrid& grid = frames.front().grid;
  for (const auto& fr : frames) {
    if (!(fr.grid == grid)) throw std::invalid_argument("integrate_trajectories: frames on different grids");
  }
  TrajectoryEnsemble ens;
  ens.seed = seed;
  ens.times.reserve(frames.size());
  for (const auto& fr : frames) ens.times.push_back(fr.time);
  ens.positions.assign(n_traj, std::vector<double>(frames.size()));
  ens.wrapped.assign(n_traj, false);

  const double lo = grid.x0;
  const double len = grid.length();
  auto wrap = [&](double x, std::size_t i) {
    if (x < lo || x >= lo + len) {
      ens.wrapped[i] = true;
      x = lo + (x - lo) - len * std::floor((x - lo) / len);
      if (x >= lo + len) x = lo;
    }
    return x;
  };
  auto velocity = [&](std::size_t k, double s, double x, std::size_t i) {
    x = wrap(x, i);
    const double a = bohmian_velocity(frames[k], x);
    if (s == 0.0) return a;
    const double b = bohmian_velocity(frames[k + 1], x);
    return (1.0 - s) * a + s * b;
  };

  const auto start = sample_positions(frames.front(), n_traj, seed);
  for (std::size_t i = 0; i < n_traj; ++i) {
    double x = start[i];
    ens.positions[i][0] = x;
    for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
      const double h = frames[k + 1].time - frames[k].time;
      const double k1 = velocity(k, 0.0, x, i);
      const double k2 = velocity(k, 0.5, x + 0.5 * h * k1, i);
      const double k3 = velocity(k, 0.5, x + 0.5 * h * k2, i);
      const double k4 = velocity(k, 1.0, x + h * k3, i);
      x = wrap(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), i);
      ens.positions[i][k + 1] = x;
    }
  }
  return ens;
}

/// True if sorted-at-start trajectories remain ordered at every time.
inline bool preserves_ordering(const TrajectoryEnsemble& ens) {
  for (std::size_t k = 0; k < ens.times.size(); ++k) {
    for (std::size_t i = 1; i < ens.count(); ++i) {
      if (ens.positions[i][k] < ens.positions[i - 1][k]) return false;
    }
  }
  return true;
}

/// Total-variation distance between a sample histogram and |psi|^2 over
/// `bins` equal bins spanning the central 1 - 2e-4 of the probability. Mass
/// outside the window counts in full.
inline double total_variation_distance(const std::vector<double>& samples, const MadelungFields& f,
                                       std::size_t bins = 64) {
  const std::size_t m = f.R.size();
  const double dx = f.grid.dx;
  std::vector<double> cdf(m + 1, 0.0);
  for (std::size_t k = 0; k < m; ++k) cdf[k + 1] = cdf[k] + f.R[k] * f.R[k];
  const double total = cdf[m];
  auto quantile = [&](double q) {
    const double target = q * total;
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
    const auto cell = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - cdf.begin() - 1, 0, m - 1));
    const double mass = cdf[cell + 1] - cdf[cell];
    const double frac = mass > 0.0 ? (target - cdf[cell]) / mass : 0.0;
    return f.grid[cell] - 0.5 * dx + frac * dx;
  };
  const double a = quantile(1e-4);
  const double b = quantile(1.0 - 1e-4);
  const double width = (b - a) / static_cast<double>(bins);

  // Exact cell-to-bin overlap of the piecewise-constant density.
  std::vector<double> p_psi(bins, 0.0);
  double inside = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double c0 = f.grid[k] - 0.5 * dx;
    const double c1 = c0 + dx;
    const double rho = f.R[k] * f.R[k] / (total * dx);
    const auto first = static_cast<std::ptrdiff_t>(std::floor((c0 - a) / width));
    const auto last = static_cast<std::ptrdiff_t>(std::floor((c1 - a) / width));
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(first, 0);
         j <= std::min<std::ptrdiff_t>(last, static_cast<std::ptrdiff_t>(bins) - 1); ++j) {
      const double b0 = a + static_cast<double>(j) * width;
      const double overlap = std::min(c1, b0 + width) - std::max(c0, b0);
      if (overlap > 0.0) {
        p_psi[static_cast<std::size_t>(j)] += rho * overlap;
        inside += rho * overlap;
      }
    }
  }
  std::vector<double> p_traj(bins, 0.0);
  double traj_inside = 0.0;
  const double weight = 1.0 / static_cast<double>(samples.size());
  for (double x : samples) {
    const double s = (x - a) / width;
    if (s < 0.0 || s >= static_cast<double>(bins)) continue;
    p_traj[static_cast<std::size_t>(s)] += weight;
    traj_inside += weight;
  }
  double tv = 0.5 * ((1.0 - inside) + (1.0 - traj_inside));
  for (std::size_t j = 0; j < bins; ++j) tv += 0.5 * std::abs(p_psi[j] - p_traj[j]);
  return tv;
}

struct Superposition {
  Wavefunction1D state;
  double norm_before = 0.0;
};

/// sum_i C_i psi_i, renormalised. The norm before renormalisation is kept.
inline Superposition superpose(const std::vector<std::pair<cplx, Wavefunction1D>>& terms) {
  if (terms.empty()) throw std::invalid_argument("superpose needs at least one state");
  const auto& ref = terms.front().second;
  Superposition out{Wavefunction1D{ref.grid, std::vector<cplx>(ref.size()), ref.mass, ref.time}, 0.0};
  for (const auto& [c, psi] : terms) {
    if (!(psi.grid == ref.grid) || psi.size() != ref.size()) {
      throw std::invalid_argument("superpose: states live on different grids");
    }
    if (psi.mass != ref.mass) throw std::invalid_argument("superpose: states have different masses");
    for (std::size_t k = 0; k < psi.size(); ++k) out.state.values[k] += c * psi.values[k];
  }
  out.norm_before = out.state.norm();
  out.state.normalize();
  return out;
}

}  // namespace mphase
