#pragma once

// Driven, damped two-level system: RK4 integration of i dc/dt = H(t) c in the
// bare basis (integrating-factor form for the full coupling), with amplitude phases tracked as unwrapped reals under the
// convention c = |c| exp(-i Phi).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "mphase/field.hpp"
#include "mphase/numerics.hpp"

namespace mphase {

/// Amplitudes below this modulus carry no meaningful phase.
inline constexpr double amplitude_node_threshold = 1e-8;

struct TwoLevelSystem {
  double omega_g = 0.0;
  double omega_e = 1.0;
  double dipole = 1.0;  ///< Rabi frequency is dipole * E0(t) / hbar
  double gamma_g = 0.0;
  double gamma_e = 0.0;
  double phi_g = 0.0;
  double phi_e = 0.0;

  double transition_frequency() const { return omega_e - omega_g; }

  /// Detuning of a carrier from resonance, atom minus carrier.
  double detuning(double carrier) const { return omega_e - omega_g - carrier; }

  void validate() const {
    if (!(gamma_g >= 0.0) || !(gamma_e >= 0.0)) {
      throw std::invalid_argument("damping rates must satisfy gamma_g >= 0, gamma_e >= 0");
    }
    if (!(omega_e > omega_g)) throw std::invalid_argument("level ordering requires omega_e > omega_g");
  }
};

enum class Level { ground, excited };

/// full: the oscillating dipole coupling -dipole * E(t) in the lab frame.
/// rwa: rotating-wave coupling, integrated in the frame co-rotating with the
/// field phase and mapped back to lab-frame amplitudes.
enum class HamiltonianModel { full, rwa };

enum class Frame { lab, rotating };

struct AmplitudeTrajectory {
  std::vector<double> times;
  std::vector<cplx> c_g;
  std::vector<cplx> c_e;
  std::vector<double> unwrapped_phase_g;  ///< NaN where |c_g| < node threshold
  std::vector<double> unwrapped_phase_e;
  Frame frame = Frame::lab;

  std::size_t size() const { return times.size(); }
  double population_g(std::size_t k) const { return std::norm(c_g[k]); }
  double population_e(std::size_t k) const { return std::norm(c_e[k]); }
  double norm(std::size_t k) const { return population_g(k) + population_e(k); }

  const std::vector<cplx>& amplitudes(Level l) const { return l == Level::ground ? c_g : c_e; }
  const std::vector<double>& phases(Level l) const {
    return l == Level::ground ? unwrapped_phase_g : unwrapped_phase_e;
  }
};

/// Raised when the sampled amplitudes rotate too fast for the phase to be
/// followed unambiguously.
class UnresolvedPhaseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TdseOptions {
  HamiltonianModel model = HamiltonianModel::full;
  /// Enforce dt * max(|omega_g|, |omega_e|, Omega_R, |Delta|) <= 0.1 (or the
  /// rotating-frame equivalent under the RWA).
  bool check_resolution = true;
};

namespace detail {

using State = std::array<cplx, 2>;

/// Phase series Phi = -arg(c), seeded at the first sample and unwrapped.
/// A jump beyond pi/2 is legitimate only when the amplitude passes close to a
/// node; if instead the amplitude moved by more than a quarter of the state
/// norm in one step, the grid does not resolve the rotation.
inline std::vector<double> track_phase(const std::vector<cplx>& c,
                                       const std::vector<double>& state_norm, double seed,
                                       const char* label) {
  std::vector<double> phase(c.size(), quiet_nan);
  double last = quiet_nan;
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (std::abs(c[k]) < amplitude_node_threshold) continue;
    double p = -std::arg(c[k]);
    if (std::isnan(last)) {
      if (k == 0 && std::isfinite(seed)) p = seed;
    } else {
      const double step = wrap_angle(p - last);
      const double chord = std::abs(c[k] - c[k - 1]);
      if (std::abs(step) > 0.5 * pi && chord > 0.25 * state_norm[k - 1]) {
        throw UnresolvedPhaseError(std::string("phase of c_") + label + " jumps by " +
                                   std::to_string(step) + " rad between samples " +
                                   std::to_string(k - 1) + " and " + std::to_string(k) +
                                   ": time grid under-resolved");
      }
      p = last + step;
    }
    phase[k] = p;
    last = p;
  }
  return phase;
}

template <DrivingField F>
double max_rabi_on_grid(const TwoLevelSystem& sys, const F& field, const UniformGrid& grid) {
  double m = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    m = std::max(m, std::abs(sys.dipole * field.complex_envelope(grid[k])) / hbar);
  }
  return m;
}

}  // namespace detail

/// Enforce dt * max(|omega_g|, |omega_e|, Omega_R, |Delta|) <= 0.1 on the grid.
/// Under the RWA the bare excited frequency is replaced by its offset from
/// the instantaneous field frequency.
template <DrivingField F>
void check_tdse_resolution(const TwoLevelSystem& sys, const F& field, const UniformGrid& grid,
                           HamiltonianModel model) {
  const bool rwa = model == HamiltonianModel::rwa;
  const double rabi = detail::max_rabi_on_grid(sys, field, grid);
  double fastest = std::max({std::abs(sys.omega_g), rabi});
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double w = field.instantaneous_frequency(grid[k]);
    fastest = std::max(fastest, std::abs(sys.detuning(w)));
    fastest = std::max(fastest, rwa ? std::abs(sys.omega_e - w) : std::abs(sys.omega_e));
  }
  if (grid.step * fastest > 0.1 + 1e-12) {
    throw std::invalid_argument("time step violates dt*max(omega_e, Omega_R, |Delta|) <= 0.1 (dt=" +
                                std::to_string(grid.step) + ", max rate=" + std::to_string(fastest) + ")");
  }
}

/// Integrate the two-level Schroedinger equation from t0 to t1.
///
/// `initial` holds the bare-state weights; the system's initial bare phases
/// are applied on top, c(t0) = (w_g exp(-i phi_g), w_e exp(-i phi_e)), and
/// the unwrapped phase series start from phi_x - arg(w_x).
///
/// Hamiltonian (hbar = 1), bare basis:
///   [[omega_g - i gamma_g/2, -dipole E(t)], [-dipole E(t), omega_e - i gamma_e/2]]
template <DrivingField F>
AmplitudeTrajectory integrate_tdse(const TwoLevelSystem& sys, const F& field,
                                   std::array<cplx, 2> initial, double t0, double t1, double dt,
                                   const TdseOptions& options = {}) {
  sys.validate();
  const double weight = std::norm(initial[0]) + std::norm(initial[1]);
  if (!(weight <= 1.0 + 1e-12)) throw std::invalid_argument("initial state norm must be <= 1");
  const UniformGrid grid = UniformGrid::covering(t0, t1, dt);
  const double h = grid.step;
  const bool rwa = options.model == HamiltonianModel::rwa;

  if (options.check_resolution) check_tdse_resolution(sys, field, grid, options.model);

  const cplx diag_g{sys.omega_g, -0.5 * sys.gamma_g};
  const cplx diag_e{sys.omega_e, -0.5 * sys.gamma_e};
  const cplx minus_i{0.0, -1.0};

  auto rhs = [&](double t, const detail::State& y) -> detail::State {
    if (rwa) {
      const cplx coupling = -0.5 * sys.dipole * field.complex_envelope(t) / hbar;
      const cplx de = diag_e - field.instantaneous_frequency(t);
      return {minus_i * (diag_g * y[0] + coupling * y[1]),
              minus_i * (std::conj(coupling) * y[0] + de * y[1])};
    }
    const double coupling = -sys.dipole * field.value(t) / hbar;
    return {minus_i * (diag_g * y[0] + coupling * y[1]),
            minus_i * (coupling * y[0] + diag_e * y[1])};
  };

  // Full model: the bare diagonal is propagated exactly across each step and
  // RK4 handles only the coupling, in the frame of the step's start
  // (integrating-factor RK4). Free evolution and decay carry no truncation
  // error, so long field-free intervals do not accumulate phase drift.
  const cplx eg_half = std::exp(minus_i * diag_g * (0.5 * h));
  const cplx ee_half = std::exp(minus_i * diag_e * (0.5 * h));
  const cplx eg_full = eg_half * eg_half;
  const cplx ee_full = ee_half * ee_half;
  auto lawson_step = [&](double t, const detail::State& y0) -> detail::State {
    // u' = -i V(t+s) [0, e_e(s)/e_g(s); e_g(s)/e_e(s), 0] u, with e_x(s) = exp(-i diag_x s).
    auto f = [&](double s, const cplx& ratio, const detail::State& u) -> detail::State {
      const double coupling = -sys.dipole * field.value(t + s) / hbar;
      return {minus_i * coupling * ratio * u[1], minus_i * coupling / ratio * u[0]};
    };
    const cplx r_half = ee_half / eg_half;
    const cplx r_full = ee_full / eg_full;
    const auto k1 = f(0.0, cplx{1.0, 0.0}, y0);
    const auto k2 = f(0.5 * h, r_half, {y0[0] + 0.5 * h * k1[0], y0[1] + 0.5 * h * k1[1]});
    const auto k3 = f(0.5 * h, r_half, {y0[0] + 0.5 * h * k2[0], y0[1] + 0.5 * h * k2[1]});
    const auto k4 = f(h, r_full, {y0[0] + h * k3[0], y0[1] + h * k3[1]});
    return {eg_full * (y0[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])),
            ee_full * (y0[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]))};
  };

  const cplx cg0 = initial[0] * std::polar(1.0, -sys.phi_g);
  const cplx ce0 = initial[1] * std::polar(1.0, -sys.phi_e);

  AmplitudeTrajectory out;
  out.times = grid.values();
  out.c_g.resize(grid.size());
  out.c_e.resize(grid.size());

  detail::State y{cg0, rwa ? ce0 * std::polar(1.0, field.total_phase(t0)) : ce0};
  std::vector<cplx> rot_e;
  if (rwa) rot_e.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid[k];
    if (!std::isfinite(y[0].real()) || !std::isfinite(y[0].imag()) ||
        !std::isfinite(y[1].real()) || !std::isfinite(y[1].imag())) {
      throw std::runtime_error("non-finite amplitude at t=" + std::to_string(t) +
                               ": integration unstable");
    }
    out.c_g[k] = y[0];
    if (rwa) {
      rot_e[k] = y[1];
      out.c_e[k] = y[1] * std::polar(1.0, -field.total_phase(t));
    } else {
      out.c_e[k] = y[1];
    }
    if (k + 1 == grid.size()) break;
    if (!rwa) {
      y = lawson_step(t, y);
      continue;
    }
    const auto k1 = rhs(t, y);
    detail::State tmp{y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]};
    const auto k2 = rhs(t + 0.5 * h, tmp);
    tmp = {y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]};
    const auto k3 = rhs(t + 0.5 * h, tmp);
    tmp = {y[0] + h * k3[0], y[1] + h * k3[1]};
    const auto k4 = rhs(t + h, tmp);
    y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
    y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
  }

  std::vector<double> state_norm(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) state_norm[k] = std::sqrt(out.norm(k));
  const double seed_g = std::abs(initial[0]) > 0.0 ? sys.phi_g - std::arg(initial[0]) : quiet_nan;
  const double seed_e = std::abs(initial[1]) > 0.0 ? sys.phi_e - std::arg(initial[1]) : quiet_nan;
  out.unwrapped_phase_g = detail::track_phase(out.c_g, state_norm, seed_g, "g");
  if (rwa) {
    // The lab phase is the rotating-frame phase plus the known field phase.
    const double rot_seed = std::isnan(seed_e) ? seed_e : seed_e - field.total_phase(t0);
    out.unwrapped_phase_e = detail::track_phase(rot_e, state_norm, rot_seed, "e");
    for (std::size_t k = 0; k < grid.size(); ++k) {
      out.unwrapped_phase_e[k] += field.total_phase(grid[k]);
    }
  } else {
    out.unwrapped_phase_e = detail::track_phase(out.c_e, state_norm, seed_e, "e");
  }
  return out;
}

/// Multiply c_e by exp(+i Phi_F(t)); c_g is unchanged.
template <DrivingField F>
AmplitudeTrajectory to_rotating_frame(const AmplitudeTrajectory& traj, const F& field) {
  if (traj.frame != Frame::lab) throw std::invalid_argument("trajectory is already in the rotating frame");
  AmplitudeTrajectory out = traj;
  out.frame = Frame::rotating;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double phase = field.total_phase(traj.times[k]);
    out.c_e[k] = traj.c_e[k] * std::polar(1.0, phase);
    out.unwrapped_phase_e[k] = traj.unwrapped_phase_e[k] - phase;
  }
  return out;
}

/// Inverse of to_rotating_frame.
template <DrivingField F>
AmplitudeTrajectory from_rotating_frame(const AmplitudeTrajectory& traj, const F& field) {
  if (traj.frame != Frame::rotating) throw std::invalid_argument("trajectory is not in the rotating frame");
  AmplitudeTrajectory out = traj;
  out.frame = Frame::lab;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double phase = field.total_phase(traj.times[k]);
    out.c_e[k] = traj.c_e[k] * std::polar(1.0, -phase);
    out.unwrapped_phase_e[k] = traj.unwrapped_phase_e[k] + phase;
  }
  return out;
}

/// Unwrapped phase Phi(t) of one amplitude, c = |c| exp(-i Phi). Throws if
/// the amplitude passes below the node threshold anywhere on the series.
inline std::vector<double> extract_amplitude_phase(const AmplitudeTrajectory& traj, Level which) {
  const auto& c = traj.amplitudes(which);
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (std::abs(c[k]) < amplitude_node_threshold) {
      throw std::domain_error("amplitude modulus below node threshold at t=" +
                              std::to_string(traj.times[k]) + ": phase undefined");
    }
  }
  return traj.phases(which);
}

/// Excited population of an undamped resonantly driven system in the RWA,
/// starting from the ground state.
inline double analytic_rabi_population(double omega_rabi, double detuning, double t) {
  const double gen = std::hypot(omega_rabi, detuning);
  if (gen == 0.0) return 0.0;
  const double s = std::sin(0.5 * gen * t);
  return omega_rabi * omega_rabi / (gen * gen) * s * s;
}

/// Excited population after two ideal pi/2 pulses separated by free
/// evolution T, the second pulse carrying an extra field phase dphi.
/// Detuning is atom minus carrier.
inline double analytic_ramsey_population(double detuning, double delay, double relative_phase) {
  const double c = std::cos(0.5 * (detuning * delay - relative_phase));
  return c * c;
}

}  // namespace mphase
