#pragma once

// Virtual interferometers: Ramsey fringes from two phase-locked pulses, a
// pump-pump interferogram of harmonic wave packets, and the free-space double
// slit built from two displaced Gaussian packets.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mphase/field.hpp"
#include "mphase/fringe.hpp"
#include "mphase/hydrodynamics.hpp"
#include "mphase/numerics.hpp"
#include "mphase/two_level.hpp"

namespace mphase {

// ---------------------------------------------------------------- Ramsey

enum class RamseyMode { analytic, tdse };

inline std::string to_string(RamseyMode m) { return m == RamseyMode::analytic ? "analytic" : "tdse"; }

/// Two identical Gaussian pi/2 pulses. The first is centred at 4 tau, the
/// second `delay` later and carrying the extra phase relative_phase.
struct RamseyPulseSpec {
  double carrier_frequency = 0.0;
  double rabi_frequency = 0.0;  ///< peak Rabi frequency of each pulse
  double dt = 1e-3;
  HamiltonianModel model = HamiltonianModel::full;

  /// Gaussian width giving each pulse an area of pi/2.
  double tau() const { return std::sqrt(pi) / (2.0 * rabi_frequency); }
  double support() const { return 8.0 * tau(); }
};

struct RamseyScan {
  std::vector<double> delays;
  std::vector<double> relative_phases;
  /// populations[i][j]: P_e after the second pulse for delays[i], relative_phases[j].
  std::vector<std::vector<double>> populations;
  RamseyMode mode = RamseyMode::analytic;
  double detuning = 0.0;
};

inline PulseSequence ramsey_sequence(const TwoLevelSystem& sys, const RamseyPulseSpec& spec, double delay,
                                     double relative_phase) {
  const double tau = spec.tau();
  const double amplitude = spec.rabi_frequency * hbar / sys.dipole;
  PulsedField first;
  first.envelope = Envelope::gaussian(amplitude, tau, 4.0 * tau);
  first.carrier_frequency = spec.carrier_frequency;
  PulsedField second = first;
  second.envelope.center += delay;
  second.cep = relative_phase;
  return PulseSequence{{first, second}};
}

/// Excited-state population after the second pulse, from the ground state.
inline double ramsey_population_tdse(const TwoLevelSystem& sys, const RamseyPulseSpec& spec, double delay,
                                     double relative_phase) {
  const auto seq = ramsey_sequence(sys, spec, delay, relative_phase);
  const double t_end = seq.lobes[1].envelope.support().second;
  const auto traj = integrate_tdse(sys, seq, {1.0, 0.0}, 0.0, t_end, spec.dt, {spec.model});
  return traj.population_e(traj.size() - 1);
}

inline RamseyScan run_ramsey_scan(const TwoLevelSystem& sys, const RamseyPulseSpec& spec,
                                  const std::vector<double>& delays, const std::vector<double>& relative_phases,
                                  RamseyMode mode) {
  sys.validate();
  if (!(spec.rabi_frequency > 0.0)) throw std::invalid_argument("Ramsey pulses need rabi_frequency > 0");
  for (double T : delays) {
    if (!(T > spec.support())) {
      throw std::invalid_argument("Ramsey pulses overlap: delay " + std::to_string(T) +
                                  " must exceed the pulse support " + std::to_string(spec.support()));
    }
  }
  RamseyScan scan;
  scan.delays = delays;
  scan.relative_phases = relative_phases;
  scan.mode = mode;
  scan.detuning = sys.detuning(spec.carrier_frequency);
  scan.populations.assign(delays.size(), std::vector<double>(relative_phases.size()));
  for (std::size_t i = 0; i < delays.size(); ++i) {
    for (std::size_t j = 0; j < relative_phases.size(); ++j) {
      const double p = mode == RamseyMode::analytic
                           ? analytic_ramsey_population(scan.detuning, delays[i], relative_phases[j])
                           : ramsey_population_tdse(sys, spec, delays[i], relative_phases[j]);
      scan.populations[i][j] = std::clamp(p, 0.0, 1.0);
    }
  }
  return scan;
}

struct RamseyFringes {
  std::vector<FringeFit> fits;  ///< one fit over the delays per relative phase
  /// Fringe offset in relative-phase units, referenced to the first column:
  /// offsets[j] - relative_phases[0] should equal relative_phases[j] - relative_phases[0].
  std::vector<double> offsets;
};

/// Fit P_e(T) for each relative phase; P_e = [1 + cos(Delta T - dphi)] / 2,
/// so the fitted phase moves by -sign(Delta) dphi.
inline RamseyFringes ramsey_fringe_offsets(const RamseyScan& scan, const FringeFitOptions& opt = {}) {
  if (scan.detuning == 0.0) throw std::invalid_argument("Ramsey fringes in the delay need a nonzero detuning");
  RamseyFringes out;
  std::vector<double> column(scan.delays.size());
  for (std::size_t j = 0; j < scan.relative_phases.size(); ++j) {
    for (std::size_t i = 0; i < scan.delays.size(); ++i) column[i] = scan.populations[i][j];
    out.fits.push_back(fringe_analysis(scan.delays, column, opt));
  }
  const double sign = scan.detuning > 0.0 ? 1.0 : -1.0;
  for (std::size_t j = 0; j < out.fits.size(); ++j) {
    double shift = sign * wrap_angle(out.fits[0].phase - out.fits[j].phase);
    // Choose the branch closest to the applied phase difference.
    const double applied = scan.relative_phases[j] - scan.relative_phases[0];
    shift += two_pi * std::round((applied - shift) / two_pi);
    out.offsets.push_back(scan.relative_phases[0] + shift);
  }
  return out;
}

// ---------------------------------------------------------------- harmonic interferogram

/// Oscillator eigenfunctions phi_0..phi_{count-1} on the grid.
inline std::vector<std::vector<double>> harmonic_eigenstates(const SpatialGrid& grid, double mass, double omega0,
                                                             std::size_t count) {
  const double a = std::sqrt(mass * omega0 / hbar);
  std::vector<std::vector<double>> phi(count, std::vector<double>(grid.count));
  for (std::size_t k = 0; k < grid.count; ++k) {
    const double xi = a * grid[k];
    double prev = 0.0;
    double cur = std::pow(a * a / pi, 0.25) * std::exp(-0.5 * xi * xi);
    for (std::size_t n = 0; n < count; ++n) {
      phi[n][k] = cur;
      const double next = std::sqrt(2.0 / static_cast<double>(n + 1)) * xi * cur -
                          std::sqrt(static_cast<double>(n) / static_cast<double>(n + 1)) * prev;
      prev = cur;
      cur = next;
    }
  }
  return phi;
}

struct InterferogramSpec {
  double omega0 = 1.0;
  double mass = 1.0;
  SpatialGrid grid = SpatialGrid::centered(20.0, 256);
  /// Packet created by each pump, as amplitudes on the lowest levels.
  std::vector<cplx> coefficients;
  double relative_phase = 0.0;  ///< delta, carried by the second packet
  double window_lo = 0.0;       ///< probe window
  double window_hi = 0.0;
};

struct Interferogram {
  std::vector<double> delays;
  std::vector<double> signal;
  double period = 0.0;
};

/// signal(tau) = int_window |psi_p(tau) + e^{i delta} psi_p(0)|^2 dx, where
/// psi_p(tau) = sum_n c_n exp(-i n omega0 tau) phi_n: the first packet has
/// evolved for the pump delay tau, with eigenphases counted from the ground
/// level to which both pumps are phase-locked.
inline Interferogram run_wavepacket_interferogram(const InterferogramSpec& spec, const std::vector<double>& delays) {
  const std::size_t levels = spec.coefficients.size();
  if (levels == 0) throw std::invalid_argument("interferogram needs at least one packet coefficient");
  if (!(spec.omega0 > 0.0) || !(spec.mass > 0.0)) throw std::invalid_argument("interferogram needs omega0, mass > 0");
  if (!(spec.window_hi > spec.window_lo)) throw std::invalid_argument("probe window must have hi > lo");
  const SpatialGrid& g = spec.grid;
  const double top = static_cast<double>(2 * levels - 1);
  const double turning = std::sqrt(top * hbar / (spec.mass * spec.omega0));
  const double k_local = std::sqrt(top * spec.mass * spec.omega0 / hbar);
  const auto phi = harmonic_eigenstates(g, spec.mass, spec.omega0, levels);
  double norm_top = 0.0;
  for (double v : phi.back()) norm_top += v * v * g.dx;
  if (g.dx * k_local > 0.5 * pi || turning + 4.0 * std::sqrt(hbar / (spec.mass * spec.omega0)) > 0.5 * g.length() ||
      std::abs(norm_top - 1.0) > 1e-8) {
    throw std::invalid_argument("level n=" + std::to_string(levels - 1) +
                                " is not supported by the grid (extent or resolution too small)");
  }

  std::vector<cplx> reference(g.count);
  for (std::size_t n = 0; n < levels; ++n) {
    for (std::size_t k = 0; k < g.count; ++k) reference[k] += spec.coefficients[n] * phi[n][k];
  }
  const cplx shift = std::polar(1.0, spec.relative_phase);
  Interferogram out;
  out.delays = delays;
  out.period = two_pi / spec.omega0;
  out.signal.reserve(delays.size());
  std::vector<cplx> coeff(levels);
  for (double tau : delays) {
    for (std::size_t n = 0; n < levels; ++n) {
      coeff[n] = spec.coefficients[n] * std::polar(1.0, -static_cast<double>(n) * spec.omega0 * tau);
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < g.count; ++k) {
      const double x = g[k];
      if (x < spec.window_lo || x > spec.window_hi) continue;
      cplx psi = shift * reference[k];
      for (std::size_t n = 0; n < levels; ++n) psi += coeff[n] * phi[n][k];
      acc += std::norm(psi);
    }
    out.signal.push_back(acc * g.dx);
  }
  return out;
}

// ---------------------------------------------------------------- double slit

/// Two Gaussian packets of width sigma centred at -d/2 (left) and +d/2
/// (right). The left packet carries the constant phase alpha and the
/// momentum kick p_kick.
struct DoubleSlitConfig {
  double separation = 10.0;
  double sigma = 1.0;
  double alpha = 0.0;
  double p_kick = 0.0;
  double time = 30.0;
  double mass = 1.0;
  double length = 256.0;
  std::size_t points = 1024;
  std::size_t steps = 1;
  std::size_t trajectories = 0;
  std::uint64_t seed = 0;

  double fringe_spacing() const { return two_pi * hbar * time / (mass * separation); }

  /// Width sigma(t) of each freely spread branch.
  double spread_width() const {
    const double r = time / spreading_time(sigma, mass);
    return sigma * std::sqrt(1.0 + r * r);
  }

  void validate() const {
    if (!(sigma > 0.0) || !(mass > 0.0) || !(time > 0.0) || !(length > 0.0)) {
      throw std::invalid_argument("double slit needs sigma, mass, time, length > 0");
    }
    if (!(separation > 4.0 * sigma)) {
      throw std::invalid_argument("slits not resolvable: requires d > 4 sigma (d=" + std::to_string(separation) +
                                  ", sigma=" + std::to_string(sigma) + ")");
    }
    if (steps == 0) throw std::invalid_argument("double slit needs steps >= 1");
    const double dx = length / static_cast<double>(points);
    if (fringe_spacing() < 8.0 * dx) {
      throw std::invalid_argument("fringes under-resolved: spacing " + std::to_string(fringe_spacing()) +
                                  " needs >= 8 samples of dx=" + std::to_string(dx));
    }
    if (4.0 * spread_width() < 3.0 * fringe_spacing()) {
      throw std::invalid_argument("packet overlap of width 4 sigma(t)=" + std::to_string(4.0 * spread_width()) +
                                  " holds fewer than 3 fringes of spacing " + std::to_string(fringe_spacing()));
    }
  }
};

struct DoubleSlitResult {
  std::vector<double> x;
  std::vector<double> density;
  /// |psi_L|^2 + |psi_R|^2: the pattern without interference.
  std::vector<double> background;
  FringeFit fit;
  double expected_spacing = 0.0;
  double fit_lo = 0.0;
  double fit_hi = 0.0;
  double edge_probability = 0.0;
  std::optional<TrajectoryEnsemble> trajectories;
};

inline std::pair<Wavefunction1D, Wavefunction1D> double_slit_branches(const DoubleSlitConfig& c,
                                                                      const SpatialGrid& grid) {
  auto left = gaussian_packet(grid, c.mass, -0.5 * c.separation, c.sigma, c.p_kick / hbar, c.alpha);
  auto right = gaussian_packet(grid, c.mass, 0.5 * c.separation, c.sigma);
  return {std::move(left), std::move(right)};
}

/// Propagate the two-branch superposition freely and fit the fringes of the
/// density divided by the interference-free background, over (just over) the
/// largest whole number of expected fringe periods inside +-2 sigma(t).
inline DoubleSlitResult run_double_slit(const DoubleSlitConfig& c, const FringeFitOptions& opt = {}) {
  c.validate();
  const auto grid = SpatialGrid::centered(c.length, c.points);
  auto [left, right] = double_slit_branches(c, grid);
  const double dt = c.time / static_cast<double>(c.steps);
  const auto sup = superpose({{1.0, left}, {1.0, right}});

  const std::size_t stride = c.trajectories > 0 ? 1 : c.steps;
  const auto frames = propagate(sup.state, PotentialSpec::free(), dt, c.steps, stride);
  const auto& final_state = frames.back();
  const auto left_t = propagate(left, PotentialSpec::free(), c.time, 1).back();
  const auto right_t = propagate(right, PotentialSpec::free(), c.time, 1).back();

  DoubleSlitResult out;
  out.expected_spacing = c.fringe_spacing();
  out.edge_probability = edge_probability(final_state, 0.05 * c.length);
  out.x.resize(grid.count);
  out.density = final_state.density();
  out.background.resize(grid.count);
  for (std::size_t k = 0; k < grid.count; ++k) {
    out.x[k] = grid[k];
    // Same normalisation as the superposition before it was renormalised.
    out.background[k] = (std::norm(left_t.values[k]) + std::norm(right_t.values[k])) / sup.norm_before;
  }

  const double sigma_t = c.spread_width();
  const double periods = std::floor(4.0 * sigma_t / out.expected_spacing);
  // Slightly more than whole periods: the finite-time spacing exceeds the
  // asymptotic one by a fraction of a percent.
  const double half = 0.5 * std::min(1.02 * std::max(periods, 1.0) * out.expected_spacing, 4.0 * sigma_t);
  out.fit_lo = -half;
  out.fit_hi = half;
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < grid.count; ++k) {
    if (grid[k] < out.fit_lo || grid[k] > out.fit_hi) continue;
    xs.push_back(grid[k]);
    ys.push_back(out.density[k] / out.background[k]);
  }
  out.fit = fringe_analysis(xs, ys, opt);

  if (c.trajectories > 0) {
    std::vector<MadelungFields> fields;
    fields.reserve(frames.size());
    for (const auto& f : frames) fields.push_back(polar_decompose(f));
    out.trajectories = integrate_trajectories(fields, c.trajectories, c.seed);
  }
  return out;
}

}  // namespace mphase
