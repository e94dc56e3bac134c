#pragma once

// Field-dressed states of the two-level system and the phases carried by
// their real and virtual components.
//
// The dressed picture lives in the frame co-rotating with the field phase.
// There the RWA Hamiltonian is the complex-symmetric matrix
//
//   H_rot(t) = [[omega_g - i gamma_g/2, -Omega(t)/2],
//               [-Omega(t)/2, omega_e - omega - phi'(t) - i gamma_e/2]]
//
// whose instantaneous eigenpairs define the ground (G) and excited (E)
// dressed branches. Lab-frame dressed frequencies are omega_G = lambda_G and
// omega_E = lambda_E + omega; the time-dependent part of the field phase
// enters the excited-branch phases explicitly through phi(t) - phi_0.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "mphase/field.hpp"
#include "mphase/numerics.hpp"
#include "mphase/two_level.hpp"

namespace mphase {

/// Two eigenvector overlaps closer than this cannot be told apart.
inline constexpr double branch_overlap_tolerance = 1e-6;

class BranchAmbiguityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DressedFrequencies {
  std::vector<double> times;
  std::vector<cplx> omega_G;
  std::vector<cplx> omega_E;
  std::vector<cplx> detuning_nad;  ///< omega_E - omega_G - omega
  double carrier_frequency = 0.0;
  /// The first sample had both eigenvectors equally close to |g>; the
  /// ground branch was taken as the lower real eigenvalue.
  bool seed_tie_broken = false;

  double step() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
};

struct MixingFunctions {
  std::vector<double> times;
  std::vector<cplx> cos_half;
  std::vector<cplx> sin_half;
};

enum class InitialCondition { ground, excited };

inline std::string to_string(InitialCondition ic) {
  return ic == InitialCondition::ground ? "ground" : "excited";
}

struct DressedPhaseRecord {
  std::vector<double> times;
  std::vector<double> phi_Gr;
  std::vector<double> phi_Gv;
  std::vector<double> phi_Er;
  std::vector<double> phi_Ev;
  std::vector<double> phi_nad;
  std::vector<double> phi_F;
  /// int Im(omega_X) dt: log of the amplitude decay carried by each branch.
  std::vector<double> log_amplitude_G;
  std::vector<double> log_amplitude_E;
  InitialCondition initial_condition = InitialCondition::ground;

  const std::vector<double>& component(std::size_t row) const {
    switch (row) {
      case 0: return phi_Gr;
      case 1: return phi_Gv;
      case 2: return phi_Er;
      default: return phi_Ev;
    }
  }
};

namespace detail {

struct Sym2 {
  cplx a, b, d;  // [[a, b], [b, d]]
};

inline Sym2 rotating_hamiltonian(const TwoLevelSystem& sys, const PulsedField& field, double t) {
  const double rabi = sys.dipole * field.envelope(t) / hbar;
  return {cplx{sys.omega_g, -0.5 * sys.gamma_g}, cplx{-0.5 * rabi, 0.0},
          cplx{sys.omega_e - field.carrier_frequency - field.phase_rate(t), -0.5 * sys.gamma_e}};
}

inline std::array<cplx, 2> eigenvalues(const Sym2& h) {
  const cplx mean = 0.5 * (h.a + h.d);
  const cplx half = 0.5 * (h.a - h.d);
  const cplx q = std::sqrt(half * half + h.b * h.b);
  return {mean - q, mean + q};
}

/// Right eigenvector for eigenvalue lambda, normalised so that v^T v = 1.
inline std::array<cplx, 2> eigenvector(const Sym2& h, cplx lambda) {
  std::array<cplx, 2> v;
  if (h.b == cplx{0.0, 0.0}) {
    v = std::abs(lambda - h.a) <= std::abs(lambda - h.d) ? std::array<cplx, 2>{1.0, 0.0}
                                                           : std::array<cplx, 2>{0.0, 1.0};
  } else {
    const std::array<cplx, 2> first{h.b, lambda - h.a};
    const std::array<cplx, 2> second{lambda - h.d, h.b};
    const double n1 = std::norm(first[0]) + std::norm(first[1]);
    const double n2 = std::norm(second[0]) + std::norm(second[1]);
    v = n1 >= n2 ? first : second;
  }
  const cplx bilinear = v[0] * v[0] + v[1] * v[1];
  if (std::abs(bilinear) < 1e-14 * (std::norm(v[0]) + std::norm(v[1]))) {
    throw BranchAmbiguityError("eigenvector is self-orthogonal: exceptional point of the dressed Hamiltonian");
  }
  const cplx s = std::sqrt(bilinear);
  return {v[0] / s, v[1] / s};
}

inline double overlap(const std::array<cplx, 2>& u, const std::array<cplx, 2>& v) {
  const double nu = std::sqrt(std::norm(u[0]) + std::norm(u[1]));
  const double nv = std::sqrt(std::norm(v[0]) + std::norm(v[1]));
  return std::abs(std::conj(u[0]) * v[0] + std::conj(u[1]) * v[1]) / (nu * nv);
}

inline void check_grid(const std::vector<double>& times, const PulsedField& field) {
  if (times.size() < 3) throw std::invalid_argument("dressed-state grid needs at least 3 samples");
  if (times.front() != 0.0) throw std::invalid_argument("dressed-state grid must start at t = 0");
  const double h = times[1] - times[0];
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (std::abs((times[k] - times[k - 1]) - h) > 1e-9 * std::max(1.0, std::abs(times[k]))) {
      throw std::invalid_argument("dressed-state grid must be uniform");
    }
  }
  const double scale = field.envelope.variation_timescale();
  if (h > scale / 20.0) {
    throw std::invalid_argument("time grid must resolve the envelope with >= 20 samples per variation time (dt=" +
                                std::to_string(h) + ", limit=" + std::to_string(scale / 20.0) + ")");
  }
}

/// Tracked ground-branch eigenpairs along the grid.
struct TrackedBranches {
  std::vector<cplx> lambda_G, lambda_E;
  std::vector<std::array<cplx, 2>> vec_G;
  bool seed_tie_broken = false;
};

inline TrackedBranches track_branches(const TwoLevelSystem& sys, const PulsedField& field,
                                      const std::vector<double>& times) {
  TrackedBranches out;
  out.lambda_G.reserve(times.size());
  out.lambda_E.reserve(times.size());
  out.vec_G.reserve(times.size());
  std::array<cplx, 2> prev{};
  for (std::size_t k = 0; k < times.size(); ++k) {
    const Sym2 h = rotating_hamiltonian(sys, field, times[k]);
    const auto lam = eigenvalues(h);
    std::array<std::array<cplx, 2>, 2> vec;
    if (lam[0] == lam[1]) {
      vec = {std::array<cplx, 2>{1.0, 0.0}, std::array<cplx, 2>{0.0, 1.0}};
    } else {
      vec = {eigenvector(h, lam[0]), eigenvector(h, lam[1])};
    }
    const std::array<cplx, 2> reference = k == 0 ? std::array<cplx, 2>{1.0, 0.0} : prev;
    const double o0 = overlap(reference, vec[0]);
    const double o1 = overlap(reference, vec[1]);
    std::size_t g = o0 >= o1 ? 0 : 1;
    if (std::abs(o0 - o1) < branch_overlap_tolerance) {
      if (k != 0) {
        throw BranchAmbiguityError("dressed branches cannot be told apart at t=" +
                                   std::to_string(times[k]) + " (degenerate crossing)");
      }
      g = lam[0].real() <= lam[1].real() ? 0 : 1;
      out.seed_tie_broken = true;
    }
    auto v = vec[g];
    // Sign continuity: cos_half starts with a positive real part.
    const cplx orient = k == 0 ? v[0] : std::conj(prev[0]) * v[0] + std::conj(prev[1]) * v[1];
    if (orient.real() < 0.0) v = {-v[0], -v[1]};
    out.lambda_G.push_back(lam[g]);
    out.lambda_E.push_back(lam[1 - g]);
    out.vec_G.push_back(v);
    prev = v;
  }
  return out;
}

}  // namespace detail

/// Instantaneous dressed frequencies along `times` (uniform, starting at 0),
/// branches labelled by continuation of maximal eigenvector overlap from the
/// first sample.
inline DressedFrequencies instantaneous_dressed_frequencies(const TwoLevelSystem& sys,
                                                            const PulsedField& field,
                                                            const std::vector<double>& times) {
  sys.validate();
  detail::check_grid(times, field);
  const auto tracked = detail::track_branches(sys, field, times);
  DressedFrequencies out;
  out.times = times;
  out.carrier_frequency = field.carrier_frequency;
  out.seed_tie_broken = tracked.seed_tie_broken;
  out.omega_G = tracked.lambda_G;
  out.omega_E.resize(times.size());
  out.detuning_nad.resize(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    out.omega_E[k] = tracked.lambda_E[k] + field.carrier_frequency;
    out.detuning_nad[k] = tracked.lambda_E[k] - tracked.lambda_G[k];
  }
  return out;
}

/// Largest step-to-step change of either dressed frequency.
inline double max_branch_jump(const DressedFrequencies& f) {
  double m = 0.0;
  for (std::size_t k = 1; k < f.times.size(); ++k) {
    m = std::max({m, std::abs(f.omega_G[k] - f.omega_G[k - 1]), std::abs(f.omega_E[k] - f.omega_E[k - 1])});
  }
  return m;
}

/// Mixing amplitudes COS(theta/2), SIN(theta/2): the components of the
/// ground-branch eigenvector, normalised so that cos^2 + sin^2 = 1 (complex).
inline MixingFunctions mixing_functions(const DressedFrequencies& freqs, const TwoLevelSystem& sys,
                                        const PulsedField& field) {
  if (field.carrier_frequency != freqs.carrier_frequency) {
    throw std::invalid_argument("mixing_functions: field does not match the dressed frequencies");
  }
  MixingFunctions out;
  out.times = freqs.times;
  out.cos_half.resize(freqs.times.size());
  out.sin_half.resize(freqs.times.size());
  std::array<cplx, 2> prev{};
  for (std::size_t k = 0; k < freqs.times.size(); ++k) {
    const auto h = detail::rotating_hamiltonian(sys, field, freqs.times[k]);
    const auto lam = detail::eigenvalues(h);
    std::array<cplx, 2> v;
    if (lam[0] == lam[1]) {
      v = {1.0, 0.0};
    } else {
      v = detail::eigenvector(h, freqs.omega_G[k]);
    }
    const cplx orient = k == 0 ? v[0] : std::conj(prev[0]) * v[0] + std::conj(prev[1]) * v[1];
    if (orient.real() < 0.0) v = {-v[0], -v[1]};
    out.cos_half[k] = v[0];
    out.sin_half[k] = v[1];
    prev = v;
  }
  return out;
}

/// Running nonadiabatic phase int_0^t Re(omega_E - omega_G - omega) dt'.
inline std::vector<double> nonadiabatic_phase_series(const DressedFrequencies& freqs) {
  std::vector<double> re(freqs.times.size());
  for (std::size_t k = 0; k < re.size(); ++k) re[k] = freqs.detuning_nad[k].real();
  return cumulative_simpson(re, freqs.step());
}

/// Nonadiabatic phase at grid time t (t must lie on the grid).
inline double nonadiabatic_phase(const DressedFrequencies& freqs, double t) {
  const double h = freqs.step();
  const double idx = (t - freqs.times.front()) / h;
  const auto k = static_cast<std::size_t>(std::llround(idx));
  if (std::abs(idx - static_cast<double>(k)) > 1e-6 || k >= freqs.times.size()) {
    throw std::invalid_argument("nonadiabatic_phase: t is not a grid time");
  }
  return nonadiabatic_phase_series(freqs)[k];
}

/// Phases of the four dressed-state components.
///
/// Ground initial condition:
///   Phi_Gr = phi_g + int omega_G
///   Phi_Gv = phi_g + phi(t) + int (omega_G + omega)
///   Phi_Er = phi_g + phi(t) + int omega_E
///   Phi_Ev = phi_g + int (omega_E - omega)
/// Excited initial condition:
///   Phi_Er = phi_e + phi(t) - phi_0 + int omega_E
///   Phi_Ev = phi_e - phi_0 + int (omega_E - omega)
///   Phi_Gr = phi_e - phi_0 + int omega_G
///   Phi_Gv = phi_e + phi(t) - phi_0 + int (omega_G + omega)
///
/// Each component is integrated in its own closed form, so the chaining
/// relations through Phi_F and Phi_NAD are a check on the bookkeeping rather
/// than true by construction. Only real parts enter phases; imaginary parts
/// go to the log-amplitude series.
inline DressedPhaseRecord accumulate_dressed_phases(const DressedFrequencies& freqs,
                                                    const PulsedField& field,
                                                    const TwoLevelSystem& sys,
                                                    InitialCondition ic) {
  const std::size_t n = freqs.times.size();
  const double h = freqs.step();
  const double w = field.carrier_frequency;
  std::vector<double> g(n), e(n), g_up(n), e_down(n), nad(n), im_g(n), im_e(n);
  for (std::size_t k = 0; k < n; ++k) {
    g[k] = freqs.omega_G[k].real();
    e[k] = freqs.omega_E[k].real();
    g_up[k] = g[k] + w;
    e_down[k] = e[k] - w;
    nad[k] = freqs.detuning_nad[k].real();
    im_g[k] = freqs.omega_G[k].imag();
    im_e[k] = freqs.omega_E[k].imag();
  }
  const auto int_g = cumulative_simpson(g, h);
  const auto int_e = cumulative_simpson(e, h);
  const auto int_g_up = cumulative_simpson(g_up, h);
  const auto int_e_down = cumulative_simpson(e_down, h);

  DressedPhaseRecord r;
  r.times = freqs.times;
  r.initial_condition = ic;
  r.phi_nad = cumulative_simpson(nad, h);
  r.log_amplitude_G = cumulative_simpson(im_g, h);
  r.log_amplitude_E = cumulative_simpson(im_e, h);
  r.phi_Gr.resize(n);
  r.phi_Gv.resize(n);
  r.phi_Er.resize(n);
  r.phi_Ev.resize(n);
  r.phi_F.resize(n);
  const double phi0 = field.phase(0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = freqs.times[k];
    const double phi_t = field.phase(t);
    r.phi_F[k] = field.total_phase(t);
    if (ic == InitialCondition::ground) {
      r.phi_Gr[k] = sys.phi_g + int_g[k];
      r.phi_Gv[k] = sys.phi_g + phi_t + int_g_up[k];
      r.phi_Er[k] = sys.phi_g + phi_t + int_e[k];
      r.phi_Ev[k] = sys.phi_g + int_e_down[k];
    } else {
      r.phi_Er[k] = sys.phi_e + (phi_t - phi0) + int_e[k];
      r.phi_Ev[k] = sys.phi_e - phi0 + int_e_down[k];
      r.phi_Gr[k] = sys.phi_e - phi0 + int_g[k];
      r.phi_Gv[k] = sys.phi_e + (phi_t - phi0) + int_g_up[k];
    }
  }
  return r;
}

/// Largest violation of the component-phase chaining relations on the grid.
inline double max_chain_violation(const DressedPhaseRecord& r) {
  double m = 0.0;
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    if (r.initial_condition == InitialCondition::ground) {
      m = std::max({m, std::abs(r.phi_Gv[k] - (r.phi_Gr[k] + r.phi_F[k])),
                    std::abs(r.phi_Er[k] - (r.phi_Gv[k] + r.phi_nad[k])),
                    std::abs(r.phi_Ev[k] - (r.phi_Er[k] - r.phi_F[k]))});
    } else {
      m = std::max({m, std::abs(r.phi_Ev[k] - (r.phi_Er[k] - r.phi_F[k])),
                    std::abs(r.phi_Gr[k] - (r.phi_Er[k] - r.phi_F[k] - r.phi_nad[k])),
                    std::abs(r.phi_Gv[k] - (r.phi_Gr[k] + r.phi_F[k]))});
    }
  }
  return m;
}

/// d Phi_X / d phi_g and d Phi_X / d phi_e at grid index `probe`, by central
/// differences. Rows: Phi_Gr, Phi_Gv, Phi_Er, Phi_Ev.
template <typename Builder>
std::array<std::array<double, 2>, 4> phase_sensitivity_matrix(Builder&& build,
                                                              const TwoLevelSystem& sys,
                                                              const PulsedField& field,
                                                              std::size_t probe,
                                                              double delta = 1e-5) {
  std::array<std::array<double, 2>, 4> m{};
  for (std::size_t col = 0; col < 2; ++col) {
    TwoLevelSystem plus = sys;
    TwoLevelSystem minus = sys;
    (col == 0 ? plus.phi_g : plus.phi_e) += delta;
    (col == 0 ? minus.phi_g : minus.phi_e) -= delta;
    const DressedPhaseRecord rp = build(plus, field);
    const DressedPhaseRecord rm = build(minus, field);
    if (probe >= rp.times.size()) throw std::out_of_range("sensitivity probe index outside the grid");
    for (std::size_t row = 0; row < 4; ++row) {
      m[row][col] = (rp.component(row)[probe] - rm.component(row)[probe]) / (2.0 * delta);
    }
  }
  return m;
}

/// Lab-frame bare amplitudes (c_g, c_e) of the populated dressed branch at
/// grid index k:
///   ground IC:  |G> = COS |g> e^{-i Phi_Gr} + SIN |e> e^{-i Phi_Gv}
///   excited IC: |E> = -SIN |g> e^{-i Phi_Ev} + COS |e> e^{-i Phi_Er}
/// scaled by the branch's accumulated decay.
inline std::array<cplx, 2> assemble_dressed_state(const MixingFunctions& mixing,
                                                  const DressedPhaseRecord& record, std::size_t k) {
  if (mixing.times.size() != record.times.size()) {
    throw std::invalid_argument("assemble_dressed_state: mixing and record grids differ");
  }
  if (k >= record.times.size()) throw std::out_of_range("assemble_dressed_state: index outside the grid");
  const cplx c = mixing.cos_half[k];
  const cplx s = mixing.sin_half[k];
  if (record.initial_condition == InitialCondition::ground) {
    const double decay = std::exp(record.log_amplitude_G[k]);
    return {decay * c * std::polar(1.0, -record.phi_Gr[k]), decay * s * std::polar(1.0, -record.phi_Gv[k])};
  }
  const double decay = std::exp(record.log_amplitude_E[k]);
  return {-decay * s * std::polar(1.0, -record.phi_Ev[k]), decay * c * std::polar(1.0, -record.phi_Er[k])};
}

}  // namespace mphase
