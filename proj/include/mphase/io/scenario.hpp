#pragma once

// Scenario dispatch: run a validated config, write its datasets and finish
// with exactly one manifest.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mphase/io/config.hpp"
#include "mphase/io/emit.hpp"

#ifndef MPHASE_VERSION
#define MPHASE_VERSION "0.0.0"
#endif

namespace mphase::io {

inline constexpr const char* output_dir_env = "MPHASE_OUTPUT_DIR";

/// Failure inside a module while running a valid config. Maps to exit code 1.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunManifest {
  std::string scenario;
  std::string version = MPHASE_VERSION;
  std::uint64_t seed = 0;
  nlohmann::json config;
  double wall_clock_seconds = 0.0;
  std::vector<std::string> outputs;  ///< file names relative to the output directory
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["scenario"] = scenario;
    j["version"] = version;
    j["seed"] = seed;
    j["config"] = config;
    j["wall_clock_seconds"] = wall_clock_seconds;
    j["outputs"] = outputs;
    j["summary"] = summary;
    return j;
  }
};

/// Explicit directory if given, else $MPHASE_OUTPUT_DIR, else the working
/// directory.
inline std::filesystem::path resolve_output_dir(const std::optional<std::string>& explicit_dir) {
  if (explicit_dir && !explicit_dir->empty()) return *explicit_dir;
  if (const char* env = std::getenv(output_dir_env); env && *env) return env;
  return ".";
}

namespace detail {

class Writer {
 public:
  Writer(const ScenarioConfig& cfg, std::filesystem::path dir, RunManifest& manifest)
      : cfg_(cfg), dir_(std::move(dir)), manifest_(manifest) {}

  void emit(const std::string& name, const Dataset& d) { emit(name, d, cfg_.output.format); }

  void emit(const std::string& name, const Dataset& d, OutputFormat format) {
    const std::string file = cfg_.output.prefix + "_" + name + extension(format);
    emit_series(d, format, dir_ / file);
    manifest_.outputs.push_back(file);
  }

  Dataset scan(std::vector<std::string> columns) const {
    Dataset d(std::move(columns));
    d.metadata.push_back({"scenario", cfg_.scenario});
    d.metadata.push_back({"seed", std::to_string(cfg_.seed)});
    return d;
  }

 private:
  const ScenarioConfig& cfg_;
  std::filesystem::path dir_;
  RunManifest& manifest_;
};

inline Dataset fringe_table(const std::vector<FringeFit>& fits, const std::vector<double>& keys,
                            const std::string& key_name) {
  Dataset d({key_name, "offset", "amplitude", "wavenumber", "phase", "period", "visibility", "residual",
             "iterations", "converged"});
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    d.add_row({keys[i], f.offset, f.amplitude, f.wavenumber, f.phase, f.period, f.visibility, f.residual,
               static_cast<double>(f.iterations), f.converged ? 1.0 : 0.0});
  }
  return d;
}

inline void run(const RabiParams& p, Writer& out, RunManifest& m) {
  const auto traj = integrate_tdse(p.system, p.field, p.initial, p.t_start, p.t_final, p.dt, {p.model});
  Dataset d({"t", "re_cg", "im_cg", "re_ce", "im_ce", "P_g", "P_e", "norm", "Phi_g", "Phi_e"});
  double max_pe = 0.0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    max_pe = std::max(max_pe, traj.population_e(k));
    if (k % p.sample_every != 0 && k + 1 != traj.size()) continue;
    d.add_row({traj.times[k], traj.c_g[k].real(), traj.c_g[k].imag(), traj.c_e[k].real(), traj.c_e[k].imag(),
               traj.population_g(k), traj.population_e(k), traj.norm(k), traj.unwrapped_phase_g[k],
               traj.unwrapped_phase_e[k]});
  }
  out.emit("trajectory", d);
  const std::size_t last = traj.size() - 1;
  m.summary["max_population_e"] = max_pe;
  m.summary["final_population_e"] = traj.population_e(last);
  m.summary["final_norm"] = traj.norm(last);
  m.summary["final_phase_g"] = traj.unwrapped_phase_g[last];
  m.summary["final_phase_e"] = traj.unwrapped_phase_e[last];
  m.summary["dt"] = traj.times[1] - traj.times[0];
  m.summary["samples"] = traj.size();
  // Closed-form comparison where it applies: constant drive from |g>, no decay.
  if (p.field.envelope.shape == EnvelopeShape::constant && !p.field.is_chirped() && p.system.gamma_g == 0.0 &&
      p.system.gamma_e == 0.0 && p.initial[0] == cplx{1.0, 0.0} && p.initial[1] == cplx{0.0, 0.0}) {
    const double rabi = p.system.dipole * p.field.envelope.amplitude / hbar;
    const double detuning = p.system.detuning(p.field.carrier_frequency);
    double dev = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      dev = std::max(dev, std::abs(traj.population_e(k) -
                                   analytic_rabi_population(rabi, detuning, traj.times[k] - p.t_start)));
    }
    m.summary["max_rabi_oracle_deviation"] = dev;
  }
}

inline void run(const DressedParams& p, Writer& out, RunManifest& m) {
  const auto times = UniformGrid::covering(0.0, p.t_final, p.dt).values();
  const auto freqs = instantaneous_dressed_frequencies(p.system, p.field, times);
  const auto mix = mixing_functions(freqs, p.system, p.field);
  const auto rec = accumulate_dressed_phases(freqs, p.field, p.system, p.initial_condition);
  Dataset f({"t", "re_omega_G", "im_omega_G", "re_omega_E", "im_omega_E", "re_detuning_nad", "im_detuning_nad",
             "re_cos_half", "im_cos_half", "re_sin_half", "im_sin_half"});
  Dataset ph({"t", "Phi_Gr", "Phi_Gv", "Phi_Er", "Phi_Ev", "Phi_NAD", "Phi_F", "log_amplitude_G",
              "log_amplitude_E"});
  for (std::size_t k = 0; k < times.size(); ++k) {
    f.add_row({times[k], freqs.omega_G[k].real(), freqs.omega_G[k].imag(), freqs.omega_E[k].real(),
               freqs.omega_E[k].imag(), freqs.detuning_nad[k].real(), freqs.detuning_nad[k].imag(),
               mix.cos_half[k].real(), mix.cos_half[k].imag(), mix.sin_half[k].real(), mix.sin_half[k].imag()});
    ph.add_row({times[k], rec.phi_Gr[k], rec.phi_Gv[k], rec.phi_Er[k], rec.phi_Ev[k], rec.phi_nad[k], rec.phi_F[k],
                rec.log_amplitude_G[k], rec.log_amplitude_E[k]});
  }
  out.emit("frequencies", f);
  out.emit("phases", ph);
  const std::size_t last = times.size() - 1;
  m.summary["initial_condition"] = to_string(p.initial_condition);
  m.summary["max_chain_violation"] = max_chain_violation(rec);
  m.summary["max_branch_jump"] = max_branch_jump(freqs);
  m.summary["seed_tie_broken"] = freqs.seed_tie_broken;
  m.summary["final_phi_nad"] = rec.phi_nad[last];
  m.summary["final_phi_Gr"] = rec.phi_Gr[last];
  m.summary["final_phi_Er"] = rec.phi_Er[last];
}

inline void run(const RamseyParams& p, Writer& out, RunManifest& m) {
  const auto scan = run_ramsey_scan(p.system, p.pulses, p.delays, p.relative_phases, p.mode);
  std::vector<std::string> cols{"delay"};
  for (double dphi : p.relative_phases) cols.push_back("P_e(dphi=" + format_number(dphi) + ")");
  Dataset d = out.scan(cols);
  d.metadata.push_back({"mode", to_string(p.mode)});
  d.metadata.push_back({"detuning", format_number(scan.detuning)});
  d.metadata.push_back({"carrier_frequency", format_number(p.pulses.carrier_frequency)});
  d.metadata.push_back({"rabi_frequency", format_number(p.pulses.rabi_frequency)});
  for (std::size_t i = 0; i < scan.delays.size(); ++i) {
    std::vector<double> row{scan.delays[i]};
    row.insert(row.end(), scan.populations[i].begin(), scan.populations[i].end());
    d.add_row(std::move(row));
  }
  out.emit("scan", d);
  m.summary["mode"] = to_string(p.mode);
  m.summary["detuning"] = scan.detuning;
  if (p.mode == RamseyMode::tdse) {
    const auto oracle = run_ramsey_scan(p.system, p.pulses, p.delays, p.relative_phases, RamseyMode::analytic);
    double dev = 0.0;
    for (std::size_t i = 0; i < scan.delays.size(); ++i) {
      for (std::size_t j = 0; j < p.relative_phases.size(); ++j) {
        dev = std::max(dev, std::abs(scan.populations[i][j] - oracle.populations[i][j]));
      }
    }
    m.summary["max_oracle_discrepancy"] = dev;
  }
  try {
    const auto fringes = ramsey_fringe_offsets(scan);
    double worst = 0.0;
    for (std::size_t j = 0; j < fringes.offsets.size(); ++j) {
      worst = std::max(worst, std::abs(fringes.offsets[j] - p.relative_phases[j]) / two_pi);
    }
    m.summary["fringe_offsets"] = fringes.offsets;
    m.summary["max_offset_error_periods"] = worst;
    out.emit("fits", fringe_table(fringes.fits, p.relative_phases, "relative_phase"), OutputFormat::json);
  } catch (const std::exception& e) {
    // Too few delays or no detuning: the scan itself is still valid output.
    m.summary["fringe_fit_error"] = e.what();
  }
}

inline Wavefunction1D initial_packet(const PacketParams& p, const WaveNumerics& n) {
  return gaussian_packet(n.grid(), p.mass, p.center, p.sigma, p.k0, p.phase);
}

inline std::string frame_name(std::size_t step) {
  std::string s = std::to_string(step);
  return "frame_" + std::string(s.size() < 6 ? 6 - s.size() : 0, '0') + s;
}

inline Dataset frame_table(const Wavefunction1D& psi, const MadelungFields& f) {
  Dataset d({"x", "re_psi", "im_psi", "R", "S", "U", "v", "mask"});
  for (std::size_t k = 0; k < psi.size(); ++k) {
    d.add_row({psi.grid[k], psi.values[k].real(), psi.values[k].imag(), f.R[k], f.S[k], f.U[k], f.v[k],
               f.node_mask[k] ? 1.0 : 0.0});
  }
  return d;
}

inline void run(const MadelungParams& p, Writer& out, RunManifest& m) {
  const auto& n = p.numerics;
  const double dt = n.dt();
  auto psi = initial_packet(p.packet, n);
  SplitOperatorPropagator prop(psi.grid, psi.mass, p.potential, dt);
  Dataset residuals({"t", "hj_max", "continuity_max"});
  // Rolling window over steps s-2, s-1, s: the middle one gets residuals when
  // it is a saved frame.
  std::optional<MadelungFields> a, b;
  MadelungFields c = polar_decompose(psi);
  out.emit(frame_name(0), frame_table(psi, c));
  double hj_max = 0.0, cont_max = 0.0, edge_max = edge_probability(psi, 0.05 * n.length);
  for (std::size_t s = 1; s <= n.steps; ++s) {
    prop.step(psi);
    a = std::move(b);
    b = std::move(c);
    c = polar_decompose(psi);
    edge_max = std::max(edge_max, edge_probability(psi, 0.05 * n.length));
    if (s % n.stride == 0) out.emit(frame_name(s), frame_table(psi, c));
    if (a && (s - 1) % n.stride == 0) {
      const auto hj = hj_residual(*b, p.potential, action_rate(*a, c, 2.0 * dt));
      const auto cont = continuity_residual(*b, c, dt);
      hj_max = std::max(hj_max, hj.max_norm);
      cont_max = std::max(cont_max, cont.max_norm);
      residuals.add_row({b->time, hj.max_norm, cont.max_norm});
    }
  }
  out.emit("residuals", residuals);
  const auto moments = position_moments(psi);
  m.summary["dt"] = dt;
  m.summary["final_time"] = psi.time;
  m.summary["final_norm"] = psi.norm();
  m.summary["final_mean"] = moments.mean;
  m.summary["final_sigma"] = moments.sigma;
  if (p.potential.kind == PotentialKind::free) {
    const double r = psi.time / spreading_time(p.packet.sigma, p.packet.mass);
    const double expected = p.packet.sigma * std::sqrt(1.0 + r * r);
    m.summary["expected_sigma"] = expected;
    m.summary["sigma_relative_error"] = std::abs(moments.sigma - expected) / expected;
  }
  m.summary["max_hj_residual"] = hj_max;
  m.summary["max_continuity_residual"] = cont_max;
  m.summary["max_edge_probability"] = edge_max;
}

inline Dataset ensemble_table(const TrajectoryEnsemble& ens, std::size_t stride) {
  std::vector<std::string> cols{"t"};
  for (std::size_t i = 0; i < ens.count(); ++i) cols.push_back("x" + std::to_string(i));
  Dataset d(std::move(cols));
  for (std::size_t k = 0; k < ens.times.size(); ++k) {
    if (k % stride != 0 && k + 1 != ens.times.size()) continue;
    std::vector<double> row{ens.times[k]};
    for (std::size_t i = 0; i < ens.count(); ++i) row.push_back(ens.positions[i][k]);
    d.add_row(std::move(row));
  }
  return d;
}

inline void run(const TrajectoriesParams& p, Writer& out, RunManifest& m, std::uint64_t seed) {
  const auto& n = p.numerics;
  const auto states = propagate(initial_packet(p.packet, n), p.potential, n.dt(), n.steps, 1);
  std::vector<MadelungFields> frames;
  frames.reserve(states.size());
  for (const auto& s : states) frames.push_back(polar_decompose(s));
  const auto ens = integrate_trajectories(frames, p.count, seed);
  out.emit("ensemble", ensemble_table(ens, n.stride));
  Dataset tv({"t", "tv_distance"});
  double tv_max = 0.0;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (k % n.stride != 0 && k + 1 != frames.size()) continue;
    const double d = total_variation_distance(ens.snapshot(k), frames[k], p.bins);
    tv_max = std::max(tv_max, d);
    tv.add_row({frames[k].time, d});
  }
  out.emit("equivariance", tv);
  std::size_t wrapped = 0;
  for (bool w : ens.wrapped) wrapped += w ? 1 : 0;
  m.summary["trajectories"] = ens.count();
  m.summary["max_tv_distance"] = tv_max;
  m.summary["ordering_preserved"] = preserves_ordering(ens);
  m.summary["wrapped_trajectories"] = wrapped;
}

inline void run(const DoubleSlitParams& p, Writer& out, RunManifest& m) {
  const auto r = run_double_slit(p.config);
  Dataset d({"x", "density", "background", "ratio"});
  for (std::size_t k = 0; k < r.x.size(); ++k) {
    d.add_row({r.x[k], r.density[k], r.background[k], r.density[k] / r.background[k]});
  }
  out.emit("pattern", d);
  out.emit("fit", fringe_table({r.fit}, {p.config.alpha}, "alpha"), OutputFormat::json);
  if (r.trajectories) out.emit("ensemble", ensemble_table(*r.trajectories, 1));
  m.summary["fringe_phase"] = r.fit.phase;
  m.summary["fringe_period"] = r.fit.period;
  m.summary["expected_spacing"] = r.expected_spacing;
  m.summary["spacing_relative_error"] = std::abs(r.fit.period - r.expected_spacing) / r.expected_spacing;
  m.summary["visibility"] = r.fit.visibility;
  m.summary["fit_residual"] = r.fit.residual;
  m.summary["fit_window"] = {r.fit_lo, r.fit_hi};
  m.summary["edge_probability"] = r.edge_probability;
  if (r.trajectories) m.summary["ordering_preserved"] = preserves_ordering(*r.trajectories);
}

inline void run(const InterferogramParams& p, Writer& out, RunManifest& m) {
  const auto sig = run_wavepacket_interferogram(p.spec, p.delays);
  std::vector<double> shifted(p.delays);
  for (double& t : shifted) t += sig.period;
  const auto later = run_wavepacket_interferogram(p.spec, shifted);
  Dataset d({"delay", "signal"});
  double recurrence = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < p.delays.size(); ++i) {
    d.add_row({p.delays[i], sig.signal[i]});
    recurrence = std::max(recurrence, std::abs(later.signal[i] - sig.signal[i]));
    peak = std::max(peak, sig.signal[i]);
  }
  out.emit("signal", d);
  m.summary["period"] = sig.period;
  m.summary["max_signal"] = peak;
  m.summary["max_recurrence_error"] = recurrence;
}

}  // namespace detail

/// Run a validated scenario, writing datasets into `dir` and the manifest
/// last. Module failures surface as ScenarioError naming the scenario.
inline RunManifest run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& dir) {
  const auto start = std::chrono::steady_clock::now();
  RunManifest m;
  m.scenario = cfg.scenario;
  m.seed = cfg.seed;
  m.config = cfg.source;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ScenarioError("cannot create output directory " + dir.string() + ": " + ec.message());
  detail::Writer out(cfg, dir, m);
  try {
    std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, TrajectoriesParams>) {
            detail::run(p, out, m, cfg.seed);
          } else {
            detail::run(p, out, m);
          }
        },
        cfg.params);
  } catch (const std::exception& e) {
    throw ScenarioError("scenario " + cfg.scenario + ": " + e.what());
  }
  m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::string file = cfg.output.prefix + "_manifest.json";
  m.outputs.push_back(file);
  try {
    write_text(dir / file, m.to_json().dump(2) + "\n");
  } catch (const std::exception& e) {
    throw ScenarioError("scenario " + cfg.scenario + ": " + e.what());
  }
  return m;
}

}  // namespace mphase::io
