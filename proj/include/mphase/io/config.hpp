#pragma once

// Scenario configuration: JSON document -> validated parameters. Every
// precondition of the owning module is checked here, before any output is
// produced.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mphase/dressed.hpp"
#include "mphase/experiments.hpp"
#include "mphase/field.hpp"
#include "mphase/hydrodynamics.hpp"
#include "mphase/io/emit.hpp"
#include "mphase/io/json_reader.hpp"
#include "mphase/two_level.hpp"

namespace mphase::io {

inline constexpr const char* scenario_names[] = {"rabi",         "dressed",      "ramsey",       "madelung",
                                                 "doubleslit",   "trajectories", "interferogram"};

struct OutputSpec {
  std::string prefix;
  OutputFormat format = OutputFormat::csv;
};

struct RabiParams {
  TwoLevelSystem system;
  PulsedField field;
  std::array<cplx, 2> initial{cplx{1.0, 0.0}, cplx{0.0, 0.0}};
  double t_start = 0.0;
  double t_final = 0.0;
  double dt = 0.0;
  HamiltonianModel model = HamiltonianModel::full;
  std::size_t sample_every = 1;
};

struct DressedParams {
  TwoLevelSystem system;
  PulsedField field;
  InitialCondition initial_condition = InitialCondition::ground;
  double t_final = 0.0;
  double dt = 0.0;
};

struct RamseyParams {
  TwoLevelSystem system;
  RamseyPulseSpec pulses;
  std::vector<double> delays;
  std::vector<double> relative_phases;
  RamseyMode mode = RamseyMode::analytic;
};

struct PacketParams {
  double mass = 1.0;
  double center = 0.0;
  double sigma = 1.0;
  double k0 = 0.0;
  double phase = 0.0;
};

struct WaveNumerics {
  double length = 0.0;
  std::size_t points = 0;
  double t_final = 0.0;
  std::size_t steps = 0;
  std::size_t stride = 0;  ///< frame_every (madelung) or record_every (trajectories)

  double dt() const { return t_final / static_cast<double>(steps); }
  SpatialGrid grid() const { return SpatialGrid::centered(length, points); }
};

struct MadelungParams {
  PacketParams packet;
  PotentialSpec potential;
  WaveNumerics numerics;
};

struct TrajectoriesParams {
  PacketParams packet;
  PotentialSpec potential;
  WaveNumerics numerics;
  std::size_t count = 10000;
  std::size_t bins = 64;
};

struct DoubleSlitParams {
  DoubleSlitConfig config;
};

struct InterferogramParams {
  InterferogramSpec spec;
  std::vector<double> delays;
};

using ScenarioParams = std::variant<RabiParams, DressedParams, RamseyParams, MadelungParams, DoubleSlitParams,
                                    TrajectoriesParams, InterferogramParams>;

struct ScenarioConfig {
  std::string scenario;
  std::uint64_t seed = 0;
  OutputSpec output;
  ScenarioParams params;
  nlohmann::json source;  ///< the document as read, echoed into the manifest
};

namespace detail {

/// Module preconditions raise std::invalid_argument; report them as
/// validation errors located at `where`.
template <typename Fn>
void precondition(const std::string& where, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ValidationError(where + ": " + e.what());
  } catch (const std::domain_error& e) {
    throw ValidationError(where + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

inline TwoLevelSystem read_system(JsonReader r) {
  TwoLevelSystem s;
  s.omega_g = r.number("omega_g", 0.0);
  s.omega_e = r.number("omega_e");
  s.dipole = r.number("dipole", 1.0);
  s.gamma_g = r.number("gamma_g", 0.0);
  s.gamma_e = r.number("gamma_e", 0.0);
  s.phi_g = r.number("phi_g", 0.0);
  s.phi_e = r.number("phi_e", 0.0);
  r.finish();
  precondition(r.path(), [&] { s.validate(); });
  return s;
}

inline Envelope read_envelope(JsonReader r) {
  Envelope e;
  const auto shape = r.choice("shape", {"constant", "gaussian", "cos2"}, "constant");
  e.shape = shape == "constant" ? EnvelopeShape::constant
            : shape == "gaussian" ? EnvelopeShape::gaussian
                                  : EnvelopeShape::cos2;
  e.amplitude = r.number("amplitude");
  e.center = r.number("center", 0.0);
  e.width = r.number("width", 1.0);
  r.finish();
  precondition(r.path(), [&] { e.validate(); });
  return e;
}

inline PulsedField read_field(JsonReader r) {
  PulsedField f;
  f.envelope = read_envelope(r.object("envelope"));
  f.carrier_frequency = r.number("carrier_frequency");
  f.cep = r.number("cep", 0.0);
  f.phase_coefficients = r.numbers("phase_coefficients", std::vector<double>{});
  r.finish();
  return f;
}

inline HamiltonianModel read_model(JsonReader& r) {
  return r.choice("model", {"full", "rwa"}, "full") == "full" ? HamiltonianModel::full : HamiltonianModel::rwa;
}

inline cplx read_complex(const json& v, const std::string& where) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    return {v[0].get<double>(), v[1].get<double>()};
  }
  JsonReader::fail(where, "expected a number or a [re, im] pair");
}

/// An axis is either an explicit array or {"start", "stop", "count"}
/// (inclusive of both ends).
inline std::vector<double> read_axis(JsonReader& r, const std::string& key) {
  const json* v = r.raw(key);
  if (!v) JsonReader::fail(r.at(key), "required field missing");
  if (v->is_array()) {
    auto values = r.numbers(key);
    if (values.empty()) JsonReader::fail(r.at(key), "needs at least one value");
    return values;
  }
  JsonReader a(*v, r.at(key));
  const double start = a.number("start");
  const double stop = a.number("stop");
  const auto count = a.integer("count");
  a.finish();
  if (count < 1) JsonReader::fail(a.at("count"), "must be >= 1");
  if (count > 1 && !(stop > start)) JsonReader::fail(a.at("stop"), "must be > start");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = count == 1 ? start : start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return out;
}

/// Largest rate the two-level integrator must resolve on a constant-envelope
/// estimate, used for the default time step.
inline double fastest_rate(const TwoLevelSystem& s, const PulsedField& f) {
  return std::max({std::abs(s.omega_g), std::abs(s.omega_e), std::abs(s.dipole * f.envelope.amplitude) / hbar,
                   std::abs(s.detuning(f.carrier_frequency)), 1e-300});
}

inline RabiParams read_rabi(JsonReader& root) {
  RabiParams p;
  p.system = read_system(root.object("system"));
  p.field = read_field(root.object("field"));
  if (auto init = root.optional_object("initial_state")) {
    if (const json* g = init->raw("ground")) p.initial[0] = read_complex(*g, init->at("ground"));
    if (const json* e = init->raw("excited")) p.initial[1] = read_complex(*e, init->at("excited"));
    init->finish();
  }
  JsonReader n = root.object("numerics");
  p.t_start = n.number("t_start", 0.0);
  p.t_final = n.number("t_final");
  p.dt = n.positive("dt", 0.05 / fastest_rate(p.system, p.field));
  p.model = read_model(n);
  p.sample_every = n.integer("sample_every", 1);
  n.finish();
  if (!(p.t_final > p.t_start)) JsonReader::fail(n.at("t_final"), "must be > t_start");
  if (p.sample_every < 1) JsonReader::fail(n.at("sample_every"), "must be >= 1");
  if (!(std::norm(p.initial[0]) + std::norm(p.initial[1]) <= 1.0 + 1e-12)) {
    JsonReader::fail(root.at("initial_state"), "norm must be <= 1");
  }
  precondition(n.at("dt"), [&] {
    check_tdse_resolution(p.system, p.field, UniformGrid::covering(p.t_start, p.t_final, p.dt), p.model);
  });
  return p;
}

inline DressedParams read_dressed(JsonReader& root) {
  DressedParams p;
  p.system = read_system(root.object("system"));
  p.field = read_field(root.object("field"));
  p.initial_condition =
      root.choice("initial_condition", {"ground", "excited"}, "ground") == "ground" ? InitialCondition::ground
                                                                                   : InitialCondition::excited;
  JsonReader n = root.object("numerics");
  p.t_final = n.positive("t_final");
  const double scale = p.field.envelope.variation_timescale();
  p.dt = n.positive("dt", std::min(scale / 40.0, 0.05 / fastest_rate(p.system, p.field)));
  n.finish();
  precondition(n.at("dt"), [&] {
    ::mphase::detail::check_grid(UniformGrid::covering(0.0, p.t_final, p.dt).values(), p.field);
  });
  return p;
}

inline RamseyParams read_ramsey(JsonReader& root) {
  RamseyParams p;
  p.system = read_system(root.object("system"));
  JsonReader pulses = root.object("pulses");
  p.pulses.carrier_frequency = pulses.number("carrier_frequency");
  p.pulses.rabi_frequency = pulses.positive("rabi_frequency");
  p.pulses.dt = pulses.positive("dt", 1e-3);
  p.pulses.model = read_model(pulses);
  pulses.finish();
  p.delays = read_axis(root, "delays");
  p.relative_phases = read_axis(root, "relative_phases");
  p.mode = root.choice("mode", {"analytic", "tdse"}, "analytic") == "analytic" ? RamseyMode::analytic
                                                                                : RamseyMode::tdse;
  for (std::size_t i = 0; i < p.delays.size(); ++i) {
    if (!(p.delays[i] > p.pulses.support())) {
      JsonReader::fail(root.at("delays") + "[" + std::to_string(i) + "]",
                       "pulses overlap: delay " + std::to_string(p.delays[i]) + " must exceed the pulse support " +
                           std::to_string(p.pulses.support()));
    }
  }
  if (p.mode == RamseyMode::tdse) {
    const double longest = *std::max_element(p.delays.begin(), p.delays.end());
    precondition(pulses.at("dt"), [&] {
      const auto seq = ramsey_sequence(p.system, p.pulses, longest, 0.0);
      const double t_end = seq.lobes[1].envelope.support().second;
      check_tdse_resolution(p.system, seq, UniformGrid::covering(0.0, t_end, p.pulses.dt), p.pulses.model);
    });
  }
  return p;
}

inline PacketParams read_packet(JsonReader r) {
  PacketParams p;
  p.mass = r.positive("mass", 1.0);
  p.center = r.number("center", 0.0);
  p.sigma = r.positive("sigma");
  p.k0 = r.number("k0", 0.0);
  p.phase = r.number("phase", 0.0);
  r.finish();
  return p;
}

inline PotentialSpec read_potential(std::optional<JsonReader> r) {
  if (!r) return PotentialSpec::free();
  PotentialSpec p;
  const auto kind = r->choice("kind", {"free", "harmonic", "double_slit", "tabulated"}, "free");
  if (kind == "harmonic") {
    p = PotentialSpec::harmonic(r->positive("omega0"), r->number("center", 0.0));
  } else if (kind == "double_slit") {
    p = PotentialSpec::double_slit(r->number("barrier_height"), r->positive("slit_separation"),
                                   r->positive("slit_width"), r->number("center", 0.0));
  } else if (kind == "tabulated") {
    p = PotentialSpec::tabulated(r->numbers("values"));
  }
  r->finish();
  return p;
}

inline WaveNumerics read_wave_numerics(JsonReader r, const char* stride_key) {
  WaveNumerics n;
  n.length = r.positive("length");
  n.points = r.integer("points");
  n.t_final = r.positive("t_final");
  n.steps = r.integer("steps");
  n.stride = r.integer(stride_key, n.steps);
  r.finish();
  if (n.steps < 1) JsonReader::fail(r.at("steps"), "must be >= 1");
  if (n.stride < 1) JsonReader::fail(r.at(stride_key), "must be >= 1");
  return n;
}

/// Shared checks for propagated packets: grid, potential, time step, spectral
/// resolution and a domain wide enough that the packet starts clear of the
/// boundary.
inline void check_wave_setup(const JsonReader& root, const PacketParams& packet, const PotentialSpec& potential,
                             const WaveNumerics& n) {
  precondition(root.at("numerics"), [&] {
    const auto psi = gaussian_packet(n.grid(), packet.mass, packet.center, packet.sigma, packet.k0, packet.phase);
    psi.validate();
    SplitOperatorPropagator(psi.grid, psi.mass, potential, n.dt());
    check_spectral_resolution(psi);
    const double edge = edge_probability(psi, 0.05 * n.length);
    if (edge > 1e-8) {
      throw std::invalid_argument("domain too small: initial probability " + std::to_string(edge) +
                                  " within 5% of the boundary exceeds 1e-8");
    }
  });
}

inline MadelungParams read_madelung(JsonReader& root) {
  MadelungParams p;
  p.packet = read_packet(root.object("packet"));
  p.potential = read_potential(root.optional_object("potential"));
  p.numerics = read_wave_numerics(root.object("numerics"), "frame_every");
  check_wave_setup(root, p.packet, p.potential, p.numerics);
  return p;
}

inline TrajectoriesParams read_trajectories(JsonReader& root) {
  TrajectoriesParams p;
  p.packet = read_packet(root.object("packet"));
  p.potential = read_potential(root.optional_object("potential"));
  p.numerics = read_wave_numerics(root.object("numerics"), "record_every");
  p.count = root.integer("count", 10000);
  p.bins = root.integer("bins", 64);
  if (p.count < 1) JsonReader::fail(root.at("count"), "must be >= 1");
  if (p.bins < 2) JsonReader::fail(root.at("bins"), "must be >= 2");
  check_wave_setup(root, p.packet, p.potential, p.numerics);
  return p;
}

inline DoubleSlitParams read_doubleslit(JsonReader& root, std::uint64_t seed) {
  DoubleSlitParams p;
  auto& c = p.config;
  c.separation = root.positive("separation");
  c.sigma = root.positive("sigma");
  c.alpha = root.number("alpha", 0.0);
  c.p_kick = root.number("p_kick", 0.0);
  c.time = root.positive("time");
  c.mass = root.positive("mass", 1.0);
  c.trajectories = root.integer("trajectories", 0);
  c.seed = seed;
  if (auto n = root.optional_object("numerics")) {
    c.length = n->positive("length", c.length);
    c.points = n->integer("points", c.points);
    c.steps = n->integer("steps", c.steps);
    n->finish();
  }
  precondition(root.path(), [&] {
    c.validate();
    const auto grid = SpatialGrid::centered(c.length, c.points);
    auto [left, right] = double_slit_branches(c, grid);
    left.validate();
    check_spectral_resolution(left);
  });
  return p;
}

inline InterferogramParams read_interferogram(JsonReader& root) {
  InterferogramParams p;
  auto& s = p.spec;
  s.omega0 = root.positive("omega0");
  s.mass = root.positive("mass", 1.0);
  const json* coeffs = root.raw("coefficients");
  if (!coeffs || !coeffs->is_array() || coeffs->empty()) {
    JsonReader::fail(root.at("coefficients"), "expected a non-empty array of numbers or [re, im] pairs");
  }
  for (std::size_t i = 0; i < coeffs->size(); ++i) {
    s.coefficients.push_back(read_complex((*coeffs)[i], root.at("coefficients") + "[" + std::to_string(i) + "]"));
  }
  s.relative_phase = root.number("relative_phase", 0.0);
  const auto window = root.numbers("window");
  if (window.size() != 2) JsonReader::fail(root.at("window"), "expected [lo, hi]");
  s.window_lo = window[0];
  s.window_hi = window[1];
  p.delays = read_axis(root, "delays");
  JsonReader n = root.object("numerics");
  s.grid = SpatialGrid::centered(n.positive("length"), n.integer("points"));
  n.finish();
  precondition(root.path(), [&] { run_wavepacket_interferogram(s, {}); });
  return p;
}

}  // namespace detail

/// Parse and validate a configuration document.
inline ScenarioConfig parse_config(const nlohmann::json& doc) {
  JsonReader root(doc, "$");
  ScenarioConfig cfg;
  cfg.source = doc;
  cfg.scenario = root.choice("scenario", {"rabi", "dressed", "ramsey", "madelung", "doubleslit", "trajectories",
                                          "interferogram"});
  cfg.seed = root.integer("seed", 0);
  cfg.output.prefix = cfg.scenario;
  if (auto out = root.optional_object("output")) {
    cfg.output.prefix = out->text("prefix", cfg.scenario);
    cfg.output.format = out->choice("format", {"csv", "json"}, "csv") == "csv" ? OutputFormat::csv : OutputFormat::json;
    out->finish();
    if (cfg.output.prefix.empty() || cfg.output.prefix.find('/') != std::string::npos) {
      JsonReader::fail(out->at("prefix"), "must be a non-empty file name prefix without '/'");
    }
  }
  if (cfg.scenario == "rabi") cfg.params = detail::read_rabi(root);
  else if (cfg.scenario == "dressed") cfg.params = detail::read_dressed(root);
  else if (cfg.scenario == "ramsey") cfg.params = detail::read_ramsey(root);
  else if (cfg.scenario == "madelung") cfg.params = detail::read_madelung(root);
  else if (cfg.scenario == "doubleslit") cfg.params = detail::read_doubleslit(root, cfg.seed);
  else if (cfg.scenario == "trajectories") cfg.params = detail::read_trajectories(root);
  else cfg.params = detail::read_interferogram(root);
  root.finish();
  return cfg;
}

inline ScenarioConfig parse_config_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("JSON parse error: ") + e.what());
  }
  return parse_config(doc);
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace mphase::io
