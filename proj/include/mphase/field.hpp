#pragma once

// Driving field E(t) = E0(t) cos(omega t + phi(t)) with a Taylor-expanded
// envelope-carrier phase, plus the phase bookkeeping built on top of it.

#include <cmath>
#include <complex>
#include <concepts>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mphase/numerics.hpp"

namespace mphase {

enum class EnvelopeShape { constant, gaussian, cos2 };

inline std::string to_string(EnvelopeShape s) {
  switch (s) {
    case EnvelopeShape::constant: return "constant";
    case EnvelopeShape::gaussian: return "gaussian";
    case EnvelopeShape::cos2: return "cos2";
  }
  return "unknown";
}

/// Non-negative field envelope E0(t).
///   constant: amplitude
///   gaussian: amplitude * exp(-(t - center)^2 / width^2)
///   cos2:     amplitude * cos^2(pi (t - center) / width) for |t - center| <= width / 2
struct Envelope {
  EnvelopeShape shape = EnvelopeShape::constant;
  double amplitude = 0.0;
  double center = 0.0;
  double width = 1.0;

  static Envelope constant(double amplitude) { return {EnvelopeShape::constant, amplitude, 0.0, 1.0}; }
  static Envelope gaussian(double amplitude, double tau, double center = 0.0) {
    return {EnvelopeShape::gaussian, amplitude, center, tau};
  }
  static Envelope cos2(double amplitude, double duration, double center = 0.0) {
    return {EnvelopeShape::cos2, amplitude, center, duration};
  }

  void validate() const {
    if (!(amplitude >= 0.0)) throw std::invalid_argument("envelope amplitude must be >= 0");
    if (shape != EnvelopeShape::constant && !(width > 0.0)) {
      throw std::invalid_argument("envelope width must be > 0");
    }
  }

  double operator()(double t) const {
    switch (shape) {
      case EnvelopeShape::constant: return amplitude;
      case EnvelopeShape::gaussian: {
        const double u = (t - center) / width;
        return amplitude * std::exp(-u * u);
      }
      case EnvelopeShape::cos2: {
        const double u = (t - center) / width;
        if (std::abs(u) > 0.5) return 0.0;
        const double c = std::cos(pi * u);
        return amplitude * c * c;
      }
    }
    return 0.0;
  }

  /// Time window outside of which the envelope is negligible (< e^-16 for
  /// the Gaussian). Unbounded for the constant envelope.
  std::pair<double, double> support() const {
    switch (shape) {
      case EnvelopeShape::gaussian: return {center - 4.0 * width, center + 4.0 * width};
      case EnvelopeShape::cos2: return {center - 0.5 * width, center + 0.5 * width};
      case EnvelopeShape::constant: break;
    }
    return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }

  /// amplitude / max |dE0/dt|; infinite for the constant envelope.
  double variation_timescale() const {
    switch (shape) {
      case EnvelopeShape::gaussian: return width * std::sqrt(std::numbers::e / 2.0);
      case EnvelopeShape::cos2: return width / pi;
      case EnvelopeShape::constant: break;
    }
    return std::numeric_limits<double>::infinity();
  }

  /// Integral of the envelope over all time.
  double area() const {
    switch (shape) {
      case EnvelopeShape::gaussian: return amplitude * width * std::sqrt(pi);
      case EnvelopeShape::cos2: return 0.5 * amplitude * width;
      case EnvelopeShape::constant: break;
    }
    return std::numeric_limits<double>::infinity();
  }
};

/// A single pulse E0(t) cos(Phi_F(t)), Phi_F(t) = omega t + phi(t), with
/// phi(t) = cep + sum_{k>=1} phase_coefficients[k-1] t^k / k!.
struct PulsedField {
  Envelope envelope;
  double carrier_frequency = 0.0;
  double cep = 0.0;
  std::vector<double> phase_coefficients;

  /// Envelope-carrier phase phi(t).
  double phase(double t) const {
    double acc = cep;
    double term = 1.0;
    for (std::size_t k = 0; k < phase_coefficients.size(); ++k) {
      term *= t / static_cast<double>(k + 1);
      acc += phase_coefficients[k] * term;
    }
    return acc;
  }

  /// d phi / dt.
  double phase_rate(double t) const {
    double acc = 0.0;
    double term = 1.0;
    for (std::size_t k = 0; k < phase_coefficients.size(); ++k) {
      if (k > 0) term *= t / static_cast<double>(k);
      acc += phase_coefficients[k] * term;
    }
    return acc;
  }

  /// Unwrapped total field phase Phi_F(t).
  double total_phase(double t) const { return carrier_frequency * t + phase(t); }
  double instantaneous_frequency(double t) const { return carrier_frequency + phase_rate(t); }
  double value(double t) const { return envelope(t) * std::cos(total_phase(t)); }

  /// Slowly varying envelope relative to this pulse's own carrier phase.
  cplx complex_envelope(double t) const { return {envelope(t), 0.0}; }

  bool is_chirped() const {
    for (double c : phase_coefficients) {
      if (c != 0.0) return true;
    }
    return false;
  }
};

/// Several pulses sharing the carrier frequency. The first lobe defines the
/// reference phase; the others enter the complex envelope with their phase
/// offset relative to it.
struct PulseSequence {
  std::vector<PulsedField> lobes;

  const PulsedField& reference() const {
    if (lobes.empty()) throw std::logic_error("PulseSequence has no lobes");
    return lobes.front();
  }
  double value(double t) const {
    double acc = 0.0;
    for (const auto& l : lobes) acc += l.value(t);
    return acc;
  }
  double total_phase(double t) const { return reference().total_phase(t); }
  double instantaneous_frequency(double t) const { return reference().instantaneous_frequency(t); }
  cplx complex_envelope(double t) const {
    const double ref = reference().total_phase(t);
    cplx acc{0.0, 0.0};
    for (const auto& l : lobes) acc += l.envelope(t) * std::polar(1.0, l.total_phase(t) - ref);
    return acc;
  }
};

/// Anything that can drive the two-level system. `complex_envelope` is the
/// slowly varying amplitude relative to `total_phase`, so that
/// value(t) = Re[complex_envelope(t) exp(i total_phase(t))].
template <typename F>
concept DrivingField = requires(const F& f, double t) {
  { f.value(t) } -> std::convertible_to<double>;
  { f.total_phase(t) } -> std::convertible_to<double>;
  { f.instantaneous_frequency(t) } -> std::convertible_to<double>;
  { f.complex_envelope(t) } -> std::convertible_to<cplx>;
};

/// No field at all.
struct NullField {
  double value(double) const { return 0.0; }
  double total_phase(double) const { return 0.0; }
  double instantaneous_frequency(double) const { return 0.0; }
  cplx complex_envelope(double) const { return {0.0, 0.0}; }
};

template <DrivingField F>
double evaluate_field(const F& field, double t) {
  return field.value(t);
}

template <DrivingField F>
double total_field_phase(const F& field, double t) {
  return field.total_phase(t);
}

/// Phase decomposition of a state: the phase fixed at creation, the
/// constant initial phase (creation plus everything accumulated before t0),
/// and the explicitly evolved part. Phases are unwrapped reals.
class PhaseLedger {
 public:
  using Evolution = std::function<double(double)>;

  PhaseLedger(double creation, double initial, double t0, Evolution evolution)
      : creation_(creation), initial_(initial), t0_(t0), evolution_(std::move(evolution)) {}

  double phase_of_creation() const { return creation_; }
  double initial_phase() const { return initial_; }
  double origin() const { return t0_; }
  double evolution_phase(double t) const { return evolution_(t); }
  double total_phase(double t) const { return initial_ + evolution_(t); }

  /// Action carried by the phase, S = -hbar * total phase.
  double action(double t) const { return -hbar * total_phase(t); }

  /// Ledger for a following interval starting at t1: its preceding history is
  /// everything this ledger accumulated up to t1.
  PhaseLedger continued_at(double t1, Evolution next) const {
    const double history = total_phase(t1) - creation_;
    return build(creation_, history, t1, std::move(next));
  }

  static PhaseLedger build(double creation, double preceding_history, double t0,
                           Evolution evolution, double origin_tolerance = 1e-12) {
    if (!evolution) throw std::invalid_argument("phase ledger needs an evolution function");
    const double at_origin = evolution(t0);
    if (!(std::abs(at_origin) <= origin_tolerance)) {
      throw std::invalid_argument("evolution phase at the ledger origin must vanish (got " +
                                  std::to_string(at_origin) + "): misaligned time origin");
    }
    return PhaseLedger(creation, creation + preceding_history, t0, std::move(evolution));
  }

 private:
  double creation_;
  double initial_;
  double t0_;
  Evolution evolution_;
};

inline PhaseLedger build_phase_ledger(double creation, double preceding_history_phase,
                                      PhaseLedger::Evolution evolution, double t0 = 0.0) {
  return PhaseLedger::build(creation, preceding_history_phase, t0, std::move(evolution));
}

/// Evolution phase from an instantaneous frequency, integrated from t0 with
/// composite Simpson at spacing close to `step`.
inline PhaseLedger::Evolution evolution_from_frequency(std::function<double(double)> frequency,
                                                       double t0, double step = 1e-3) {
  return [frequency = std::move(frequency), t0, step](double t) {
    if (t == t0) return 0.0;
    const auto n = static_cast<std::size_t>(std::ceil(std::abs(t - t0) / step));
    return integrate(frequency, t0, t, n) / hbar;
  };
}

/// Phase an isolated system with constant energy h0 accumulates in time t.
inline double idle_phase(double h0, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("idle_phase requires t >= 0");
  return h0 * t / hbar;
}

/// Time-dependent version, integrated with composite Simpson.
inline double idle_phase(const std::function<double(double)>& h0, double t,
                         std::size_t intervals = 2048) {
  if (!(t >= 0.0)) throw std::invalid_argument("idle_phase requires t >= 0");
  return integrate(h0, 0.0, t, intervals) / hbar;
}

/// (int E dt - int p dx) / hbar along a path traversing [x0, x1] while time
/// runs over [t0, t1].
inline double semiclassical_phase(const std::function<double(double)>& energy,
                                  const std::function<double(double)>& momentum, double t0,
                                  double t1, double x0, double x1, std::size_t intervals = 2048) {
  return (integrate(energy, t0, t1, intervals) - integrate(momentum, x0, x1, intervals)) / hbar;
}

}  // namespace mphase
