#include <cmath>

#include <gtest/gtest.h>

#include "mphase/field.hpp"

using namespace mphase;

namespace {

PulsedField unit_field(double omega) {
  PulsedField f;
  f.envelope = Envelope::constant(1.0);
  f.carrier_frequency = omega;
  return f;
}

}  // namespace

TEST(EvaluateField, CosineAtStartAndQuarterPeriod) {
  const auto f = unit_field(2.0);
  EXPECT_DOUBLE_EQ(evaluate_field(f, 0.0), 1.0);
  EXPECT_NEAR(evaluate_field(f, pi / 4.0), 0.0, 1e-15);
}

TEST(EvaluateField, GaussianEnvelopeWithCarrierEnvelopePhase) {
  PulsedField f;
  f.envelope = Envelope::gaussian(1.0, 10.0);
  f.carrier_frequency = 1.0;
  f.cep = pi;
  EXPECT_NEAR(evaluate_field(f, 10.0), std::exp(-1.0) * std::cos(10.0 + pi), 1e-15);
}

TEST(TotalFieldPhase, TaylorExpandedPhase) {
  PulsedField f = unit_field(2.0);
  f.cep = 0.5;
  f.phase_coefficients = {0.1};
  EXPECT_NEAR(total_field_phase(f, 3.0), 6.8, 1e-14);
  EXPECT_DOUBLE_EQ(total_field_phase(f, 0.0), 0.5);

  PulsedField chirped = unit_field(1.0);
  chirped.phase_coefficients = {0.0, 0.2};
  EXPECT_NEAR(total_field_phase(chirped, 2.0), 2.4, 1e-14);
}

TEST(TotalFieldPhase, ZeroCoefficientsReduceToConstantPhase) {
  PulsedField f = unit_field(0.0);
  f.cep = 1.3;
  f.phase_coefficients = {0.0, 0.0, 0.0};
  for (double t : {-4.0, 0.0, 2.5, 100.0}) EXPECT_DOUBLE_EQ(f.phase(t), 1.3);
}

TEST(TotalFieldPhase, DerivativeIsInstantaneousFrequency) {
  PulsedField f = unit_field(3.0);
  f.cep = 0.2;
  f.phase_coefficients = {0.3, -0.05, 0.01, 0.002};
  const double dt = 1e-4;
  for (double t : {-2.0, 0.0, 0.7, 3.0}) {
    const double fd = (f.total_phase(t + dt) - f.total_phase(t - dt)) / (2.0 * dt);
    EXPECT_NEAR(fd, f.instantaneous_frequency(t), 1e-6) << "t=" << t;
  }
}

TEST(Envelope, NonNegativeAcrossSupport) {
  for (const auto& env : {Envelope::gaussian(2.0, 1.5, 1.0), Envelope::cos2(0.7, 3.0, -1.0)}) {
    const auto [lo, hi] = env.support();
    for (int k = 0; k <= 400; ++k) {
      const double t = lo + (hi - lo) * k / 400.0;
      EXPECT_GE(env(t), 0.0);
    }
  }
  EXPECT_THROW((Envelope{EnvelopeShape::gaussian, -1.0, 0.0, 1.0}.validate()), std::invalid_argument);
}

TEST(Envelope, AreaMatchesQuadrature) {
  const auto g = Envelope::gaussian(1.5, 0.8, 2.0);
  const auto c = Envelope::cos2(1.5, 0.8, 2.0);
  EXPECT_NEAR(integrate([&](double t) { return g(t); }, -3.0, 7.0, 4000), g.area(), 1e-9);
  EXPECT_NEAR(integrate([&](double t) { return c(t); }, 1.6, 2.4, 4000), c.area(), 1e-9);
}

TEST(PulseSequence, ComplexEnvelopeCarriesRelativeLobePhase) {
  PulsedField a;
  a.envelope = Envelope::gaussian(1.0, 0.5, 0.0);
  a.carrier_frequency = 5.0;
  PulsedField b = a;
  b.envelope.center = 4.0;
  b.cep = 0.9;
  const PulseSequence seq{{a, b}};
  for (double t : {0.0, 0.3, 4.0, 4.2}) {
    const double rebuilt = std::real(seq.complex_envelope(t) * std::polar(1.0, seq.total_phase(t)));
    EXPECT_NEAR(rebuilt, seq.value(t), 1e-14);
  }
  EXPECT_NEAR(std::arg(seq.complex_envelope(4.0)), 0.9, 1e-12);
}

TEST(PhaseLedger, ZeroEverything) {
  const auto ledger = build_phase_ledger(0.0, 0.0, [](double) { return 0.0; });
  for (double t : {0.0, 1.0, 10.0}) EXPECT_DOUBLE_EQ(ledger.total_phase(t), 0.0);
}

TEST(PhaseLedger, InitialPhaseIsCreationPlusHistory) {
  const double omega0 = 1.0;
  const auto ledger = build_phase_ledger(0.3, 0.2, [=](double t) { return omega0 * t; });
  EXPECT_DOUBLE_EQ(ledger.initial_phase(), 0.5);
  EXPECT_DOUBLE_EQ(ledger.total_phase(0.0), ledger.initial_phase());
  EXPECT_NEAR(ledger.total_phase(2.0), 2.5, 1e-15);
  EXPECT_NEAR(ledger.action(2.0), -2.5, 1e-15);
}

TEST(PhaseLedger, RejectsMisalignedOrigin) {
  EXPECT_THROW(build_phase_ledger(0.0, 0.0, [](double t) { return t + 1.0; }), std::invalid_argument);
}

TEST(PhaseLedger, AdditiveUnderIntervalSplitting) {
  auto freq = [](double t) { return 1.0 + 0.3 * std::sin(2.0 * t); };
  const auto whole = build_phase_ledger(0.4, 1.1, evolution_from_frequency(freq, 0.0));
  for (double split : {0.5, 1.7, 2.9}) {
    const auto tail = whole.continued_at(split, evolution_from_frequency(freq, split));
    EXPECT_DOUBLE_EQ(tail.phase_of_creation(), whole.phase_of_creation());
    EXPECT_NEAR(tail.initial_phase(), whole.total_phase(split), 1e-14);
    for (double t : {3.0, 4.5}) EXPECT_NEAR(tail.total_phase(t), whole.total_phase(t), 1e-10);
  }
}

TEST(IdlePhase, ConstantAndTimeDependentEnergies) {
  EXPECT_DOUBLE_EQ(idle_phase(1.0, 2.0), 2.0);
  EXPECT_DOUBLE_EQ(idle_phase(0.0, 7.0), 0.0);
  EXPECT_NEAR(idle_phase([](double t) { return t; }, 2.0), 2.0, 1e-12);
  EXPECT_THROW(idle_phase(1.0, -1.0), std::invalid_argument);
}

TEST(SemiclassicalPhase, PlaneWaveAndFreeParticle) {
  auto constant = [](double v) { return [v](double) { return v; }; };
  EXPECT_NEAR(semiclassical_phase(constant(2.0), constant(2.0), 0.0, 1.0, 0.0, 1.0), 0.0, 1e-13);
  EXPECT_NEAR(semiclassical_phase(constant(1.0), constant(0.0), 0.0, 3.0, 0.0, 5.0), 3.0, 1e-13);
  // E = p^2 / 2m with m = 1, p = 1 over t in [0, 2], x in [0, 2].
  EXPECT_NEAR(semiclassical_phase(constant(0.5), constant(1.0), 0.0, 2.0, 0.0, 2.0), -1.0, 1e-13);
}

TEST(SemiclassicalPhase, OnShellPlaneWaveAlongClassicalPathVanishesAtAllTimes) {
  // E = p v with x = v t: the integrand E - p dx/dt is identically zero.
  const double p = 1.7, v = 0.6;
  for (double t : {0.5, 1.0, 4.0}) {
    EXPECT_NEAR(semiclassical_phase([&](double) { return p * v; }, [&](double) { return p; }, 0.0, t,
                                    0.0, v * t),
                0.0, 1e-12);
  }
}
