#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include "mphase/dressed.hpp"

using namespace mphase;

namespace {

PulsedField constant_drive(double amplitude, double carrier) {
  PulsedField f;
  f.envelope = Envelope::constant(amplitude);
  f.carrier_frequency = carrier;
  return f;
}

std::vector<double> grid(double stop, double dt) { return UniformGrid::covering(0.0, stop, dt).values(); }

// Lower eigenvalue of [[0, -W/2], [-W/2, D]] in closed form.
double lower_branch(double rabi, double detuning) {
  return 0.5 * detuning - 0.5 * std::sqrt(detuning * detuning + rabi * rabi);
}

}  // namespace

TEST(DressedFrequencies, ZeroFieldReducesToBareLevels) {
  TwoLevelSystem sys{0.3, 2.0, 1.0, 0.02, 0.1};
  const auto f = instantaneous_dressed_frequencies(sys, constant_drive(0.0, 1.6), grid(10.0, 0.01));
  for (std::size_t k = 0; k < f.times.size(); ++k) {
    EXPECT_LT(std::abs(f.omega_G[k] - cplx(0.3, -0.01)), 1e-14);
    EXPECT_LT(std::abs(f.omega_E[k] - cplx(2.0, -0.05)), 1e-14);
  }
  EXPECT_FALSE(f.seed_tie_broken);
  EXPECT_EQ(max_branch_jump(f), 0.0);
}

TEST(DressedFrequencies, ResonantSplittingEqualsRabiFrequency) {
  TwoLevelSystem sys{0.0, 1.0, 1.0};
  const double rabi = 0.05;
  const auto f = instantaneous_dressed_frequencies(sys, constant_drive(rabi, 1.0), grid(10.0, 0.01));
  EXPECT_TRUE(f.seed_tie_broken);
  EXPECT_NEAR(f.omega_G[0].real(), -0.5 * rabi, 1e-15);
  EXPECT_NEAR(f.omega_E[0].real(), 1.0 + 0.5 * rabi, 1e-15);
  EXPECT_NEAR(f.detuning_nad[0].real(), rabi, 1e-15);
  EXPECT_NEAR(nonadiabatic_phase(f, 10.0), rabi * 10.0, 1e-12);
}

TEST(DressedFrequencies, AcStarkShiftFollowsPerturbationTheory) {
  TwoLevelSystem sys{0.0, 1.0, 1.0};
  const double detuning = 0.2;
  for (double rabi : {1e-3, 4e-3, 1e-2}) {
    const auto f = instantaneous_dressed_frequencies(sys, constant_drive(rabi, 1.0 - detuning), grid(1.0, 0.01));
    const double second = -rabi * rabi / (4.0 * detuning);
    const double fourth = std::pow(rabi, 4) / (16.0 * std::pow(detuning, 3));
    EXPECT_NEAR(f.omega_G[0].real(), second + fourth, 4.0 * std::pow(rabi, 6) / std::pow(detuning, 5));
    EXPECT_NEAR(f.omega_G[0].real(), lower_branch(rabi, detuning), 1e-15);
  }
}

TEST(DressedFrequencies, GridPreconditions) {
  TwoLevelSystem sys{0.0, 1.0, 1.0};
  PulsedField field;
  field.envelope = Envelope::gaussian(0.1, 2.0, 10.0);
  field.carrier_frequency = 1.0;
  EXPECT_THROW(instantaneous_dressed_frequencies(sys, field, grid(20.0, 0.5)), std::invalid_argument);
  auto shifted = grid(20.0, 0.01);
  for (double& t : shifted) t += 1.0;
  EXPECT_THROW(instantaneous_dressed_frequencies(sys, field, shifted), std::invalid_argument);
  EXPECT_NO_THROW(instantaneous_dressed_frequencies(sys, field, grid(20.0, 0.01)));
}

TEST(DressedFrequencies, AmbiguousBranchesRaise) {
  // Resonant coupling that switches off between the first two samples: the
  // branches start as equal mixtures and then become degenerate.
  TwoLevelSystem sys{0.0, 1.0, 1.0};
  PulsedField field;
  field.envelope = Envelope::cos2(0.05, 100.0, -49.5);
  field.carrier_frequency = 1.0;
  EXPECT_THROW(instantaneous_dressed_frequencies(sys, field, grid(10.0, 1.0)), BranchAmbiguityError);
}

TEST(MixingFunctions, WeakAndResonantLimits) {
  TwoLevelSystem sys{0.0, 1.0, 1.0};
  {
    const auto field = constant_drive(0.0, 0.8);
    const auto f = instantaneous_dressed_frequencies(sys, field, grid(1.0, 0.01));
    const auto m = mixing_functions(f, sys, field);
    EXPECT_EQ(m.cos_half[0], cplx(1.0));
    EXPECT_EQ(m.sin_half[0], cplx(0.0));
  }
  {
    const double eps = 1e-3;
    const auto field = constant_drive(eps * 0.2, 0.8);
    const auto f = instantaneous_dressed_frequencies(sys, field, grid(1.0, 0.01));
    const auto m = mixing_functions(f, sys, field);
    EXPECT_NEAR(m.sin_half[0].real(), eps / 2.0, 1e-8);
    const double theta = std::atan2(eps * 0.2, 0.2);
    EXPECT_NEAR(m.cos_half[0].real(), std::cos(theta / 2.0), 1e-15);
    EXPECT_NEAR(m.sin_half[0].real(), std::sin(theta / 2.0), 1e-15);
  }
  {
    const auto field = constant_drive(0.1, 1.0);
    const auto f = instantaneous_dressed_frequencies(sys, field, grid(1.0, 0.01));
    const auto m = mixing_functions(f, sys, field);
    EXPECT_NEAR(m.cos_half[0].real(), std::sqrt(0.5), 1e-15);
    EXPECT_NEAR(m.sin_half[0].real(), std::sqrt(0.5), 1e-15);
  }
}

TEST(MixingFunctions, ComplexNormalisationHoldsWithDamping) {
  TwoLevelSystem sys{0.0, 1.0, 1.0, 0.01, 0.2};
  PulsedField field;
  field.envelope = Envelope::gaussian(0.3, 5.0, 15.0);
  field.carrier_frequency = 0.9;
  field.phase_coefficients = {0.0, 0.004};
  const auto f = instantaneous_dressed_frequencies(sys, field, grid(30.0, 0.01));
  const auto m = mixing_functions(f, sys, field);
  for (std::size_t k = 0; k < m.times.size(); ++k) {
    EXPECT_LT(std::abs(m.cos_half[k] * m.cos_half[k] + m.sin_half[k] * m.sin_half[k] - 1.0), 1e-12);
  }
}

TEST(NonadiabaticPhase, ZeroFieldWindsAtDetuning) {
  TwoLevelSystem sys{0.0, 1.0, 1.0};
  const auto f = instantaneous_dressed_frequencies(sys, constant_drive(0.0, 0.7), grid(20.0, 0.01));
  for (double t : {0.0, 0.01, 5.0, 20.0}) EXPECT_NEAR(nonadiabatic_phase(f, t), 0.3 * t, 1e-12);
  EXPECT_THROW(nonadiabatic_phase(f, 0.005), std::invalid_argument);
}

namespace {

struct ChirpedCase {
  TwoLevelSystem sys{0.0, 1.0, 0.8, 0.0, 0.0, 0.25, -0.6};
  PulsedField field;
  std::vector<double> times = grid(40.0, 0.01);

  ChirpedCase() {
    field.envelope = Envelope::gaussian(0.3, 6.0, 20.0);
    field.carrier_frequency = 0.85;
    field.cep = 0.4;
    field.phase_coefficients = {0.01, 0.002};
  }
  DressedPhaseRecord record(const TwoLevelSystem& s, InitialCondition ic) const {
    return accumulate_dressed_phases(instantaneous_dressed_frequencies(s, field, times), field, s, ic);
  }
};

}  // namespace

TEST(DressedPhases, ChainRelationsHold) {
  ChirpedCase c;
  EXPECT_LT(max_chain_violation(c.record(c.sys, InitialCondition::ground)), 1e-10);
  EXPECT_LT(max_chain_violation(c.record(c.sys, InitialCondition::excited)), 1e-10);
}

TEST(DressedPhases, InitialValues) {
  ChirpedCase c;
  const auto g = c.record(c.sys, InitialCondition::ground);
  EXPECT_DOUBLE_EQ(g.phi_Gr[0], c.sys.phi_g);
  EXPECT_DOUBLE_EQ(g.phi_Gv[0], c.sys.phi_g + c.field.phase(0.0));
  const auto e = c.record(c.sys, InitialCondition::excited);
  EXPECT_DOUBLE_EQ(e.phi_Er[0], c.sys.phi_e);
  EXPECT_DOUBLE_EQ(e.phi_Ev[0], c.sys.phi_e - c.field.phase(0.0));
}

TEST(DressedPhases, ExcitedStateInUnchirpedZeroFieldWindsAtBareFrequency) {
  TwoLevelSystem sys{0.0, 1.5, 1.0, 0.0, 0.0, 0.0, 0.9};
  auto field = constant_drive(0.0, 1.2);
  field.cep = 0.3;
  const auto times = grid(10.0, 0.01);
  const auto r = accumulate_dressed_phases(instantaneous_dressed_frequencies(sys, field, times), field, sys,
                                           InitialCondition::excited);
  for (std::size_t k = 0; k < times.size(); k += 97) {
    EXPECT_NEAR(r.phi_Er[k], 0.9 + 1.5 * times[k], 1e-12);
    EXPECT_NEAR(r.phi_Ev[k], 0.9 - 0.3 + 0.3 * times[k], 1e-12);
  }
}

TEST(DressedPhases, ChirpEntersExcitedComponentExplicitly) {
  ChirpedCase c;
  PulsedField flat = c.field;
  flat.phase_coefficients.clear();
  const auto freqs = instantaneous_dressed_frequencies(c.sys, c.field, c.times);
  const auto chirped = accumulate_dressed_phases(freqs, c.field, c.sys, InitialCondition::ground);
  const auto plain = accumulate_dressed_phases(freqs, flat, c.sys, InitialCondition::ground);
  for (std::size_t k = 0; k < c.times.size(); k += 101) {
    const double t = c.times[k];
    EXPECT_NEAR(chirped.phi_Er[k] - plain.phi_Er[k], 0.01 * t + 0.002 * t * t / 2.0, 1e-12);
    EXPECT_NEAR(chirped.phi_Gr[k] - plain.phi_Gr[k], 0.0, 1e-12);
  }
}

TEST(DressedPhases, SensitivityToInitialPhases) {
  ChirpedCase c;
  for (auto ic : {InitialCondition::ground, InitialCondition::excited}) {
    auto build = [&](const TwoLevelSystem& s, const PulsedField&) { return c.record(s, ic); };
    const auto m = phase_sensitivity_matrix(build, c.sys, c.field, 2000);
    for (std::size_t row = 0; row < 4; ++row) {
      EXPECT_NEAR(m[row][0], ic == InitialCondition::ground ? 1.0 : 0.0, 1e-8);
      EXPECT_NEAR(m[row][1], ic == InitialCondition::ground ? 0.0 : 1.0, 1e-8);
    }
  }
}

TEST(AssembleDressedState, ZeroFieldMatchesFreeEvolution) {
  TwoLevelSystem sys{0.2, 1.3, 1.0, 0.0, 0.3, 0.5, -0.4};
  const auto field = constant_drive(0.0, 1.0);
  const auto times = grid(10.0, 0.01);
  const auto freqs = instantaneous_dressed_frequencies(sys, field, times);
  const auto mixing = mixing_functions(freqs, sys, field);
  const auto ground = accumulate_dressed_phases(freqs, field, sys, InitialCondition::ground);
  const auto excited = accumulate_dressed_phases(freqs, field, sys, InitialCondition::excited);
  for (std::size_t k = 0; k < times.size(); k += 50) {
    const double t = times[k];
    const auto g = assemble_dressed_state(mixing, ground, k);
    EXPECT_LT(std::abs(g[0] - std::polar(1.0, -(0.5 + 0.2 * t))), 1e-12);
    EXPECT_EQ(g[1], cplx(0.0));
    const auto e = assemble_dressed_state(mixing, excited, k);
    EXPECT_LT(std::abs(e[1] - std::polar(std::exp(-0.15 * t), -(-0.4 + 1.3 * t))), 1e-12);
  }
}

TEST(AssembleDressedState, FollowsAdiabaticTdseForFarDetunedChirpedPulse) {
  TwoLevelSystem sys{0.0, 10.0, 1.0};
  PulsedField field;
  field.envelope = Envelope::gaussian(0.4, 20.0, 80.0);
  field.carrier_frequency = 8.0;
  field.phase_coefficients = {0.0, 0.002};
  const double dt = 0.01;
  const auto times = grid(160.0, dt);
  const auto freqs = instantaneous_dressed_frequencies(sys, field, times);
  const auto mixing = mixing_functions(freqs, sys, field);
  const auto record = accumulate_dressed_phases(freqs, field, sys, InitialCondition::ground);
  const auto tdse = integrate_tdse(sys, field, {1.0, 0.0}, 0.0, 160.0, dt, {HamiltonianModel::rwa});
  ASSERT_EQ(tdse.size(), times.size());
  double worst = 0.0, worst_population = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto c = assemble_dressed_state(mixing, record, k);
    worst = std::max({worst, std::abs(c[0] - tdse.c_g[k]), std::abs(c[1] - tdse.c_e[k])});
    worst_population = std::max(worst_population, std::abs(std::norm(c[1]) - tdse.population_e(k)));
  }
  EXPECT_LT(worst, 5e-3);
  EXPECT_LT(worst_population, 1e-3);
}

namespace {

// Chirp sweeping through resonance at the pulse centre; returns
// |P_e(TDSE) - |SIN|^2| there.
double half_transfer_error(double tau) {
  TwoLevelSystem sys{0.0, 10.0, 1.0};
  const double center = 4.0 * tau;
  const double chirp = 0.04 / tau;
  PulsedField field;
  field.envelope = Envelope::gaussian(0.4, tau, center);
  field.carrier_frequency = 10.0 - chirp * center;
  field.phase_coefficients = {0.0, chirp};
  const double dt = 0.01;
  const auto times = grid(center, dt);
  const auto freqs = instantaneous_dressed_frequencies(sys, field, times);
  const auto mixing = mixing_functions(freqs, sys, field);
  const auto tdse = integrate_tdse(sys, field, {1.0, 0.0}, 0.0, center, dt, {HamiltonianModel::rwa});
  const std::size_t k = times.size() - 1;
  EXPECT_NEAR(std::norm(mixing.sin_half[k]), 0.5, 1e-12);
  const double err = std::abs(tdse.population_e(k) - std::norm(mixing.sin_half[k]));
  return err;
}

}  // namespace

TEST(AssembleDressedState, HalfTransferAtResonanceImprovesWithPulseLength) {
  const double short_pulse = half_transfer_error(10.0);
  const double long_pulse = half_transfer_error(40.0);
  EXPECT_LT(long_pulse, 0.02);
  EXPECT_LT(long_pulse, short_pulse);
}
