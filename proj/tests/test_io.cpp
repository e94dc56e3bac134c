#include <gtest/gtest.h>

#include <sys/wait.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mphase/io/scenario.hpp"

using namespace mphase;
using namespace mphase::io;
namespace fs = std::filesystem;

namespace {

nlohmann::json minimal_rabi() {
  return nlohmann::json::parse(R"({
    "scenario": "rabi",
    "system": {"omega_e": 1.0},
    "field": {"envelope": {"amplitude": 0.01}, "carrier_frequency": 1.0},
    "numerics": {"t_final": 100.0}
  })");
}

nlohmann::json double_slit(double alpha) {
  nlohmann::json j = nlohmann::json::parse(R"({
    "scenario": "doubleslit", "separation": 10.0, "sigma": 1.0, "time": 30.0,
    "numerics": {"length": 256.0, "points": 1024}
  })");
  j["alpha"] = alpha;
  return j;
}

std::string validation_message(const nlohmann::json& j) {
  try {
    parse_config(j);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mphase_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Config, MinimalRabiGetsDefaults) {
  const auto cfg = parse_config(minimal_rabi());
  const auto& p = std::get<RabiParams>(cfg.params);
  EXPECT_EQ(cfg.seed, 0u);
  EXPECT_EQ(cfg.output.prefix, "rabi");
  EXPECT_EQ(cfg.output.format, OutputFormat::csv);
  EXPECT_EQ(p.model, HamiltonianModel::full);
  EXPECT_EQ(p.t_start, 0.0);
  EXPECT_DOUBLE_EQ(p.dt, 0.05);  // half the resolution limit for omega_e = 1
  EXPECT_EQ(p.initial[0], cplx(1.0, 0.0));
  EXPECT_EQ(p.system.dipole, 1.0);
  EXPECT_EQ(p.field.envelope.shape, EnvelopeShape::constant);
}

TEST(Config, CoarseTimeStepCitesResolutionRule) {
  auto j = minimal_rabi();
  j["numerics"]["dt"] = 0.5;
  const auto msg = validation_message(j);
  EXPECT_NE(msg.find("dt*max(omega_e, Omega_R, |Delta|) <= 0.1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("$.numerics.dt"), std::string::npos) << msg;
}

TEST(Config, UnknownKeyIsNamed) {
  auto j = minimal_rabi();
  j["system"]["gama_e"] = 0.1;
  const auto msg = validation_message(j);
  EXPECT_NE(msg.find("\"gama_e\""), std::string::npos) << msg;
  EXPECT_NE(msg.find("$.system.gama_e"), std::string::npos) << msg;

  auto top = minimal_rabi();
  top["sede"] = 3;
  EXPECT_NE(validation_message(top).find("\"sede\""), std::string::npos);
}

TEST(Config, SchemaViolationsCarryFieldPath) {
  auto j = minimal_rabi();
  j["system"]["omega_e"] = "fast";
  EXPECT_NE(validation_message(j).find("$.system.omega_e: expected a number"), std::string::npos);
  j = minimal_rabi();
  j["numerics"].erase("t_final");
  EXPECT_NE(validation_message(j).find("$.numerics.t_final: required field missing"), std::string::npos);
  j = minimal_rabi();
  j["scenario"] = "rabbi";
  EXPECT_NE(validation_message(j).find("must be one of"), std::string::npos);
  j = minimal_rabi();
  j["system"]["gamma_e"] = -1.0;
  EXPECT_NE(validation_message(j).find("gamma_e >= 0"), std::string::npos);
}

TEST(Config, ParseErrorIsValidationError) {
  EXPECT_THROW(parse_config_text("{\"scenario\": "), ValidationError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ValidationError);
}

TEST(Config, ModulePreconditionsCheckedUpFront) {
  const auto ramsey = nlohmann::json::parse(R"({
    "scenario": "ramsey", "system": {"omega_e": 2000.0},
    "pulses": {"carrier_frequency": 1999.0, "rabi_frequency": 40.0},
    "delays": [0.1, 1.0], "relative_phases": [0.0]
  })");
  EXPECT_NE(validation_message(ramsey).find("pulses overlap"), std::string::npos);

  auto narrow = nlohmann::json::parse(R"({
    "scenario": "madelung", "packet": {"sigma": 0.01},
    "numerics": {"length": 20.0, "points": 256, "t_final": 1.0, "steps": 10}
  })");
  EXPECT_NE(validation_message(narrow).find("under-resolved"), std::string::npos);

  auto cramped = narrow;
  cramped["packet"]["sigma"] = 3.0;
  EXPECT_NE(validation_message(cramped).find("domain too small"), std::string::npos);

  auto odd_grid = narrow;
  odd_grid["packet"]["sigma"] = 1.0;
  odd_grid["numerics"]["points"] = 300;
  EXPECT_NE(validation_message(odd_grid).find("power of two"), std::string::npos);

  auto close = double_slit(0.0);
  close["separation"] = 3.0;
  EXPECT_NE(validation_message(close).find("d > 4 sigma"), std::string::npos);
  close["separation"] = 4.5;  // resolvable, but under three fringes across the packet
  EXPECT_NE(validation_message(close).find("fewer than 3"), std::string::npos);

  const auto high_level = nlohmann::json::parse(R"({
    "scenario": "interferogram", "omega0": 1.0, "coefficients": [0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1],
    "window": [0, 5], "delays": [0.0], "numerics": {"length": 10.0, "points": 64}
  })");
  EXPECT_NE(validation_message(high_level).find("not supported by the grid"), std::string::npos);
}

TEST(Config, AxisRanges) {
  auto j = nlohmann::json::parse(R"({
    "scenario": "ramsey", "system": {"omega_e": 2000.0},
    "pulses": {"carrier_frequency": 1999.0, "rabi_frequency": 40.0},
    "delays": {"start": 1.0, "stop": 2.0, "count": 3}, "relative_phases": [0.0, 0.5]
  })");
  const auto p = std::get<RamseyParams>(parse_config(j).params);
  ASSERT_EQ(p.delays.size(), 3u);
  EXPECT_EQ(p.delays[1], 1.5);
  EXPECT_EQ(p.relative_phases.size(), 2u);
  j["delays"]["extra"] = 1;
  EXPECT_NE(validation_message(j).find("\"extra\""), std::string::npos);
}

TEST(Config, OutputDirectoryFromEnvironment) {
  ::setenv(output_dir_env, "/tmp/from_env", 1);
  EXPECT_EQ(resolve_output_dir(std::nullopt), fs::path("/tmp/from_env"));
  EXPECT_EQ(resolve_output_dir(std::string("explicit")), fs::path("explicit"));
  ::unsetenv(output_dir_env);
  EXPECT_EQ(resolve_output_dir(std::nullopt), fs::path("."));
}

TEST(Emit, TwoColumnCsvWithHeader) {
  Dataset d({"t", "y"});
  d.add_row({0.0, 1.0});
  d.add_row({0.5, -2.25});
  EXPECT_EQ(render_csv(d), "t,y\n0,1\n0.5,-2.25\n");
  EXPECT_THROW(d.add_row({1.0}), std::invalid_argument);
}

TEST(Emit, RoundTripIsExact) {
  for (double v : {0.1, 1.0 / 3.0, -2.718281828459045e-300, 6.02214076e23, 5e-324}) {
    const auto s = format_number(v);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    EXPECT_EQ(back, v) << s;
  }
  Dataset d({"x"});
  d.add_row({0.1});
  const auto dir = fresh_dir("roundtrip");
  fs::create_directories(dir);
  emit_series(d, OutputFormat::json, dir / "x.json");
  const auto j = nlohmann::json::parse(slurp(dir / "x.json"));
  EXPECT_EQ(j["records"][0]["x"].get<double>(), 0.1);
  emit_series(d, OutputFormat::csv, dir / "x.csv");
  EXPECT_EQ(slurp(dir / "x.csv"), "x\n0.10000000000000001\n");
  EXPECT_EQ(std::stod("0.10000000000000001"), 0.1);
}

TEST(Emit, EmptyDatasetIsHeaderOnly) {
  const auto dir = fresh_dir("empty");
  fs::create_directories(dir);
  emit_series(Dataset({"a", "b"}), OutputFormat::csv, dir / "e.csv");
  EXPECT_EQ(slurp(dir / "e.csv"), "a,b\n");
  emit_series(Dataset({"a", "b"}), OutputFormat::json, dir / "e.json");
  EXPECT_TRUE(nlohmann::json::parse(slurp(dir / "e.json"))["records"].empty());
}

TEST(Emit, MetadataRowsAndNonFiniteValues) {
  Dataset d({"v"});
  d.metadata.push_back({"scenario", "ramsey"});
  d.add_row({std::numeric_limits<double>::quiet_NaN()});
  EXPECT_EQ(render_csv(d), "# scenario: ramsey\nv\nnan\n");
  EXPECT_TRUE(dataset_json(d)["records"][0]["v"].is_null());
}

TEST(Emit, IoFailureNamesPath) {
  try {
    emit_series(Dataset({"a"}), OutputFormat::csv, "/nonexistent/dir/out.csv");
    FAIL() << "expected an I/O error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/out.csv"), std::string::npos);
  }
}

TEST(Run, ResonantRabiReachesFullInversion) {
  auto j = minimal_rabi();
  j["numerics"]["t_final"] = mphase::two_pi / 0.01;
  j["numerics"]["dt"] = 0.01;
  const auto dir = fresh_dir("rabi");
  const auto m = run_scenario(parse_config(j), dir);
  // Counter-rotating terms of the full coupling perturb P_e at the level
  // Omega / (4 omega_e) = 2.5e-3.
  EXPECT_NEAR(m.summary["max_population_e"].get<double>(), 1.0, 5e-3);
  EXPECT_EQ(m.outputs.back(), "rabi_manifest.json");
  EXPECT_EQ(m.outputs.size(), 2u);
  const auto manifest = nlohmann::json::parse(slurp(dir / "rabi_manifest.json"));
  EXPECT_EQ(manifest["config"], j);
  EXPECT_EQ(manifest["version"], MPHASE_VERSION);
  EXPECT_TRUE(manifest["wall_clock_seconds"].is_number());

  j["numerics"]["model"] = "rwa";
  const auto rwa = run_scenario(parse_config(j), fresh_dir("rabi_rwa"));
  EXPECT_NEAR(rwa.summary["max_population_e"].get<double>(), 1.0, 1e-6);
}

TEST(Run, DoubleSlitPhaseFlip) {
  const auto m0 = run_scenario(parse_config(double_slit(0.0)), fresh_dir("ds0"));
  const auto m1 = run_scenario(parse_config(double_slit(mphase::pi)), fresh_dir("ds1"));
  const double shift = m1.summary["fringe_phase"].get<double>() - m0.summary["fringe_phase"].get<double>();
  const double error = std::abs(mphase::wrap_angle(shift - mphase::pi)) / mphase::two_pi;
  EXPECT_LT(error, 0.01);
}

TEST(Run, IdenticalConfigGivesIdenticalFiles) {
  auto j = nlohmann::json::parse(R"({
    "scenario": "trajectories", "seed": 99, "packet": {"sigma": 2.0},
    "numerics": {"length": 100.0, "points": 512, "t_final": 8.0, "steps": 64, "record_every": 16},
    "count": 500
  })");
  const auto dir_a = fresh_dir("det_a"), dir_b = fresh_dir("det_b"), dir_c = fresh_dir("det_c");
  const auto a = run_scenario(parse_config(j), dir_a);
  const auto b = run_scenario(parse_config(j), dir_b);
  ASSERT_EQ(a.outputs, b.outputs);
  for (const auto& f : a.outputs) {
    if (f.ends_with(".csv")) {
      EXPECT_EQ(slurp(dir_a / f), slurp(dir_b / f)) << f;
    }
  }
  j["seed"] = 100;
  run_scenario(parse_config(j), dir_c);
  EXPECT_NE(slurp(dir_a / "trajectories_ensemble.csv"), slurp(dir_c / "trajectories_ensemble.csv"));
}

TEST(Run, ShortRamseyScanKeepsItsData) {
  auto j = nlohmann::json::parse(R"({
    "scenario": "ramsey", "system": {"omega_e": 2000.0},
    "pulses": {"carrier_frequency": 1999.0, "rabi_frequency": 40.0},
    "delays": [1.0, 2.0], "relative_phases": [0.0]
  })");
  const auto dir = fresh_dir("ramsey_short");
  const auto m = run_scenario(parse_config(j), dir);
  EXPECT_TRUE(m.summary.contains("fringe_fit_error"));
  EXPECT_TRUE(fs::exists(dir / "ramsey_scan.csv"));
}

TEST(Run, RuntimeFailureNamesScenario) {
  const auto dir = fresh_dir("blocked");
  fs::create_directories(dir);
  std::ofstream(dir / "file") << "x";
  try {
    run_scenario(parse_config(minimal_rabi()), dir / "file");
    FAIL() << "expected a runtime failure";
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("file"), std::string::npos);
  }
}

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MPHASE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  const auto dir = fresh_dir("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "ok.json") << minimal_rabi().dump();
  auto bad = minimal_rabi();
  bad["system"]["gama_e"] = 0.0;
  std::ofstream(dir / "bad.json") << bad.dump();
  auto coarse = minimal_rabi();
  coarse["numerics"]["dt"] = 1.0;
  std::ofstream(dir / "coarse.json") << coarse.dump();

  const auto out = (dir / "out").string();
  EXPECT_EQ(run_cli("rabi --config " + (dir / "ok.json").string() + " --output-dir " + out), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "rabi_manifest.json"));
  EXPECT_EQ(run_cli("rabi --config " + (dir / "bad.json").string() + " --output-dir " + out + "_bad"), 2);
  EXPECT_EQ(run_cli("rabi --config " + (dir / "coarse.json").string() + " --output-dir " + out + "_bad"), 2);
  EXPECT_FALSE(fs::exists(dir / "out_bad"));  // nothing written for invalid configs
  EXPECT_EQ(run_cli("dressed --config " + (dir / "ok.json").string() + " --output-dir " + out), 2);
  EXPECT_EQ(run_cli("rabi"), 2);
  // An output path that cannot be a directory fails at run time.
  std::ofstream(dir / "file") << "x";
  EXPECT_EQ(run_cli("rabi --config " + (dir / "ok.json").string() + " --output-dir " + (dir / "file").string()), 1);

  ::setenv(output_dir_env, (dir / "env").c_str(), 1);
  EXPECT_EQ(run_cli("rabi --config " + (dir / "ok.json").string()), 0);
  ::unsetenv(output_dir_env);
  EXPECT_TRUE(fs::exists(dir / "env" / "rabi_manifest.json"));
}
