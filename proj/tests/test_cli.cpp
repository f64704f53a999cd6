#include "oracles.hpp"

#include "refocus/cli.hpp"
#include "refocus/spectral.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

using namespace refocus;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "refocus");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("refocus_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    unsetenv("REFOCUS_SEED");
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir / name, std::ios::binary) << text;
    return dir / name;
  }

  fs::path toy_config() {
    return write("toy.json", R"({
      "synth": {"channels": 3, "length": 400, "shared": [{"period": 8, "amplitude": 0.5, "channels": [0, 1]}]},
      "T": 24, "F": 8, "D": 16, "Q": 8, "N": 1, "K": 5,
      "lr": 1e-3, "batch_size": 16, "max_epochs": 2, "seed": 3,
      "ket": {"enabled": true, "schedule": "alternate"}
    })");
  }

  fs::path series_csv(const std::string& name, const Eigen::VectorXd& x) {
    std::ostringstream os;
    os << "t,x\n";
    for (Index t = 0; t < x.size(); ++t) os << t << ',' << std::setprecision(17) << x[t] << '\n';
    return write(name, os.str());
  }

  fs::path dir;
};

}  // namespace

TEST_F(CliTest, TrainWritesArtifactsDeterministically) {
  const auto cfg = toy_config();
  const auto r1 = run_cli({"train", "--config", cfg.string(), "--out", (dir / "a").string()});
  ASSERT_EQ(r1.code, 0) << r1.err;
  for (const char* f : {"checkpoint.json", "history.csv", "metrics.json"}) EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
  const auto r2 = run_cli({"train", "--config", cfg.string(), "--out", (dir / "b").string()});
  ASSERT_EQ(r2.code, 0);
  EXPECT_EQ(slurp(dir / "a" / "metrics.json"), slurp(dir / "b" / "metrics.json"));
  EXPECT_EQ(slurp(dir / "a" / "history.csv"), slurp(dir / "b" / "history.csv"));
  const auto metrics = nlohmann::json::parse(slurp(dir / "a" / "metrics.json"));
  EXPECT_EQ(metrics["epochs_run"], 2);
  EXPECT_GT(metrics["test"]["mse"].get<double>(), 0.0);
}

TEST_F(CliTest, SeedFlagWinsOverEnvironment) {
  const auto cfg = toy_config();
  setenv("REFOCUS_SEED", "11", 1);
  ASSERT_EQ(run_cli({"train", "--config", cfg.string(), "--out", (dir / "env").string()}).code, 0);
  ASSERT_EQ(run_cli({"train", "--config", cfg.string(), "--out", (dir / "flag").string(), "--seed", "12"}).code, 0);
  unsetenv("REFOCUS_SEED");
  ASSERT_EQ(run_cli({"train", "--config", cfg.string(), "--out", (dir / "plain").string(), "--seed", "11"}).code, 0);
  const auto env = nlohmann::json::parse(slurp(dir / "env" / "metrics.json"));
  const auto flag = nlohmann::json::parse(slurp(dir / "flag" / "metrics.json"));
  EXPECT_EQ(env["seed"], 11);
  EXPECT_EQ(flag["seed"], 12);
  EXPECT_EQ(slurp(dir / "env" / "metrics.json"), slurp(dir / "plain" / "metrics.json"));
}

TEST_F(CliTest, UnknownConfigKeyExitsTwoNamingIt) {
  const auto cfg = write("bad.json", R"({"synth": {}, "T": 16, "F": 4, "K": 3, "learning_rate": 0.1})");
  const auto r = run_cli({"train", "--config", cfg.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("learning_rate"), std::string::npos) << r.err;
  const auto nested = write("bad2.json", R"({"synth": {}, "T": 16, "F": 4, "K": 3, "ket": {"mode": 1}})");
  EXPECT_NE(run_cli({"train", "--config", nested.string()}).err.find("ket.mode"), std::string::npos);
}

TEST_F(CliTest, ErrorClassesMapToExitCodes) {
  EXPECT_EQ(run_cli({"train", "--config", (dir / "missing.json").string()}).code, 3);
  EXPECT_EQ(run_cli({"train", "--config", write("broken.json", "{").string()}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"verify", "--bogus", "1"}).code, 2);
  EXPECT_EQ(run_cli({"verify", "nothing"}).code, 2);
  EXPECT_EQ(run_cli({"spectrum", "--input", (dir / "none.csv").string()}).code, 3);
  const auto bad_csv = write("bad.csv", "t,x\n0,1\n1,zz\n");
  const auto r = run_cli({"spectrum", "--input", bad_csv.string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("row 2"), std::string::npos) << r.err;
}

TEST_F(CliTest, EvalReloadsCheckpoint) {
  const auto cfg = toy_config();
  ASSERT_EQ(run_cli({"train", "--config", cfg.string(), "--out", (dir / "run").string()}).code, 0);
  const auto metrics = nlohmann::json::parse(slurp(dir / "run" / "metrics.json"));
  const auto r = run_cli({"eval", "--config", cfg.string(), "--checkpoint", (dir / "run" / "checkpoint.json").string(),
                          "--split", "test"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["mse"], metrics["test"]["mse"]);
  EXPECT_EQ(run_cli({"eval", "--config", cfg.string(), "--checkpoint", (dir / "nope.json").string()}).code, 3);
  EXPECT_EQ(run_cli({"eval", "--config", cfg.string(), "--baseline", "persistence", "--split", "holdout"}).code, 2);
}

TEST_F(CliTest, EvalPersistenceOnConstantFixtureIsZero) {
  std::ostringstream csv;
  csv << "date,a,b\n";
  for (int t = 0; t < 120; ++t) csv << t << ",2.5,-1\n";
  write("flat.csv", csv.str());
  const auto cfg = write("flat.json", R"({"dataset": "flat.csv", "T": 16, "F": 4, "K": 3})");
  const auto r = run_cli({"eval", "--config", cfg.string(), "--baseline", "persistence", "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("test,0,0,"), std::string::npos) << r.out;
}

TEST_F(CliTest, VerifyScopes) {
  for (const char* scope : {"revin", "ket", "grad"}) {
    const auto r = run_cli({"verify", scope});
    EXPECT_EQ(r.code, 0) << scope << "\n" << r.out;
    EXPECT_NE(r.out.find("PASS"), std::string::npos);
  }
  const auto j = nlohmann::json::parse(run_cli({"verify", "ameo", "--format", "json"}).out);
  bool identity_seen = false;
  for (const auto& c : j["checks"])
    if (c["check"] == "ameo.circular_spectrum_identity") {
      identity_seen = true;
      EXPECT_TRUE(c["passed"].get<bool>());
      EXPECT_LT(c["value"].get<double>(), 1e-9);
    }
  EXPECT_TRUE(identity_seen);
}

TEST_F(CliTest, VerifyAmeoReportsTheMidBandClause) {
  // The G(f) mid-band clause does not hold for K=25, T=96, so the suite
  // reports it and exits 1.
  const auto r = run_cli({"verify", "ameo"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("g_decay.mid_minus_low_mean_gain"), std::string::npos);
}

TEST_F(CliTest, SpectrumOfBinFiveSinusoid) {
  const auto input = series_csv("sine.csv", oracle::sinusoid(64, 5.0));
  const auto r = run_cli({"spectrum", "--input", input.string(), "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const auto e = j["channels"][0]["energy_before"].get<std::vector<double>>();
  ASSERT_EQ(e.size(), 33u);
  const auto peak = std::max_element(e.begin(), e.end()) - e.begin();
  EXPECT_EQ(peak, 5);
  double rest = 0;
  for (std::size_t f = 0; f < e.size(); ++f)
    if (f != 5) rest += e[f];
  EXPECT_LT(rest, 1e-18 * e[5]);
}

TEST_F(CliTest, SpectrumLowpassZeroesAboveCutoff) {
  std::mt19937_64 rng(91);
  const auto input = series_csv("noise.csv", oracle::random_vector(64, rng));
  ASSERT_EQ(run_cli({"spectrum", "--input", input.string(), "--transform", "lowpass", "--f-hi", "6", "--out",
                     (dir / "spec").string()})
                .code,
            0);
  std::istringstream csv(slurp(dir / "spec" / "spectrum.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "channel,f,energy_before,energy_after,mid_gap_before,mid_gap_after\r");
  int rows = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    const int f = std::stoi(cells[1]);
    if (f > 6) {
      EXPECT_LT(std::stod(cells[3]), 1e-18) << line;
    }
    ++rows;
  }
  EXPECT_EQ(rows, 33);
  EXPECT_TRUE(fs::exists(dir / "spec" / "spectrum.json"));
}

TEST_F(CliTest, SpectrumAmeoRaisesMidGap) {
  Rng rng(92);
  const auto input = series_csv("midgap.csv", synth_mid_gap(96, 4, 0.05, rng));
  const auto r = run_cli({"spectrum", "--input", input.string(), "--transform", "ameo", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ch = nlohmann::json::parse(r.out)["channels"][0];
  // Recompute the metric from the emitted energies.
  auto metric = [](const std::vector<double>& e) {
    const auto b = spectral::bands(96);
    double mid = 0, total = 0;
    for (Index f = 1; f <= b.high_end; ++f) {
      total += e[std::size_t(f)];
      if (f >= b.mid_begin && f < b.mid_end) mid += e[std::size_t(f)];
    }
    return mid / total;
  };
  const double before = metric(ch["energy_before"].get<std::vector<double>>());
  const double after = metric(ch["energy_after"].get<std::vector<double>>());
  EXPECT_NEAR(before, ch["mid_gap_before"].get<double>(), 1e-12);
  EXPECT_NEAR(after, ch["mid_gap_after"].get<double>(), 1e-12);
  EXPECT_GT(after, before);
}

TEST_F(CliTest, SynthIsByteIdenticalForFixedSeed) {
  for (const char* kind : {"forecast", "shared_key", "mid_gap"}) {
    const auto a = run_cli({"synth", "--kind", kind, "--seed", "5", "--length", "128"});
    const auto b = run_cli({"synth", "--kind", kind, "--seed", "5", "--length", "128"});
    ASSERT_EQ(a.code, 0) << kind << ": " << a.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out, run_cli({"synth", "--kind", kind, "--seed", "6", "--length", "128"}).out);
  }
  ASSERT_EQ(run_cli({"synth", "--kind", "shared_key", "--out", (dir / "s").string()}).code, 0);
  EXPECT_EQ(load_csv((dir / "s" / "synth.csv").string()).channels(), 4);
  EXPECT_EQ(run_cli({"synth", "--kind", "shared_key", "--key-bin", "90"}).code, 2);
}

TEST_F(CliTest, GradcheckPasses) {
  const auto r = run_cli({"gradcheck", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_LT(j["max_rel_error"].get<double>(), 1e-4);
  EXPECT_TRUE(j["passed"].get<bool>());
}
