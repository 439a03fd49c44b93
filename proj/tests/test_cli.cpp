#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int exit_code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sgseg_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string("\"") + SGSEG_CLI_PATH + "\" " + args + " > \"" + out.string() +
                            "\" 2> \"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WEXITSTATUS(status), slurp(out), slurp(err)};
  }

  std::string p(const std::string& name) const { return "\"" + (dir_ / name).string() + "\""; }

  void small_synth(const std::string& sub, const std::string& extra = "") const {
    const CliRun r = run("synth --cells 6 --molecules-per-cell 60 --types 2 --genes 8 --seed 3 --out-dir " + p(sub) +
                      " " + extra);
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpListsSubcommandsAndFlags) {
  const CliRun r = run("--help");
  EXPECT_EQ(r.exit_code, 0);
  for (const char* s : {"segment", "eval", "contours", "synth"}) EXPECT_NE(r.out.find(s), std::string::npos);
  const CliRun seg = run("segment --help");
  for (const char* s : {"--input", "--r-cell", "--k", "--n-min", "--seed", "--config", "--out-dir", "--no-prefilter",
                        "--gaussian-features"})
    EXPECT_NE(seg.out.find(s), std::string::npos) << s;
}

TEST_F(Cli, UsageErrorsExitTwo) {
  small_synth("d");
  EXPECT_EQ(run("segment --input " + p("d/molecules.csv")).exit_code, 2);
  EXPECT_EQ(run("segment --input " + p("d/molecules.csv") + " --r-cell 8 --no-such-flag").exit_code, 2);
  EXPECT_EQ(run("").exit_code, 2);
  EXPECT_EQ(run("synth --cells 0").exit_code, 2);
}

TEST_F(Cli, UnreadableInputExitsOneWithIoMessage) {
  const CliRun r = run("segment --input " + p("missing.csv") + " --r-cell 8 --out-dir " + p("o"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("Io"), std::string::npos);
  EXPECT_NE(r.err.find("missing.csv"), std::string::npos);
}

TEST_F(Cli, SegmentWritesAssignmentsAndReport) {
  small_synth("d");
  const CliRun r = run("segment --input " + p("d/molecules.csv") + " --r-cell 8 --k 15 --n-min 15 --seed 2 --out-dir " +
                    p("o") + " --max-epochs 20 --patience 5");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const std::string assign = slurp(dir_ / "o/assignments.csv");
  EXPECT_EQ(assign.rfind("molecule_id,x,y,gene,cell_id\n", 0), 0u);
  const auto report = nlohmann::json::parse(slurp(dir_ / "o/report.json"));
  for (const char* key : {"cell_count", "assigned_fraction", "loss_history", "timings", "config"})
    EXPECT_TRUE(report.contains(key)) << key;
  EXPECT_EQ(report["config"]["seed"], 2);
  EXPECT_EQ(report["config"]["k"], 15);
  EXPECT_LE(report["loss_history"].size(), 20u);
}

TEST_F(Cli, ConfigFileWithFlagOverrides) {
  small_synth("d");
  {
    std::ofstream cfg(dir_ / "run.cfg");
    cfg << "k = 12\nn_min = 7\nmax-epochs = 4\npatience = 1\nno-prefilter = true\n";
  }
  const CliRun r = run("segment --input " + p("d/molecules.csv") + " --r-cell 8 --config " + p("run.cfg") +
                    " --n-min 9 --out-dir " + p("o"));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto report = nlohmann::json::parse(slurp(dir_ / "o/report.json"));
  EXPECT_EQ(report["config"]["k"], 12);
  EXPECT_EQ(report["config"]["n_min"], 9);
  EXPECT_EQ(report["config"]["prefilter"], false);
  EXPECT_EQ(report["loss_history"].size(), 4u);
  {
    std::ofstream bad(dir_ / "bad.cfg");
    bad << "not-a-flag = 1\n";
  }
  EXPECT_EQ(run("segment --input " + p("d/molecules.csv") + " --r-cell 8 --config " + p("bad.cfg")).exit_code, 2);
}

TEST_F(Cli, SegmentDumpsArtifacts) {
  small_synth("d");
  const CliRun r = run("segment --input " + p("d/molecules.csv") + " --r-cell 8 --k 10 --out-dir " + p("o") +
                    " --max-epochs 3 --patience 1 --dump-features " + p("f.csv") + " --dump-graph " + p("g.csv") +
                    " --save-model " + p("m.bin"));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(slurp(dir_ / "g.csv").rfind("i,j,sign,weight\n", 0), 0u);
  EXPECT_EQ(slurp(dir_ / "f.csv").rfind("molecule_id,", 0), 0u);
  EXPECT_EQ(slurp(dir_ / "m.bin").rfind("SGPNET01", 0), 0u);
}

TEST_F(Cli, EvalSelfAndDisjointAndMisaligned) {
  small_synth("d");
  const CliRun self = run("eval --a " + p("d/truth.csv") + " --b " + p("d/truth.csv") + " --out " + p("e"));
  ASSERT_EQ(self.exit_code, 0) << self.err;
  EXPECT_NE(self.out.find("median_dice: 1"), std::string::npos) << self.out;
  const auto match = nlohmann::json::parse(slurp(dir_ / "e/match.json"));
  EXPECT_EQ(match["median_dice"], 1.0);
  EXPECT_EQ(match["dice_histogram"]["counts"].size(), 20u);
  EXPECT_EQ(slurp(dir_ / "e/pairs.csv").rfind("cell_a,cell_b,dice\n", 0), 0u);

  {
    std::ofstream a(dir_ / "a.csv"), b(dir_ / "b.csv"), c(dir_ / "c.csv");
    a << "molecule_id,cell_id\n0,0\n1,0\n2,-1\n3,-1\n";
    b << "molecule_id,cell_id\n0,-1\n1,-1\n2,0\n3,0\n";
    c << "molecule_id,cell_id\n10,0\n11,0\n12,-1\n13,-1\n";
  }
  const CliRun disjoint = run("eval --a " + p("a.csv") + " --b " + p("b.csv") + " --out " + p("e2"));
  ASSERT_EQ(disjoint.exit_code, 0) << disjoint.err;
  EXPECT_NE(disjoint.out.find("median_dice: null"), std::string::npos);
  EXPECT_TRUE(nlohmann::json::parse(slurp(dir_ / "e2/match.json"))["median_dice"].is_null());

  const CliRun bad = run("eval --a " + p("a.csv") + " --b " + p("c.csv") + " --out " + p("e3"));
  EXPECT_EQ(bad.exit_code, 1);
  EXPECT_NE(bad.err.find("AlignmentError"), std::string::npos);
}

TEST_F(Cli, EvalAlignsRowOrderById) {
  {
    std::ofstream a(dir_ / "a.csv"), b(dir_ / "b.csv");
    a << "molecule_id,cell_id\n0,0\n1,0\n2,1\n3,1\n";
    b << "molecule_id,cell_id\n3,5\n2,5\n1,4\n0,4\n";
  }
  const CliRun r = run("eval --a " + p("a.csv") + " --b " + p("b.csv") + " --out " + p("e"));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("median_dice: 1"), std::string::npos);
}

TEST_F(Cli, SynthCountsAndDeterminism) {
  const CliRun r = run("synth --cells 4 --molecules-per-cell 100 --noise 0 --seed 1 --out-dir " + p("s1"));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  std::istringstream lines(slurp(dir_ / "s1/molecules.csv"));
  std::string line;
  std::size_t rows = 0;
  std::getline(lines, line);
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 400u);
  ASSERT_EQ(run("synth --cells 4 --molecules-per-cell 100 --noise 0 --seed 1 --out-dir " + p("s2")).exit_code, 0);
  EXPECT_EQ(slurp(dir_ / "s1/molecules.csv"), slurp(dir_ / "s2/molecules.csv"));
  EXPECT_EQ(slurp(dir_ / "s1/truth.csv"), slurp(dir_ / "s2/truth.csv"));

  ASSERT_EQ(run("synth --cells 4 --molecules-per-cell 90 --noise 0.1 --seed 1 --out-dir " + p("s3")).exit_code, 0);
  std::istringstream truth(slurp(dir_ / "s3/truth.csv"));
  std::size_t total = 0, background = 0;
  std::getline(truth, line);
  while (std::getline(truth, line)) {
    ++total;
    background += line.substr(line.rfind(',') + 1) == "-1";
  }
  EXPECT_EQ(total, 400u);
  EXPECT_EQ(background, 40u);
}

TEST_F(Cli, ContoursWriteGeoJson) {
  small_synth("d");
  const CliRun r = run("contours --assignments " + p("d/truth.csv") + " --bin-size 2 --sigma 2 --out " + p("c.geojson") +
                    " --vertices " + p("v.csv"));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto doc = nlohmann::json::parse(slurp(dir_ / "c.geojson"));
  EXPECT_EQ(doc["type"], "FeatureCollection");
  EXPECT_EQ(doc["features"].size(), 6u);
  EXPECT_EQ(slurp(dir_ / "v.csv").rfind("cell_id,vertex,x,y\n", 0), 0u);
  const CliRun defaults = run("contours --assignments " + p("d/truth.csv") + " --out " + p("c2.geojson"));
  EXPECT_EQ(defaults.exit_code, 0) << defaults.err;
  {
    std::ofstream bare(dir_ / "bare.csv");
    bare << "molecule_id,cell_id\n0,0\n";
  }
  EXPECT_EQ(run("contours --assignments " + p("bare.csv") + " --out " + p("c3.geojson")).exit_code, 1);
}
