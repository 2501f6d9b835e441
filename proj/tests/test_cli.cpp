#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("ivg_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result run(const std::string& args) {
  static int counter = 0;
  const fs::path out = scratch() / ("stdout_" + std::to_string(counter));
  const fs::path err = scratch() / ("stderr_" + std::to_string(counter++));
  const std::string cmd = std::string("\"") + IVG_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string smoke_config() { return std::string(IVG_CONFIG_DIR) + "/smoke.json"; }

// One smoke run shared by the tests that only read its outputs.
const fs::path& smoke_run() {
  static const fs::path dir = [] {
    const fs::path d = scratch() / "smoke";
    const Result r = run("train --config \"" + smoke_config() + "\" --out \"" + d.string() + "\"");
    if (r.code != 0) throw std::runtime_error("smoke training failed: " + r.err);
    return d;
  }();
  return dir;
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

class ScratchCleanup : public ::testing::Environment {
 public:
  void TearDown() override { fs::remove_all(scratch()); }
};

const auto* const cleanup = ::testing::AddGlobalTestEnvironment(new ScratchCleanup);

}  // namespace

TEST(Cli, HelpExitsZero) {
  const Result r = run("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("train"), std::string::npos);
  EXPECT_EQ(run("traverse --help").code, 0);
}

TEST(Cli, UnknownFlagIsAUsageError) {
  EXPECT_EQ(run("train --frobnicate").code, 2);
  EXPECT_EQ(run("").code, 2);
}

TEST(Cli, MissingConfigNamesThePath) {
  const Result r = run("train --config /no/such/file.json --out \"" + (scratch() / "missing").string() + "\"");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/no/such/file.json"), std::string::npos) << r.err;
}

TEST(Cli, BadConfigIsExitTwo) {
  const fs::path cfg = scratch() / "bad.json";
  std::ofstream(cfg) << R"({"prior": {"zdim": 2}})";
  const Result r = run("train --config \"" + cfg.string() + "\" --out \"" + (scratch() / "bad").string() + "\"");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("prior.zdim"), std::string::npos) << r.err;
}

TEST(Cli, SmokeTrainingWritesArtifacts) {
  const fs::path& dir = smoke_run();
  EXPECT_TRUE(fs::exists(dir / "checkpoint.ivgn"));
  EXPECT_TRUE(fs::exists(dir / "metrics.json"));
  const std::string log = slurp(dir / "runlog.csv");
  // 20 stage-one steps of 5 critic records (4 terms) and one generator record
  // (5 terms), then 10 inference records (5 terms), plus the header.
  EXPECT_EQ(count_lines(log), 1u + 20 * (5 * 4 + 5) + 10 * 5);
  const auto metrics = nlohmann::json::parse(slurp(dir / "metrics.json"));
  for (const char* key : {"cluster_accuracy", "disentanglement_score", "reconstruction_mse",
                          "baseline_reconstruction_mse", "test_elbo"}) {
    EXPECT_TRUE(metrics.contains(key)) << key;
  }
}

TEST(Cli, TrainingIsReproducible) {
  const fs::path other = scratch() / "smoke_again";
  ASSERT_EQ(run("train --config \"" + smoke_config() + "\" --out \"" + other.string() + "\"").code, 0);
  EXPECT_EQ(slurp(other / "checkpoint.ivgn"), slurp(smoke_run() / "checkpoint.ivgn"));
  EXPECT_EQ(slurp(other / "runlog.csv"), slurp(smoke_run() / "runlog.csv"));
}

TEST(Cli, ResumeOfFinishedRunChangesNothing) {
  const fs::path copy = scratch() / "resume";
  fs::create_directories(copy);
  for (const char* f : {"checkpoint.ivgn", "runlog.csv"}) fs::copy_file(smoke_run() / f, copy / f);
  const Result r = run("train --config \"" + smoke_config() + "\" --out \"" + copy.string() + "\" --resume");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(copy / "checkpoint.ivgn"), slurp(smoke_run() / "checkpoint.ivgn"));
  EXPECT_EQ(slurp(copy / "runlog.csv"), slurp(smoke_run() / "runlog.csv"));
}

TEST(Cli, ResumeWithoutCheckpointFails) {
  const Result r = run("train --config \"" + smoke_config() + "\" --out \"" + (scratch() / "empty").string() +
                       "\" --resume");
  EXPECT_EQ(r.code, 4);
}

TEST(Cli, EvalPrintsMetricsDeterministically) {
  const std::string args =
      "eval --checkpoint \"" + (smoke_run() / "checkpoint.ivgn").string() + "\" --config \"" + smoke_config() + "\"";
  const Result a = run(args);
  const Result b = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto j = nlohmann::json::parse(a.out);
  EXPECT_GE(j.at("cluster_accuracy").get<double>(), 1.0 / 3.0);
  EXPECT_TRUE(j.contains("test_elbo"));
}

TEST(Cli, CorruptedCheckpointIsExitFour) {
  std::string bytes = slurp(smoke_run() / "checkpoint.ivgn");
  bytes[bytes.size() / 3] ^= 0x40;
  const fs::path bad = scratch() / "corrupt.ivgn";
  std::ofstream(bad, std::ios::binary) << bytes;
  const Result r = run("eval --checkpoint \"" + bad.string() + "\" --config \"" + smoke_config() + "\"");
  EXPECT_EQ(r.code, 4);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(run("eval --checkpoint /no/such.ivgn --config \"" + smoke_config() + "\"").code, 4);
}

TEST(Cli, TraverseWritesMontage) {
  const fs::path a = scratch() / "trav_a.pgm";
  const fs::path b = scratch() / "trav_b.pgm";
  const std::string base = "traverse --checkpoint \"" + (smoke_run() / "checkpoint.ivgn").string() +
                           "\" --latent c0 --steps 7 --rows 4 ";
  ASSERT_EQ(run(base + "\"" + a.string() + "\"").code, 0);
  ASSERT_EQ(run(base + "\"" + b.string() + "\"").code, 0);
  const std::string img = slurp(a);
  // 7 columns of 32 pixels plus 6 separators, 4 rows plus 3 separators.
  const std::string header = "P5\n230 131\n255\n";
  EXPECT_EQ(img.substr(0, header.size()), header);
  EXPECT_EQ(img.size(), header.size() + 230u * 131u);
  EXPECT_EQ(img, slurp(b));

  const fs::path d = scratch() / "trav_d.pgm";
  ASSERT_EQ(run("traverse --checkpoint \"" + (smoke_run() / "checkpoint.ivgn").string() + "\" --latent d --rows 1 \"" +
                d.string() + "\"")
                .code,
            0);
  EXPECT_EQ(slurp(d).substr(0, 12), "P5\n98 32\n255");
}

TEST(Cli, TraverseRejectsBadLatent) {
  const std::string ckpt = (smoke_run() / "checkpoint.ivgn").string();
  EXPECT_EQ(run("traverse --checkpoint \"" + ckpt + "\" --latent c9 \"" + (scratch() / "x.pgm").string() + "\"").code,
            2);
  EXPECT_EQ(run("traverse --checkpoint \"" + ckpt + "\" --latent q0 \"" + (scratch() / "x.pgm").string() + "\"").code,
            2);
  EXPECT_EQ(
      run("traverse --checkpoint \"" + ckpt + "\" --latent c0 --steps 1 \"" + (scratch() / "x.pgm").string() + "\"")
          .code,
      2);
}

TEST(Cli, ExportDatasetIsCompleteAndStable) {
  const fs::path a = scratch() / "export_a";
  const fs::path b = scratch() / "export_b";
  ASSERT_EQ(run("export-dataset --dir \"" + a.string() + "\"").code, 0);
  ASSERT_EQ(run("export-dataset --dir \"" + b.string() + "\"").code, 0);
  std::size_t pgm = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    if (entry.path().extension() != ".pgm") continue;
    ++pgm;
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename()));
  }
  EXPECT_EQ(pgm, 192u);
  const std::string index = slurp(a / "index.csv");
  EXPECT_EQ(count_lines(index), 193u);
  EXPECT_EQ(index.substr(0, index.find('\n')), "file,shape,pos_x,pos_y");
  EXPECT_EQ(index, slurp(b / "index.csv"));
  EXPECT_EQ(slurp(a / "disk_3_4.pgm").substr(0, 13), "P5\n32 32\n255\n");
}
