#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dkt/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("dkt_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    std::ofstream(d / "small.cfg") << "num_classes = 3\ntrain_per_class = 2\ntest_per_class = 2\n"
                                      "frames = 3\nstride = 1\nheight = 8\nwidth = 8\npatch = 4\n"
                                      "dim = 8\nheads = 2\nlayers = 2\nepochs = 2\n";
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(DKT_CLI_PATH) + " " + args + " >" + (workdir() / "stdout.txt").string() +
                          " 2>" + (workdir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string p(const std::string& name) { return (workdir() / name).string(); }
std::string small() { return "--config " + p("small.cfg"); }
std::string slurp(const fs::path& f) { return dkt::detail::read_file(f); }

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

bool no_partials() {
  for (const auto& e : fs::directory_iterator(workdir()))
    if (e.path().string().ends_with(".partial")) return false;
  return true;
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("gen-data"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, ConfigErrorsExitOneAndNameTheKey) {
  EXPECT_EQ(run("gen-data --out " + p("bad") + " --set no_such_key=1"), 1);
  EXPECT_NE(slurp(workdir() / "stderr.txt").find("no_such_key"), std::string::npos);
  EXPECT_EQ(run("gen-data --out " + p("bad") + " --set epochs=0"), 1);
  EXPECT_NE(slurp(workdir() / "stderr.txt").find("epochs"), std::string::npos);
  EXPECT_FALSE(fs::exists(p("bad")));
  EXPECT_TRUE(no_partials());
}

TEST(Cli, GenDataIsDeterministic) {
  ASSERT_EQ(run("gen-data " + small() + " --out " + p("data_a")), 0);
  ASSERT_EQ(run("gen-data " + small() + " --out " + p("data_b")), 0);
  for (const char* f : {"train.manifest", "test.manifest", "config.txt", "clips/train_00003_tgt.dkvc"})
    EXPECT_EQ(slurp(workdir() / "data_a" / f), slurp(workdir() / "data_b" / f)) << f;
  EXPECT_EQ(lines(slurp(workdir() / "data_a" / "train.manifest")), 12u);  // 6 pairs
  EXPECT_EQ(lines(slurp(workdir() / "data_a" / "test.manifest")), 12u);
  ASSERT_EQ(run("gen-data " + small() + " --seed 5 --out " + p("data_c")), 0);
  EXPECT_NE(slurp(workdir() / "data_a" / "clips/train_00000_src.dkvc"),
            slurp(workdir() / "data_c" / "clips/train_00000_src.dkvc"));
  EXPECT_NE(slurp(workdir() / "data_c" / "config.txt").find("seed = 5"), std::string::npos);
  EXPECT_TRUE(no_partials());
}

TEST(Cli, TrainEvalAndRerunAreReproducible) {
  ASSERT_EQ(run("gen-data " + small() + " --out " + p("data")), 0);
  ASSERT_EQ(run("train " + small() + " --data " + p("data") + " --out " + p("run1")), 0);
  ASSERT_EQ(run("train " + small() + " --data " + p("data") + " --out " + p("run2")), 0);
  for (const char* f : {"checkpoint.dktf", "metrics.csv", "confusion_target.csv", "config.txt"})
    EXPECT_EQ(slurp(workdir() / "run1" / f), slurp(workdir() / "run2" / f)) << f;
  EXPECT_EQ(lines(slurp(workdir() / "run1" / "metrics.csv")), 3u);

  ASSERT_EQ(run("eval --checkpoint " + p("run1/checkpoint.dktf") + " --data " + p("data") + " --split target --out " +
                p("ev")),
            0);
  auto conf = slurp(workdir() / "ev" / "confusion_target.csv");
  EXPECT_EQ(conf, slurp(workdir() / "run1" / "confusion_target.csv"));
  EXPECT_TRUE(fs::exists(workdir() / "ev" / "config.txt"));
  auto out = slurp(workdir() / "stdout.txt");
  EXPECT_EQ(out.rfind("top1 ", 0), 0u);

  // rerunning into an existing directory replaces it
  ASSERT_EQ(run("train " + small() + " --data " + p("data") + " --out " + p("run1")), 0);
  EXPECT_EQ(slurp(workdir() / "run1" / "checkpoint.dktf"), slurp(workdir() / "run2" / "checkpoint.dktf"));
  EXPECT_TRUE(no_partials());
}

TEST(Cli, MissingDatasetFails) {
  EXPECT_EQ(run("train " + small() + " --data " + p("nowhere") + " --out " + p("run_x")), 1);
  EXPECT_FALSE(fs::exists(p("run_x")));
  EXPECT_TRUE(no_partials());
}

TEST(Cli, ExportAttention) {
  ASSERT_EQ(run("gen-data " + small() + " --out " + p("data_e")), 0);
  ASSERT_EQ(run("train " + small() + " --set epochs=1 --data " + p("data_e") + " --out " + p("run_e")), 0);
  ASSERT_EQ(run("export-attn --checkpoint " + p("run_e/checkpoint.dktf") + " --clip " +
                p("data_e/clips/test_00000_src.dkvc") + " " + p("data_e/clips/test_00000_tgt.dkvc") + " --out " +
                p("attn")),
            0);
  std::size_t maps = 0;
  for (const auto& e : fs::directory_iterator(workdir() / "attn")) {
    const auto name = e.path().filename().string();
    if (!name.starts_with("attn_")) continue;
    ++maps;
    std::istringstream in(slurp(e.path()));
    std::string row;
    std::getline(in, row);
    EXPECT_EQ(row.rfind("query,k0", 0), 0u);
    while (std::getline(in, row)) {
      std::istringstream cells(row);
      std::string cell;
      std::getline(cells, cell, ',');
      double s = 0;
      while (std::getline(cells, cell, ',')) s += std::stod(cell);
      ASSERT_NEAR(s, 1.0, 1e-6) << name;
    }
  }
  EXPECT_EQ(maps, 2u * 2u * 3u);  // layers x heads x branches
  for (const char* f : {"features.csv", "summary.csv", "config.txt"}) EXPECT_TRUE(fs::exists(workdir() / "attn" / f));
  EXPECT_NE(slurp(workdir() / "attn" / "summary.csv").find("cosine_source_target"), std::string::npos);
}

TEST(Cli, AblateWritesOneRowPerCell) {
  std::ofstream(workdir() / "grid.txt") << "attention_mode = S, S+T\n";
  ASSERT_EQ(run("ablate " + small() + " --set epochs=1 --grid " + p("grid.txt") + " --out " + p("abl")), 0);
  auto csv = slurp(workdir() / "abl" / "ablation.csv");
  EXPECT_EQ(lines(csv), 3u);
  EXPECT_EQ(csv.rfind("attention_mode,scores_per_layer", 0), 0u);
  EXPECT_TRUE(fs::exists(workdir() / "abl" / "grid.txt"));
  std::ofstream(workdir() / "badgrid.txt") << "no_key = 1\n";
  EXPECT_EQ(run("ablate " + small() + " --grid " + p("badgrid.txt") + " --out " + p("abl_bad")), 1);
  EXPECT_TRUE(no_partials());
}

TEST(Cli, Gradcheck) {
  EXPECT_EQ(run("gradcheck"), 0);
  EXPECT_NE(slurp(workdir() / "stdout.txt").find("all passed"), std::string::npos);
  EXPECT_EQ(run("gradcheck --inject-fault gelu"), 2);
  EXPECT_NE(slurp(workdir() / "stdout.txt").find("FAIL"), std::string::npos);
}
