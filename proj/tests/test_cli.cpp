// Drives the installed command-line binary as a subprocess: argument
// validation, the quick self checks, and a miniature corpus -> shard ->
// train -> enhance -> eval pass through the real subcommands.

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "temp_dir.hpp"

namespace {

struct CmdResult {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp_text(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

CmdResult run_cli(const std::string& args, const TempDir& dir) {
  const std::string out_path = dir.file("_stdout.txt");
  const std::string err_path = dir.file("_stderr.txt");
  const std::string cmd = std::string("\"") + SBLSTM_CLI_PATH + "\" " + args + " > \"" +
                          out_path + "\" 2> \"" + err_path + "\"";
  const int raw = std::system(cmd.c_str());
  CmdResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp_text(out_path);
  r.err = slurp_text(err_path);
  return r;
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("info reports the default configuration") {
  TempDir dir("cli_info");
  const CmdResult r = run_cli("info", dir);
  CHECK(r.status == 0);
  CHECK(contains(r.out, "default configuration"));
  CHECK(contains(r.out, "fft 512, hop 256"));
  CHECK(contains(r.out, "1295874"));
  CHECK(contains(r.out, "lstm 384 + 256"));
}

TEST_CASE("bad invocations exit nonzero") {
  TempDir dir("cli_bad");
  SUBCASE("a subcommand is required") {
    CHECK(run_cli("", dir).status != 0);
  }
  SUBCASE("unknown flags are rejected") {
    CHECK(run_cli("info --bogus", dir).status != 0);
  }
  SUBCASE("missing model file is a clean error") {
    const CmdResult r = run_cli("enhance --model " + dir.file("nope.bin") +
                                    " --in a.wav --out b.wav",
                                dir);
    CHECK(r.status == 1);
    CHECK(contains(r.err, "error:"));
  }
}

TEST_CASE("gradient check subcommand honors its tolerance") {
  TempDir dir("cli_gradcheck");
  const CmdResult ok = run_cli("gradcheck --seeds 2", dir);
  CHECK(ok.status == 0);
  CHECK(contains(ok.out, "worst"));
  // An absurdly tight bound must flip the exit code.
  CHECK(run_cli("gradcheck --seeds 1 --tolerance 1e-18", dir).status == 1);
}

TEST_CASE("selfcheck sweep passes") {
  TempDir dir("cli_selfcheck");
  const CmdResult r = run_cli("selfcheck", dir);
  CHECK(r.status == 0);
  CHECK(contains(r.out, "all checks passed"));
  CHECK_FALSE(contains(r.out, "FAILED"));
}

TEST_CASE("mini corpus pipeline end to end") {
  TempDir dir("cli_pipeline");
  const std::string corpus = dir.file("corpus");
  const std::string shard = dir.file("shard.bin");
  const std::string model = dir.file("model.bin");
  const std::string enhanced = dir.file("enhanced");
  std::filesystem::create_directories(enhanced);

  // Two 8 s synthetic clips, mixed and cut into tiny training windows.
  const CmdResult mix = run_cli(
      "mix --out " + corpus +
          " --synth-speech 0.2 --synth-noise 0.2 --hours 0.0025 --seed 3"
          " --shards " + shard +
          " --shard-neighbors 2 --shard-seq 16 --shard-tau 1",
      dir);
  REQUIRE(mix.status == 0);
  CHECK(contains(mix.err, "rendered 2 clips"));
  REQUIRE(std::filesystem::exists(corpus + "/manifest.tsv"));
  REQUIRE(std::filesystem::exists(corpus + "/clips/clip00000_noisy.wav"));
  REQUIRE(std::filesystem::exists(corpus + "/clips/clip00001_target.wav"));
  REQUIRE(std::filesystem::exists(shard));

  // One cheap epoch on a small network.
  const CmdResult tr = run_cli("train --data " + shard + " --out " + model +
                                   " --epochs 1 --batch 4096 --lr 0.005"
                                   " --hidden1 8 --hidden2 6 --init-seed 2 --seed 3",
                               dir);
  REQUIRE(tr.status == 0);
  CHECK(contains(tr.out, "epoch 1  loss"));
  CHECK(contains(tr.out, "wrote"));
  REQUIRE(std::filesystem::exists(model));

  const CmdResult info = run_cli("info --model " + model, dir);
  CHECK(info.status == 0);
  CHECK(contains(info.out, "lstm 8 + 6"));
  CHECK(contains(info.out, "output delay   1 frames (256 samples)"));

  // Enhance one clip, then require eval to flag the one still missing.
  const CmdResult e0 = run_cli("enhance --model " + model + " --in " + corpus +
                                   "/clips/clip00000_noisy.wav --out " + enhanced +
                                   "/clip00000.wav",
                               dir);
  REQUIRE(e0.status == 0);
  CHECK(contains(e0.err, "delay 256 samples in file"));

  const std::string eval_args = "eval --manifest " + corpus + "/manifest.tsv" +
                                " --mix-dir " + corpus + "/clips" +
                                " --enhanced-dir " + enhanced + " --model " + model;
  const CmdResult partial = run_cli(eval_args, dir);
  CHECK(partial.status == 1);
  CHECK(contains(partial.err, "missing enhanced files for 1 clips"));
  CHECK(contains(partial.err, "clip00001"));

  const CmdResult e1 = run_cli("enhance --model " + model + " --in " + corpus +
                                   "/clips/clip00001_noisy.wav --out " + enhanced +
                                   "/clip00001.wav",
                               dir);
  REQUIRE(e1.status == 0);

  const std::string csv = dir.file("report.csv");
  const CmdResult full = run_cli(eval_args + " --csv " + csv, dir);
  CHECK(full.status == 0);
  CHECK(contains(full.out, "mean over 2 clips"));
  CHECK(contains(slurp_text(csv), "clip,si_sdr_db,snr_db,seg_snr_db"));
}

}  // TEST_SUITE
