#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(STEGOWAV_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

long lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

struct Workspace {
  fs::path dir;
  Workspace() : dir(fs::temp_directory_path() / "stegowav_cli_test") {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("end-to-end command line session") {
  Workspace ws;
  REQUIRE(run("synth --count 3 --seed 4 --out " + (ws / "data")).code == 0);
  CHECK(fs::exists(ws / "data/pair_002.ppm"));

  const std::string train_args = "train --data " + (ws / "data") + " --steps 3 --image_size 16 --unet_channels 4 --out ";
  REQUIRE(run(train_args + (ws / "a.ckpt")).code == 0);
  REQUIRE(run(train_args + (ws / "b.ckpt")).code == 0);
  CHECK(slurp(ws / "a.ckpt") == slurp(ws / "b.ckpt"));
  CHECK(slurp(ws / "a.ckpt.loss.csv") == slurp(ws / "b.ckpt.loss.csv"));
  CHECK(lines(slurp(ws / "a.ckpt.loss.csv")) == 4);

  const Run e = run("embed --model " + (ws / "a.ckpt") + " --image " + (ws / "data/pair_000.ppm") + " --audio " +
                    (ws / "data/pair_000.wav") + " --out " + (ws / "stego.wav"));
  CHECK(e.code == 0);
  CHECK(e.out.find("snr_db") != std::string::npos);

  const Run r = run("reveal --model " + (ws / "a.ckpt") + " --audio " + (ws / "stego.wav") + " --out " +
                    (ws / "revealed.ppm") + " --secret " + (ws / "data/pair_000.ppm"));
  CHECK(r.code == 0);
  CHECK(r.out.starts_with("method,container,beta"));
  CHECK(slurp(ws / "revealed.ppm").starts_with("P6\n16 16\n255\n"));

  const Run ev = run("eval --model " + (ws / "a.ckpt") + " --data " + (ws / "data") + " --per-sample");
  CHECK(ev.code == 0);
  CHECK(lines(ev.out) == 4);

  const std::string rob = "robustness --model " + (ws / "a.ckpt") + " --data " + (ws / "data") +
                          " --fractions 1,0.5,0.25 --modes sequential,random";
  const Run rb = run(rob);
  CHECK(rb.code == 0);
  CHECK(lines(rb.out) == 7);
  CHECK(run(rob).out == rb.out);

  const Run cost = run("cost --out " + (ws / "cost.csv"));
  CHECK(cost.code == 0);
  CHECK(cost.out.find("paper baseline") != std::string::npos);
  CHECK(slurp(ws / "cost.csv").starts_with("name,params"));

  CHECK(run("spectrogram --audio " + (ws / "stego.wav") + " --out " + (ws / "spec.pgm")).code == 0);
  CHECK(slurp(ws / "spec.pgm").starts_with("P5\n"));
}

TEST_CASE("help succeeds for every subcommand") {
  CHECK(run("--help").code == 0);
  for (const char* sub : {"synth", "train", "embed", "reveal", "eval", "robustness", "cost", "spectrogram"}) {
    INFO(sub);
    CHECK(run(std::string(sub) + " --help").code == 0);
  }
}

TEST_CASE("exit codes distinguish usage from data errors") {
  Workspace ws;
  CHECK(run("").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("synth").code == 1);
  CHECK(run("cost --beta 2").code == 1);
  CHECK(run("synth --count 1 --out " + (ws / "d") + " --profile moon").code == 1);
  CHECK(run("eval --model " + (ws / "missing.ckpt") + " --data " + (ws / "d")).code == 2);
  std::ofstream(ws / "junk.ckpt") << "not a checkpoint";
  CHECK(run("spectrogram --audio " + (ws / "junk.ckpt") + " --out " + (ws / "x.pgm")).code == 2);
}
