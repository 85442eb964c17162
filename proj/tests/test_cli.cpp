#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string err;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RunResult run(const std::string& args) {
  const fs::path dir = fs::temp_directory_path();
  const fs::path out = dir / "lphom_cli_stdout.txt", err = dir / "lphom_cli_stderr.txt";
  const std::string cmd = std::string(LPHOM_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err), slurp(out)};
}

fs::path scratch(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("lphom_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

bool single_line(const std::string& s) { return !s.empty() && s.find('\n') == s.size() - 1; }

}  // namespace

TEST_CASE("cli: usage errors exit 1") {
  CHECK(run("").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("--seed notanumber show-config").code == 1);
  const fs::path d = scratch("usage");
  std::ofstream(d / "bad.cfg") << "no.such.key = 3\n";
  auto r = run("--config " + (d / "bad.cfg").string() + " show-config");
  CHECK(r.code == 1);
  CHECK(single_line(r.err));
  CHECK(r.err.find("no.such.key") != std::string::npos);
  CHECK(run("--config " + (d / "absent.cfg").string() + " show-config").code == 1);
}

TEST_CASE("cli: show-config and help succeed") {
  auto r = run("--seed 9 show-config");
  CHECK(r.code == 0);
  CHECK(r.out.find("seed = 9") != std::string::npos);
  CHECK(run("--help").code == 0);
}

TEST_CASE("cli: missing artifacts exit 2 and name the artifact") {
  const fs::path d = scratch("missing");
  for (const char* cmd : {"train-vae", "train-ldm", "sample-grid", "eval", "extrapolate"}) {
    auto r = run("-q --out " + d.string() + " " + cmd);
    INFO(cmd);
    CHECK(r.code == 2);
    CHECK(single_line(r.err));
    CHECK(r.err.find(d.string()) != std::string::npos);
  }
}

TEST_CASE("cli: corrupt checkpoint exits 2") {
  const fs::path d = scratch("corrupt");
  std::ofstream(d / "small.cfg") << "data.scale = 0.01\nvae.steps = 2\nvae.batch_size = 2\n";
  const std::string base = "-q --config " + (d / "small.cfg").string() + " --out " + d.string();
  REQUIRE(run(base + " gen-data").code == 0);
  REQUIRE(run(base + " train-vae").code == 0);
  const std::string bytes = slurp(d / "vae.ckpt");
  std::ofstream(d / "vae.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 7);
  auto r = run(base + " train-ldm");
  CHECK(r.code == 2);
  CHECK(r.err.find("checksum") != std::string::npos);
}

TEST_CASE("cli: numeric failure exits 3") {
  const fs::path d = scratch("nan");
  std::ofstream(d / "nan.cfg") << "data.scale = 0.01\nvae.lr = 1e12\nvae.steps = 20\nvae.batch_size = 4\n";
  const std::string base = "-q --config " + (d / "nan.cfg").string() + " --out " + d.string();
  REQUIRE(run(base + " gen-data").code == 0);
  auto r = run(base + " train-vae");
  CHECK(r.code == 3);
  CHECK(single_line(r.err));
}
