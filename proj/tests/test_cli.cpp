#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "fpl/cli.hpp"

using namespace fpl;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("fpl_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Runs the installed CLI binary; returns the process exit code.
int run_cli(const std::string& args) {
  const std::string cmd = std::string(FPL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kBaseConfig =
    "[domain]\n"
    "a = 0\n"
    "b = 1\n"
    "n = 48\n"
    "\n"
    "[problem]\n"
    "s = 0.5\n"
    "p = 2\n"
    "K = 1.0\n"
    "load = \"sin(3.141592653589793*x)\"\n"
    "\n"
    "[run]\n"
    "seed = 7\n";

}  // namespace

TEST_CASE("csv_field applies RFC-4180 quoting") {
  CHECK(cli::csv_field("plain") == "plain");
  CHECK(cli::csv_field("") == "");
  CHECK(cli::csv_field("a,b") == "\"a,b\"");
  CHECK(cli::csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(cli::csv_field("line\nbreak") == "\"line\nbreak\"");
}

TEST_CASE("fmt prints 17 significant digits that round-trip") {
  for (double v : {1.0 / 3.0, 3.141592653589793, 1e-300, 7.2387167709630189, -0.1}) {
    CHECK(std::stod(cli::fmt(v)) == v);
  }
  CHECK(cli::fmt(2.0) == "2");
}

TEST_CASE("sha256 known-answer vectors") {
  CHECK(cli::sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(cli::sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(cli::sha256_hex("The quick brown fox jumps over the lazy dog") ==
        "d7a8fbb307d7809469ca9abcb0082e4f8d5651e46d3cdb762d02d0bf37c9e592");
}

TEST_CASE("config parsing") {
  cli::RunConfig cfg = cli::parse_config_text(kBaseConfig);
  CHECK(cfg.a == 0.0);
  CHECK(cfg.b == 1.0);
  CHECK(cfg.n == 48);
  REQUIRE(cfg.s_values.size() == 1);
  CHECK(cfg.s_values[0] == 0.5);
  CHECK(cfg.p == 2.0);
  CHECK(cfg.load == "sin(3.141592653589793*x)");
  CHECK(cfg.seed == 7);

  cli::RunConfig lst = cli::parse_config_text("[problem]\ns = 0.3, 0.5, 0.7\n");
  REQUIRE(lst.s_values.size() == 3);
  CHECK(lst.s_values[1] == 0.5);

  // comments and blank lines
  CHECK_NOTHROW(cli::parse_config_text("# top comment\n\n[domain]\nn = 8 # trailing\n"));

  // defaults survive an empty config
  cli::RunConfig dflt = cli::parse_config_text("");
  CHECK(dflt.n == 64);
  CHECK(dflt.s() == 0.5);
}

TEST_CASE("config rejections") {
  CHECK_THROWS_AS(cli::parse_config_text("[domain]\nbogus = 1\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text("no equals sign"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text("[domain]\nn = 1\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text("[domain]\na = 2\nb = 1\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text("[problem]\ns = 1.5\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text("[problem]\ns = 0\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text("[problem]\np = 1\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text("[problem]\np = abc\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text("[problem]\nf = \"2*t - \"\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text("[continuation]\nstart_direction = 3\n"),
                  cli::ConfigError);
  CHECK_THROWS_AS(cli::load_config("/nonexistent/path.cfg"), cli::ConfigError);
}

TEST_CASE("eigen command: exit 0, CSV output, manifest hashes") {
  fs::path dir = scratch_dir() / "eigen";
  fs::create_directories(dir);
  write_file(dir / "run.cfg", kBaseConfig);
  const int rc = run_cli("--config " + (dir / "run.cfg").string() + " --out " + dir.string() +
                         " --verify eigen");
  CHECK(rc == 0);
  REQUIRE(fs::exists(dir / "eigen.csv"));
  REQUIRE(fs::exists(dir / "eigenfunction.csv"));
  REQUIRE(fs::exists(dir / "manifest.json"));

  const std::string csv = read_file(dir / "eigen.csv");
  CHECK(csv.rfind("s,p,lambda1,", 0) == 0);

  // every output is listed with the hash of its on-disk bytes
  nlohmann::json manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  CHECK(manifest["command"] == "eigen");
  CHECK(manifest["exit_code"] == 0);
  REQUIRE(manifest["outputs"].size() == 2);
  for (const auto& entry : manifest["outputs"]) {
    const std::string name = entry["file"];
    CHECK(entry["sha256"] == cli::sha256_hex(read_file(dir / name)));
  }
}

TEST_CASE("dirichlet command with oracle verification") {
  fs::path dir = scratch_dir() / "dirichlet";
  fs::create_directories(dir);
  write_file(dir / "run.cfg", kBaseConfig);
  CHECK(run_cli("--config " + (dir / "run.cfg").string() + " --out " + dir.string() +
                " --verify dirichlet") == 0);
  CHECK(fs::exists(dir / "dirichlet.csv"));
}

TEST_CASE("malformed config exits 2") {
  fs::path dir = scratch_dir() / "bad";
  fs::create_directories(dir);
  write_file(dir / "bad.cfg", "[problem]\nf = \"2*t - \"\n");
  CHECK(run_cli("--config " + (dir / "bad.cfg").string() + " eigen") == 2);
  write_file(dir / "bad2.cfg", "word salad\n");
  CHECK(run_cli("--config " + (dir / "bad2.cfg").string() + " check") == 2);
  CHECK(run_cli("--config /does/not/exist.cfg eigen") == 2);
  CHECK(run_cli("--config " + (dir / "bad.cfg").string() + " not-a-command") == 2);
}

TEST_CASE("solver budget exhaustion exits 3") {
  fs::path dir = scratch_dir() / "budget";
  fs::create_directories(dir);
  write_file(dir / "run.cfg",
             std::string(kBaseConfig) + "[solver]\nmax_iter = 1\ngrad_tol = 1e-14\n");
  CHECK(run_cli("--config " + (dir / "run.cfg").string() + " --out " + dir.string() +
                " dirichlet") == 3);
}

TEST_CASE("check passes clean and fails the bbm negative control with exit 4") {
  fs::path dir = scratch_dir() / "check";
  fs::create_directories(dir);
  write_file(dir / "run.cfg", kBaseConfig);
  CHECK(run_cli("--config " + (dir / "run.cfg").string() + " --out " + dir.string() +
                " check") == 0);
  CHECK(run_cli("--config " + (dir / "run.cfg").string() + " --out " + (dir / "neg").string() +
                " check --inject-bbm-scale 2.0") == 4);
  // the report records which property failed
  const std::string csv = read_file(dir / "neg" / "check.csv");
  CHECK(csv.find("kernel-structure,false") != std::string::npos);
  CHECK(csv.find("local-limit,false") != std::string::npos);
}

TEST_CASE("sweep-s output is byte-identical across thread counts and reruns") {
  fs::path dir = scratch_dir() / "sweep";
  fs::create_directories(dir);
  write_file(dir / "run.cfg",
             "[domain]\nn = 64\n[problem]\ns = 0.3, 0.5, 0.7, 1.0\np = 2\n[run]\nseed = 3\n");
  const std::string base = "--config " + (dir / "run.cfg").string();
  CHECK(run_cli(base + " --out " + (dir / "t1").string() + " --threads 1 sweep-s") == 0);
  CHECK(run_cli(base + " --out " + (dir / "t4").string() + " --threads 4 sweep-s") == 0);
  CHECK(run_cli(base + " --out " + (dir / "t4b").string() + " --threads 4 sweep-s") == 0);
  const std::string a = read_file(dir / "t1" / "lambda1_curve.csv");
  const std::string b = read_file(dir / "t4" / "lambda1_curve.csv");
  const std::string c = read_file(dir / "t4b" / "lambda1_curve.csv");
  REQUIRE(!a.empty());
  CHECK(a == b);
  CHECK(b == c);
  // header + 4 rows with CRLF line ends
  CHECK(a.rfind("s,lambda1,residual,iterations,error\r\n", 0) == 0);
}

TEST_CASE("branch and apply commands produce diagram CSVs") {
  fs::path dir = scratch_dir() / "branch";
  fs::create_directories(dir);
  write_file(dir / "run.cfg",
             "[domain]\nn = 48\n"
             "[problem]\ns = 0.6\np = 2\nf = \"neg(t^3)\"\n"
             "g = \"psi(t,2)*(2 + 28*t^2/(1+t^2))\"\n"
             "[continuation]\nmax_steps = 50\n");
  const std::string base = "--config " + (dir / "run.cfg").string();
  CHECK(run_cli(base + " --out " + (dir / "br").string() + " branch") == 0);
  const std::string csv = read_file(dir / "br" / "branch.csv");
  CHECK(csv.rfind("step,lambda,amplitude,residual,sign_class\r\n", 0) == 0);
  CHECK(csv.find("positive") != std::string::npos);

  CHECK(run_cli(base + " --out " + (dir / "ap").string() + " --verify apply") == 0);
  CHECK(fs::exists(dir / "ap" / "apply.csv"));
  CHECK(fs::exists(dir / "ap" / "apply_branch.csv"));

  // g never crossing lambda_1 is a config-level rejection
  write_file(dir / "low.cfg",
             "[domain]\nn = 48\n[problem]\ns = 0.6\np = 2\n"
             "g = \"psi(t,2)*(2 + 3*t^2/(1+t^2))\"\n");
  CHECK(run_cli("--config " + (dir / "low.cfg").string() + " --out " + (dir / "low").string() +
                " apply") == 2);
}

TEST_CASE("full spectrum flag requires p = 2 and emits spectrum.csv") {
  fs::path dir = scratch_dir() / "spectrum";
  fs::create_directories(dir);
  write_file(dir / "run.cfg", kBaseConfig);
  CHECK(run_cli("--config " + (dir / "run.cfg").string() + " --out " + dir.string() +
                " eigen --full-spectrum") == 0);
  CHECK(fs::exists(dir / "spectrum.csv"));

  write_file(dir / "p3.cfg", "[domain]\nn = 24\n[problem]\ns = 0.5\np = 3\n");
  CHECK(run_cli("--config " + (dir / "p3.cfg").string() + " --out " + (dir / "p3").string() +
                " eigen --full-spectrum") == 2);
}
