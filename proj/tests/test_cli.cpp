#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef MAXHDG_CLI_PATH
#error "MAXHDG_CLI_PATH must point at the command-line binary"
#endif

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("maxhdg-cli-test-" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out_file = scratch_dir() / ("out" + std::to_string(counter));
  const fs::path err_file = scratch_dir() / ("err" + std::to_string(counter));
  ++counter;
  const std::string cmd = std::string(MAXHDG_CLI_PATH) + " " + args + " > " +
                          out_file.string() + " 2> " + err_file.string();
  const int rc = std::system(cmd.c_str());
  RunResult res;
  res.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  res.out = slurp(out_file);
  res.err = slurp(err_file);
  fs::remove(out_file);
  fs::remove(err_file);
  return res;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) {
    if (c == '\n') ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("help exits zero and documents the exit codes") {
  const RunResult top = run_cli("--help");
  CHECK(top.code == 0);
  CHECK(top.out.find("Exit codes") != std::string::npos);
  CHECK(top.out.find("converge") != std::string::npos);
  CHECK(top.out.find("tau") != std::string::npos);

  const RunResult sub = run_cli("converge --help");
  CHECK(sub.code == 0);
  CHECK(sub.out.find("--levels") != std::string::npos);
}

TEST_CASE("converge prints a CSV error table") {
  const RunResult r = run_cli("converge --element tri-pk --degree 1 --levels 4,8");
  CHECK(r.code == 0);
  CHECK(count_lines(r.out) == 3);  // header + two levels
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line ==
        "level,n,h,err_u,rate_u,err_curl_u,rate_curl_u,err_q,rate_q,"
        "err_ustar,rate_ustar,err_curl_ustar,rate_curl_ustar");
  std::getline(in, line);
  CHECK(line.rfind("1,4,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("2,8,", 0) == 0);
  // The refined level carries rates (non-empty rate column).
  CHECK(line.find(",,") == std::string::npos);
}

TEST_CASE("converge markdown format renders a table") {
  const RunResult r =
      run_cli("converge --element tri-pk --degree 1 --levels 4,8 --format markdown");
  CHECK(r.code == 0);
  CHECK(r.out.find("sqrt(2)/h") != std::string::npos);
  CHECK(r.out.find("|---|") != std::string::npos);
  CHECK(r.out.find("| 4 | ") != std::string::npos);
}

TEST_CASE("converge output is byte-deterministic") {
  const std::string args = "converge --element tri-pk --degree 1 --levels 4,8";
  const RunResult a = run_cli(args);
  const RunResult b = run_cli(args);
  CHECK(a.code == 0);
  CHECK(b.code == 0);
  CHECK(a.out == b.out);
  CHECK(!a.out.empty());
}

TEST_CASE("--out writes the same bytes to a file and nothing to stdout") {
  const fs::path target = scratch_dir() / "report.csv";
  const RunResult direct = run_cli("converge --element tri-pk --degree 1 --levels 4,8");
  const RunResult filed =
      run_cli("converge --element tri-pk --degree 1 --levels 4,8 --out " + target.string());
  CHECK(filed.code == 0);
  CHECK(filed.out.empty());
  CHECK(slurp(target) == direct.out);
  fs::remove(target);
}

TEST_CASE("--out into a missing directory fails cleanly") {
  const fs::path target = scratch_dir() / "no-such-dir" / "report.csv";
  const RunResult r =
      run_cli("converge --element tri-pk --degree 1 --levels 4,8 --out " + target.string());
  CHECK(r.code == 1);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK(!fs::exists(target));
}

TEST_CASE("mdecomp reports certification verdicts through the exit code") {
  const RunResult good = run_cli("mdecomp --element tri-pk --degree 2");
  CHECK(good.code == 0);
  CHECK(good.out.find("im_index: 0") != std::string::npos);
  CHECK(good.out.find("verdict: true") != std::string::npos);

  const RunResult bad = run_cli("mdecomp --element para-pk --degree 1");
  CHECK(bad.code == 1);
  CHECK(bad.out.find("im_index: 2") != std::string::npos);
  CHECK(bad.out.find("verdict: false") != std::string::npos);

  const RunResult quad = run_cli("mdecomp --element quad-qk --degree 1");
  CHECK(quad.code == 1);
  CHECK(quad.out.find("verdict: false") != std::string::npos);
}

TEST_CASE("fixed lowest-order rows need no --degree") {
  const RunResult r = run_cli("mdecomp --element table1-row1");
  CHECK(r.code == 0);
  CHECK(r.out.find("verdict: true") != std::string::npos);
}

TEST_CASE("solve prints the error summary") {
  const RunResult r = run_cli("solve --element tri-pk --degree 1 --levels 4");
  CHECK(r.code == 0);
  CHECK(r.out.find("construction: tri-pk") != std::string::npos);
  CHECK(r.out.find("degree: 1") != std::string::npos);
  CHECK(r.out.find("n: 4") != std::string::npos);
  CHECK(r.out.find("err_u: ") != std::string::npos);
  CHECK(r.out.find("err_q: ") != std::string::npos);
  CHECK(r.out.find("err_curl_ustar: ") != std::string::npos);
  CHECK(r.out.find("flux residual: ") != std::string::npos);
}

TEST_CASE("sample emits one row per grid cell") {
  const RunResult r = run_cli("sample --element quad-qk --degree 1 --levels 2 --grid 3");
  CHECK(r.code == 0);
  CHECK(count_lines(r.out) == 10);  // header + 9 samples
  CHECK(r.out.rfind("x,y,u1_h,u2_h,q_h,u1_star,u2_star\n", 0) == 0);
}

TEST_CASE("configuration errors exit with code 1") {
  CHECK(run_cli("converge --element no-such-tag --degree 1 --levels 4,8").code == 1);
  CHECK(run_cli("converge --element tri-pk --levels 4,8").code == 1);  // degree required
  CHECK(run_cli("converge --element tri-pk --degree 1 --levels 8,4").code == 1);
  CHECK(run_cli("converge --element tri-pk --degree 1").code == 1);  // missing --levels
  CHECK(run_cli("converge --degree 1 --levels 4,8").code == 1);      // missing --element
  CHECK(run_cli("solve --element tri-pk --degree 1 --levels 4,8").code == 1);  // one level only
  CHECK(run_cli("sample --element quad-qk --degree 1 --levels 2 --grid 0").code == 1);
  CHECK(run_cli("converge --element tri-pk --degree 1 --levels 4,8 --tau 0").code == 1);
  CHECK(run_cli("converge --element tri-pk --degree 1 --levels 4,8 --format yaml").code == 1);
  CHECK(run_cli("frobnicate").code == 1);
  CHECK(run_cli("").code == 1);  // a subcommand is required

  const RunResult unknown = run_cli("converge --element no-such-tag --degree 1 --levels 4,8");
  CHECK(unknown.err.find("unknown construction tag") != std::string::npos);
  const RunResult nodeg = run_cli("converge --element tri-pk --levels 4,8");
  CHECK(nodeg.err.find("--degree is required") != std::string::npos);
}
