// Drives the installed binary end to end: one process per case, checking the
// exit-status contract (0 ok, 2 model error, 3 I/O, 4 validation), file
// emission, and a sweep property read back from the CSV.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#ifndef FLOWDIAG_CLI
#error "FLOWDIAG_CLI must name the binary under test"
#endif

namespace {

struct Outcome {
  int status = -1;
  std::string out;
};

Outcome run_cli(const std::string& args) {
  const std::string cmd = std::string(FLOWDIAG_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  Outcome o;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) o.out.append(buf, got);
  const int raw = pclose(pipe);
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return o;
}

void write_scenario(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("run emits the report on stdout and exits cleanly") {
  write_scenario("cli_ok.json", R"({"model": "quadratic", "f0": 1.0, "g0": 0.6})");
  const Outcome o = run_cli("run cli_ok.json");
  CHECK(o.status == 0);
  CHECK(o.out.front() == '{');
  CHECK(o.out.find("\"model\":\"quadratic\"") != std::string::npos);
  CHECK(o.out.find("\"runs\"") != std::string::npos);
}

TEST_CASE("run writes requested report and trajectory files") {
  write_scenario("cli_files.json",
                 R"({"model": "quadratic", "f0": 1.0, "g0": 0.4,
                     "outputs": {"report_json": "cli_out.json",
                                 "trajectory_csv": "cli_out.csv",
                                 "samples": 11}})");
  const Outcome o = run_cli("run cli_files.json");
  CHECK(o.status == 0);
  CHECK(slurp("cli_out.json") == o.out);
  const std::string csv = slurp("cli_out.csv");
  CHECK(csv.rfind("method,l,f,g,f2_minus_g2\n", 0) == 0);
}

TEST_CASE("model error keeps the report but exits with status 2") {
  write_scenario("cli_res.json", R"({"model": "eph", "omega": 1.0, "delta": 1.0, "m0": 0.3})");
  const Outcome o = run_cli("run cli_res.json");
  CHECK(o.status == 2);
  CHECK(o.out.find("\"type\":\"resonance\"") != std::string::npos);
  CHECK(o.out.find("\"fe\"") != std::string::npos);
}

TEST_CASE("missing scenario file exits with status 3") {
  const Outcome o = run_cli("run cli_no_such_file.json");
  CHECK(o.status == 3);
  CHECK(o.out.find("error:") != std::string::npos);
}

TEST_CASE("invalid scenario exits with status 4 naming the key") {
  write_scenario("cli_bad.json", R"({"model": "bogus"})");
  for (const char* sub : {"run", "sweep"}) {
    const Outcome o = run_cli(std::string(sub) + " cli_bad.json");
    CHECK(o.status == 4);
    CHECK(o.out.find("model") != std::string::npos);
  }
}

TEST_CASE("pair interaction shift shrinks with detuning across a sweep") {
  write_scenario("cli_sweep.json",
                 R"({"model": "eph", "method": "fe", "omega": 1.0,
                     "delta": [0.0, 0.3, 0.6], "m0": 0.2})");
  const Outcome o = run_cli("sweep cli_sweep.json");
  CHECK(o.status == 0);

  std::istringstream lines(o.out);
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line == "delta,fe_V,fe_V_predicted");
  std::vector<double> shift;
  while (std::getline(lines, line)) {
    const auto c1 = line.find(','), c2 = line.find(',', line.find(',') + 1);
    shift.push_back(std::fabs(std::stod(line.substr(c1 + 1, c2 - c1 - 1))));
  }
  REQUIRE(shift.size() == 3);
  CHECK(shift[0] > shift[1]);
  CHECK(shift[1] > shift[2]);
}
