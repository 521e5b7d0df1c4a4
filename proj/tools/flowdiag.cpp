// Command-line front end. Subcommands:
//   run <scenario.json>    evaluate one scenario, print the report JSON
//   sweep <scenario.json>  evaluate a parameter grid, print the CSV
//   selftest               run the acceptance suite, print a pass/fail table
// Exit statuses: 0 ok, 1 selftest failure or unexpected error, 2 model error
// or invariant residual breach, 3 I/O failure, 4 scenario validation failure.
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "flowdiag/acceptance.hpp"
#include "flowdiag/errors.hpp"
#include "flowdiag/scenario.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw flowdiag::IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw flowdiag::IoError("cannot read " + path);
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw flowdiag::IoError("cannot open " + path + " for writing");
  out << content;
  out.flush();
  if (!out) throw flowdiag::IoError("cannot write " + path);
}

int cmd_run(const std::string& path) {
  const flowdiag::scenario::RunArtifacts art =
      flowdiag::scenario::run_scenario_text(read_file(path));
  if (!art.report_path.empty()) write_file(art.report_path, art.report);
  if (!art.csv_path.empty()) write_file(art.csv_path, art.trajectory_csv);
  std::cout << art.report;
  return (art.model_error || art.residual_failure) ? 2 : 0;
}

int cmd_sweep(const std::string& path) {
  const flowdiag::scenario::SweepArtifacts art =
      flowdiag::scenario::sweep_scenario_text(read_file(path));
  if (!art.csv_path.empty()) write_file(art.csv_path, art.csv);
  std::cout << art.csv;
  return 0;
}

int cmd_selftest() {
  const auto results = flowdiag::acceptance::run_all();
  return flowdiag::acceptance::print_table(std::cout, results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flow-equation and one-step unitary diagonalization runner"};
  app.require_subcommand(1);

  std::string run_path;
  CLI::App* run = app.add_subcommand("run", "evaluate one scenario");
  run->add_option("scenario", run_path, "scenario JSON file")->required();

  std::string sweep_path;
  CLI::App* sweep = app.add_subcommand("sweep", "evaluate a parameter grid");
  sweep->add_option("scenario", sweep_path, "scenario JSON file")->required();

  app.add_subcommand("selftest", "run the acceptance suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_path);
    if (sweep->parsed()) return cmd_sweep(sweep_path);
    return cmd_selftest();
  } catch (const flowdiag::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const flowdiag::ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const flowdiag::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const flowdiag::NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
