#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "flowdiag/errors.hpp"
#include "flowdiag/parallel.hpp"
#include "flowdiag/scenario.hpp"
#include "json.hpp"

using namespace flowdiag;
using nlohmann::json;

namespace {

std::string validation_key(const std::string& text) {
  try {
    scenario::run_scenario_text(text);
  } catch (const ValidationError& e) {
    return e.key;
  }
  return "<no throw>";
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t nl = s.find('\n', pos);
    lines.push_back(s.substr(pos, nl - pos));
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t pos = 0;
  while (true) {
    const std::size_t c = line.find(',', pos);
    cells.push_back(line.substr(pos, c - pos));
    if (c == std::string::npos) break;
    pos = c + 1;
  }
  return cells;
}

}  // namespace

TEST_CASE("defaults fill in a minimal scenario") {
  const auto art = scenario::run_scenario_text(R"({"model":"quadratic"})");
  const json rep = json::parse(art.report);
  CHECK(rep["model"] == "quadratic");
  CHECK(rep["method"] == "both");
  CHECK(rep["seed"] == 0);
  CHECK(rep["parameters"]["f0"] == 1.0);
  CHECK(rep["parameters"]["g0"] == 0.0);
  CHECK(rep["runs"]["fe"]["f"] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep["runs"]["cut"]["f"] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep["integrator"]["method"] == "rk45");
  CHECK(rep["integrator"]["rel_tol"] == 1e-10);
  CHECK(rep["warnings"].is_array());
  CHECK(!art.model_error);
  CHECK(!art.residual_failure);
  CHECK(art.report_path.empty());
  CHECK(art.csv_path.empty());
}

TEST_CASE("quadratic run reproduces the quasiparticle energy") {
  const std::string text = R"({
    "model": "quadratic", "seed": 3, "f0": 2.0, "g0": 1.2,
    "outputs": {"samples": 21, "report_json": "r.json", "trajectory_csv": "t.csv"}
  })";
  const auto art = scenario::run_scenario_text(text);
  const json rep = json::parse(art.report);
  CHECK(rep["runs"]["fe"]["f"] == doctest::Approx(1.6).epsilon(1e-7));
  CHECK(rep["runs"]["cut"]["f"] == doctest::Approx(1.6).epsilon(1e-9));
  CHECK(rep["runs"]["fe"]["predicted_energy"] == doctest::Approx(1.6).epsilon(1e-15));
  CHECK(double(rep["runs"]["fe"]["energy_error"]) < 1e-7);
  CHECK(double(rep["comparison"]["fe_minus_cut_energy"]) < 1e-7);
  CHECK(art.report_path == "r.json");
  CHECK(art.csv_path == "t.csv");

  const auto lines = split_lines(art.trajectory_csv);
  REQUIRE(lines.size() == 1 + 2 * 21);
  CHECK(lines[0] == "method,l,f,g,f2_minus_g2");
  CHECK(lines[1].substr(0, 5) == "fe,0,");
  CHECK(lines[22].substr(0, 6) == "cut,0,");
  // Rows are interpolated between accepted steps, so the invariant holds to
  // dense output accuracy, not integrator accuracy.
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_csv(lines[i]);
    REQUIRE(cells.size() == 5);
    CHECK(std::stod(cells[4]) == doctest::Approx(2.56).epsilon(1e-6));
  }
}

TEST_CASE("parameter echo keeps full precision") {
  const std::string text = R"({"model":"quadratic","f0":0.33333333333333331,"g0":0.1})";
  const json rep = json::parse(scenario::run_scenario_text(text).report);
  CHECK(double(rep["parameters"]["f0"]) == 1.0 / 3.0);
}

TEST_CASE("identical scenario text reruns byte identically") {
  const std::string text = R"({
    "model": "eph", "seed": 11, "omega": 1.0, "delta": 0.5, "m0": 0.3, "v0": 0.2
  })";
  const auto a = scenario::run_scenario_text(text);
  const auto b = scenario::run_scenario_text(text);
  CHECK(a.report == b.report);
  CHECK(a.trajectory_csv == b.trajectory_csv);
}

TEST_CASE("eph report carries both polaron limits") {
  const std::string text =
      R"({"model": "eph", "omega": 1.0, "delta": 0.5, "m0": 0.3, "v0": 0.2})";
  const json rep = json::parse(scenario::run_scenario_text(text).report);
  CHECK(rep["runs"]["fe"]["predicted_V"] == doctest::Approx(0.128).epsilon(1e-15));
  CHECK(rep["runs"]["cut"]["predicted_V"] == doctest::Approx(0.08).epsilon(1e-15));
  CHECK(rep["runs"]["fe"]["V"] == doctest::Approx(0.128).epsilon(1e-6));
  CHECK(rep["runs"]["cut"]["V"] == doctest::Approx(0.08).epsilon(1e-8));
  CHECK(rep["comparison"]["predicted_difference"] == doctest::Approx(-0.048).epsilon(1e-12));
}

TEST_CASE("threeboson complex parameters are [re, im] pairs") {
  const std::string text = R"({
    "model": "threeboson", "beta1": 1.0, "beta2": 2.0,
    "psi1": [0.2, 0.1], "psi2": [-0.1, 0.3], "phi0": [0.05, 0]
  })";
  const json rep = json::parse(scenario::run_scenario_text(text).report);
  CHECK(rep["parameters"]["psi1"][0] == 0.2);
  CHECK(rep["parameters"]["psi1"][1] == 0.1);
  CHECK(rep["runs"]["fe"]["phi"][0] == doctest::Approx(0.038).epsilon(1e-6));
  CHECK(rep["runs"]["fe"]["phi"][1] == doctest::Approx(0.084).epsilon(1e-6));
  CHECK(rep["runs"]["cut"]["phi"][0] == doctest::Approx(0.035).epsilon(1e-6));
  CHECK(rep["runs"]["cut"]["phi"][1] == doctest::Approx(0.105).epsilon(1e-6));
  CHECK(rep["comparison"]["predicted_ratio"] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(rep["comparison"]["measured_ratio"] == doctest::Approx(0.8).epsilon(1e-5));
}

TEST_CASE("validation errors name the offending key") {
  CHECK(validation_key(R"({"model":"quadratic","extra":1})") == "extra");
  CHECK(validation_key(R"({"model":"quadratic","omega":2})") == "omega");
  CHECK(validation_key(R"({"model":"bogus"})") == "model");
  CHECK(validation_key(R"({"f0":1})") == "model");
  CHECK(validation_key(R"({"model":"quadratic","method":"x"})") == "method");
  CHECK(validation_key(R"({"model":"quadratic","outputs":{"samples":1}})") ==
        "outputs.samples");
  CHECK(validation_key(R"({"model":"quadratic","integrator":{"abs_tol":-1}})") ==
        "integrator.abs_tol");
  CHECK(validation_key(R"({"model":"quadratic","integrator":{"wat":1}})") ==
        "integrator.wat");
  CHECK(validation_key(R"({"model":"quadratic","seed":-4})") == "seed");
  CHECK(validation_key(R"({"model":"threeboson","psi1":[1,2,3]})") == "psi1");
  CHECK(validation_key(R"({"model":"spins","method":"fe","n":2,"t_end":1})") == "method");
  CHECK(validation_key(R"({"model":"spins","n":2,"t_end":1,"integrator":{"l_max":2}})") ==
        "integrator.l_max");
  CHECK(validation_key(R"({"model":"spins","n":2,"t_end":1,"J":[[0,1]]})") == "J");
  CHECK(validation_key(
            R"({"model":"matrix","n":4,"matrix":{"n":1,"re":[1],"im":[0]}})") == "matrix");
  CHECK(validation_key(R"({"model":"matrix","n":0})") == "n");
  CHECK(validation_key(R"({"model":"matrix","matrix":{"n":1,"re":[1],"im":[0],"x":1}})") ==
        "matrix.x");
}

TEST_CASE("malformed JSON is an I/O failure, not a validation one") {
  CHECK_THROWS_AS(scenario::run_scenario_text("{not json"), IoError);
  CHECK_THROWS_AS(scenario::sweep_scenario_text("[1,2"), IoError);
}

TEST_CASE("model rejections become typed records with the flow kept") {
  // Resonance kills only the CUT record; the FE flow stays numeric.
  const auto art = scenario::run_scenario_text(
      R"({"model":"eph","omega":1,"delta":1,"m0":0.3,"v0":0})");
  CHECK(art.model_error);
  const json rep = json::parse(art.report);
  CHECK(rep["runs"]["cut"]["error"]["type"] == "resonance");
  CHECK(rep["runs"]["fe"]["V"] == doctest::Approx(-0.045).epsilon(1e-6));

  const auto art2 =
      scenario::run_scenario_text(R"({"model":"quadratic","f0":1,"g0":1.5})");
  CHECK(art2.model_error);
  const json rep2 = json::parse(art2.report);
  CHECK(rep2["runs"]["fe"]["error"]["type"] == "unstable_mode");
  CHECK(rep2["runs"]["cut"]["error"]["type"] == "unstable_mode");
  CHECK(!rep2.contains("comparison"));
}

TEST_CASE("spins scenario tracks coherence weights") {
  const std::string text = R"({
    "model": "spins", "n": 2, "t_end": 0.5, "alpha": 0.8, "omega0": 2.0,
    "outputs": {"samples": 9}
  })";
  const auto art = scenario::run_scenario_text(text);
  const json rep = json::parse(art.report);
  CHECK(!rep.contains("method"));
  CHECK(rep["runs"]["evolution"]["termination"] == "reached_l_max");
  // Free precession keeps all weight in the single spin sector.
  CHECK(rep["runs"]["evolution"]["weights"][0] ==
        doctest::Approx(2 * 0.8 * 0.8 / 4).epsilon(1e-9));
  CHECK(double(rep["runs"]["evolution"]["weights"][1]) < 1e-12);
  CHECK(double(rep["runs"]["evolution"]["purity_drift"]) < 1e-9);
  CHECK(!art.residual_failure);

  const auto lines = split_lines(art.trajectory_csv);
  REQUIRE(lines.size() == 1 + 9);
  CHECK(lines[0] == "t,W_1,W_2,trace_check,purity_check");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_csv(lines[i]);
    REQUIRE(cells.size() == 5);
    CHECK(std::stod(cells[1]) == doctest::Approx(0.32).epsilon(1e-8));
  }
}

TEST_CASE("coupled spins grow two spin correlations") {
  const std::string text = R"({
    "model": "spins", "n": 2, "t_end": 0.5, "alpha": 1.0, "J": [[0, 1], [1, 0]]
  })";
  const json rep = json::parse(scenario::run_scenario_text(text).report);
  CHECK(double(rep["runs"]["evolution"]["weights"][1]) > 1e-3);
  const double sum = double(rep["runs"]["evolution"]["weights"][0]) +
                     double(rep["runs"]["evolution"]["weights"][1]);
  CHECK(sum == doctest::Approx(2 * 1.0 / 4).epsilon(1e-9));
}

TEST_CASE("seeded matrix flow recovers the reference spectrum") {
  const std::string text = R"({
    "model": "matrix", "method": "fe", "seed": 7, "n": 6, "coupling": 0.3,
    "integrator": {"l_max": 400}
  })";
  const json rep = json::parse(scenario::run_scenario_text(text).report);
  CHECK(rep["parameters"]["source"] == "seeded");
  CHECK(double(rep["runs"]["fe"]["spectrum_error"]) < 1e-6);
  CHECK(double(rep["runs"]["fe"]["trace_drift"]) < 1e-9);
  CHECK(rep["runs"]["fe"]["eigenvalues"].size() == 6);
}

TEST_CASE("explicit matrix with explicit generator runs the one step route") {
  const std::string text = R"({
    "model": "matrix", "method": "cut",
    "matrix": {"n": 2, "re": [1, 0.5, 0.5, 2], "im": [0, 0, 0, 0]},
    "generator": {"n": 2, "re": [0, -0.39269908169872414, 0.39269908169872414, 0],
                   "im": [0, 0, 0, 0]}
  })";
  const json rep = json::parse(scenario::run_scenario_text(text).report);
  CHECK(rep["parameters"]["source"] == "explicit");
  CHECK(double(rep["runs"]["cut"]["offdiag_norm"]) < 1e-12);
  CHECK(double(rep["runs"]["cut"]["route_gap"]) < 1e-8);
  CHECK(rep["runs"]["cut"]["eigenvalues"][0] ==
        doctest::Approx(0.79289321881345254).epsilon(1e-10));
  CHECK(rep["runs"]["cut"]["eigenvalues"][1] ==
        doctest::Approx(2.2071067811865475).epsilon(1e-10));
}

TEST_CASE("tracked unitary reconstruction is reported") {
  const std::string text = R"({
    "model": "matrix", "method": "fe", "seed": 2, "n": 4, "coupling": 0.2,
    "track_unitary": true, "integrator": {"l_max": 200}
  })";
  const json rep = json::parse(scenario::run_scenario_text(text).report);
  CHECK(double(rep["runs"]["fe"]["reconstruction_error"]) < 1e-5);
}

TEST_CASE("sweep expands a grid in sorted key order, last key fastest") {
  const std::string text = R"({
    "model": "quadratic", "g0": [0.1, 0.2], "f0": [1.0, 2.0]
  })";
  const auto art = scenario::sweep_scenario_text(text);
  CHECK(art.points == 4);
  const auto lines = split_lines(art.csv);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == "f0,g0,fe_energy,cut_energy,predicted_energy");
  const double expect[4][2] = {{1.0, 0.1}, {1.0, 0.2}, {2.0, 0.1}, {2.0, 0.2}};
  for (int i = 0; i < 4; ++i) {
    const auto cells = split_csv(lines[1 + i]);
    REQUIRE(cells.size() == 5);
    CHECK(std::stod(cells[0]) == expect[i][0]);
    CHECK(std::stod(cells[1]) == expect[i][1]);
    const double eps = std::sqrt(expect[i][0] * expect[i][0] - expect[i][1] * expect[i][1]);
    CHECK(std::stod(cells[4]) == doctest::Approx(eps).epsilon(1e-12));
    CHECK(std::stod(cells[2]) == doctest::Approx(eps).epsilon(1e-6));
  }
}

TEST_CASE("sweep points outside the stable region go NaN instead of aborting") {
  const std::string text = R"({
    "model": "quadratic", "method": "cut", "f0": [2.0], "g0": [0.5, 2.5]
  })";
  const auto art = scenario::sweep_scenario_text(text);
  const auto lines = split_lines(art.csv);
  REQUIRE(lines.size() == 3);
  const auto good = split_csv(lines[1]);
  const auto bad = split_csv(lines[2]);
  CHECK(std::isfinite(std::stod(good[2])));
  CHECK(std::isnan(std::stod(bad[2])));
  CHECK(std::stod(bad[1]) == 2.5);
}

TEST_CASE("sweep validation") {
  auto key_of = [](const std::string& text) {
    try {
      scenario::sweep_scenario_text(text);
    } catch (const ValidationError& e) {
      return e.key;
    }
    return std::string("<no throw>");
  };
  CHECK(key_of(R"({"model":"threeboson","psi1":[1,2,3]})") == "psi1");
  CHECK(key_of(R"({"model":"spins","n":[2,3],"t_end":1})") == "n");
  CHECK(key_of(R"({"model":"quadratic","f0":[]})") == "f0");
  CHECK(key_of(R"({"model":"nope"})") == "model");

  std::string big = R"({"model":"quadratic","f0":[)";
  for (int i = 0; i < 101; ++i) big += (i ? ",1.5" : "1.5");
  big += R"(],"g0":[)";
  for (int i = 0; i < 100; ++i) big += (i ? ",0.1" : "0.1");
  big += "]}";
  CHECK(key_of(big) == "scenario");
}

TEST_CASE("threaded sweep matches the serial bytes") {
  const std::string text = R"({
    "model": "eph",
    "omega": [0.8, 0.9, 1.0, 1.1, 1.2],
    "delta": [0.0, 0.1, 0.2, 0.3],
    "m0": [0.3],
    "outputs": {"sweep_csv": "s.csv"}
  })";
  par::set_thread_cap(4);
  const auto threaded = scenario::sweep_scenario_text(text);
  par::set_thread_cap(0);
  const auto serial = scenario::sweep_scenario_text_serial(text);
  CHECK(threaded.points == 20);
  CHECK(threaded.csv == serial.csv);
  CHECK(threaded.csv_path == "s.csv");
  const auto lines = split_lines(threaded.csv);
  REQUIRE(lines.size() == 21);
  CHECK(lines[0] == "delta,m0,omega,fe_V,fe_V_predicted,cut_V,cut_V_predicted");
}

TEST_CASE("matrix sweep covers integer sizes") {
  const std::string text = R"({
    "model": "matrix", "method": "fe", "seed": 5, "n": [3, 4], "coupling": [0.2],
    "integrator": {"l_max": 200}
  })";
  const auto art = scenario::sweep_scenario_text(text);
  const auto lines = split_lines(art.csv);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "coupling,n,fe_offdiag,fe_spectrum_error");
  for (int i = 1; i <= 2; ++i) {
    const auto cells = split_csv(lines[i]);
    CHECK(std::stod(cells[3]) < 1e-5);
  }
}
