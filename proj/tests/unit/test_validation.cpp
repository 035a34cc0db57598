#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sgles/validation.hpp"

using namespace sgles;

TEST_CASE("stability polynomial coefficients") {
  const auto w = amplification_coefficients(wray3_tableau());
  REQUIRE(w.size() == 4);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w[2] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(w[3] == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  const auto r = amplification_coefficients(rk4_tableau());
  REQUIRE(r.size() == 5);
  CHECK(r[4] == doctest::Approx(1.0 / 24.0).epsilon(1e-15));
}

TEST_CASE("gradient check") {
  // f = sum_i (i + 1) x_i^2, so central differences are exact.
  auto f = [](const std::vector<double>& x) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<double>(i + 1) * x[i] * x[i];
    return s;
  };
  std::vector<double> x(30), g(30);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = 0.1 * static_cast<double>(i) - 1.0;
    g[i] = 2.0 * static_cast<double>(i + 1) * x[i];
  }
  CHECK(gradient_check(f, x, g, 20, 0.5, 1) <= 1e-14);
  auto bad = g;
  for (double& v : bad) v *= 1.1;
  CHECK(gradient_check(f, x, bad, 30, 0.5, 1) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK_THROWS_AS(gradient_check(f, x, g, 31, 0.5, 1), ConfigError);
  CHECK_THROWS_AS(gradient_check(f, x, std::vector<double>(3), 5, 0.5, 1), ConfigError);
}

TEST_CASE("validation suites pass on a clean build") {
  for (const char* s : {"operators", "taylor-green"}) {
    const SuiteReport r = run_suite(s);
    CHECK(!r.checks.empty());
    for (const Check& c : r.checks) {
      INFO(c.name << " = " << c.value);
      CHECK(c.passed());
    }
  }
  CHECK_THROWS_AS(run_suite("nope"), ConfigError);
}

TEST_CASE("report CSV") {
  SuiteReport r;
  r.checks.push_back({"s", "a, b", 1e-13, 1e-12});
  r.checks.push_back({"s", "c", 0.5, 1.0, false});
  CHECK_FALSE(r.passed());
  const auto path = std::filesystem::temp_directory_path() / "sgles_report.csv";
  write_report_csv(path, r);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "suite,check,value,bound,relation,pass");
  std::getline(in, line);
  CHECK(line == "s,\"a, b\",1e-13,9.9999999999999998e-13,<=,1");
  std::getline(in, line);
  CHECK(line == "s,\"c\",0.5,1,>=,0");
  std::filesystem::remove(path);
}
