#pragma once

// Self-checks exposed through `sgles validate`. Each suite evaluates a list
// of residuals against fixed bounds on freshly built fields; nothing is read
// from disk.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sgles/timestepping.hpp"

namespace sgles {

struct Check {
  std::string suite;
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool at_most = true;  // value <= bound, otherwise value >= bound

  bool passed() const { return at_most ? value <= bound : value >= bound; }
};

struct SuiteReport {
  std::vector<Check> checks;
  bool passed() const;
};

// operators, filters, taylor-green, gradients; "all" runs each in turn.
const std::vector<std::string>& suite_names();
SuiteReport run_suite(const std::string& name, std::uint64_t seed = 0);

// suite,check,value,bound,relation,pass
void write_report_csv(const std::filesystem::path& path, const SuiteReport& r);

// Relative 2-norm gap between `grad` and central differences of `f` over
// `samples` distinct coordinates drawn with `seed`.
double gradient_check(const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& theta,
                      const std::vector<double>& grad, int samples, double h, std::uint64_t seed);

// Coefficients of the stability polynomial R(z) = 1 + z b^T (I - zA)^{-1} 1
// up to z^stages, read off the tableau.
std::vector<double> amplification_coefficients(const RKTableau& tab);

}  // namespace sgles
