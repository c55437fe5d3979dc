#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace transsplat::verify {

/// One measured quantity against its acceptance bound.
struct Check {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string relation;  // "<=", ">=", "==" or "in"
  double upper = 0.0;    // second bound for "in"
  bool pass = false;
  std::string detail;

  static Check at_most(std::string name, double measured, double bound, std::string detail = {});
  static Check at_least(std::string name, double measured, double bound, std::string detail = {});
  static Check within(std::string name, double measured, double lo, double hi, std::string detail = {});
  static Check exactly(std::string name, double measured, double expected, std::string detail = {});
};

struct ExperimentReport {
  std::string name;
  std::vector<Check> checks;
  double seconds = 0.0;
  std::string table;  // optional CSV produced by the suite

  bool passed() const;
  void merge(const ExperimentReport& other);
};

nlohmann::json to_json(const ExperimentReport& report);
/// One line per check and a closing verdict.
std::string format_report(const ExperimentReport& report);

}  // namespace transsplat::verify
