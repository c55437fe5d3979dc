#include "transsplat/verify/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace transsplat::verify {

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

Check Check::at_most(std::string name, double measured, double bound, std::string detail) {
  return {std::move(name), measured, bound, "<=", 0.0, measured <= bound, std::move(detail)};
}

Check Check::at_least(std::string name, double measured, double bound, std::string detail) {
  return {std::move(name), measured, bound, ">=", 0.0, measured >= bound, std::move(detail)};
}

Check Check::within(std::string name, double measured, double lo, double hi, std::string detail) {
  return {std::move(name), measured, lo, "in", hi, measured >= lo && measured <= hi, std::move(detail)};
}

Check Check::exactly(std::string name, double measured, double expected, std::string detail) {
  return {std::move(name), measured, expected, "==", 0.0, measured == expected, std::move(detail)};
}

bool ExperimentReport::passed() const {
  if (checks.empty()) return false;
  for (const Check& c : checks)
    if (!c.pass) return false;
  return true;
}

void ExperimentReport::merge(const ExperimentReport& other) {
  for (Check c : other.checks) {
    c.name = other.name + "/" + c.name;
    checks.push_back(std::move(c));
  }
  seconds += other.seconds;
  if (!other.table.empty()) table += (table.empty() ? "" : "\n") + other.table;
}

nlohmann::json to_json(const ExperimentReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const Check& c : report.checks) {
    nlohmann::json j{{"name", c.name},
                     {"pass", c.pass},
                     {"measured", std::isfinite(c.measured) ? nlohmann::json(c.measured) : nlohmann::json(nullptr)},
                     {"relation", c.relation},
                     {"tolerance", c.tolerance}};
    if (c.relation == "in") j["upper"] = c.upper;
    if (!c.detail.empty()) j["detail"] = c.detail;
    checks.push_back(std::move(j));
  }
  nlohmann::json j{{"name", report.name}, {"pass", report.passed()}, {"seconds", report.seconds}, {"checks", checks}};
  if (!report.table.empty()) j["table"] = report.table;
  return j;
}

std::string format_report(const ExperimentReport& report) {
  std::ostringstream out;
  for (const Check& c : report.checks) {
    out << (c.pass ? "  ok   " : "  FAIL ") << c.name << ": " << number(c.measured) << ' ' << c.relation << ' ';
    if (c.relation == "in")
      out << '[' << number(c.tolerance) << ", " << number(c.upper) << ']';
    else
      out << number(c.tolerance);
    if (!c.detail.empty()) out << "  (" << c.detail << ')';
    out << '\n';
  }
  out << report.name << ": " << (report.passed() ? "PASS" : "FAIL") << " in " << number(report.seconds) << " s\n";
  return out.str();
}

}  // namespace transsplat::verify
