#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "transsplat/verify/report.hpp"

namespace transsplat::verify {

struct SuiteOptions {
  std::uint64_t seed = 0;
  int threads = 1;
};

ExperimentReport uot_optimality(const SuiteOptions& options);
ExperimentReport uot_uniqueness(const SuiteOptions& options);
ExperimentReport fusion_closed_form(const SuiteOptions& options);
ExperimentReport stability_bound(const SuiteOptions& options);
ExperimentReport variance_rate(const SuiteOptions& options);
ExperimentReport gate_properties(const SuiteOptions& options);
ExperimentReport gradient_check(const SuiteOptions& options);
ExperimentReport prototype_properties(const SuiteOptions& options);
ExperimentReport leakage_ablation(const SuiteOptions& options);
ExperimentReport determinism(const SuiteOptions& options);

/// Names accepted by run_suite, "all" last.
const std::vector<std::string>& suite_names();

/// Runs one named suite, or every suite for "all". Throws InvalidArgument
/// for an unknown name.
ExperimentReport run_suite(const std::string& name, const SuiteOptions& options);

}  // namespace transsplat::verify
