#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace stein::harness {

using json = nlohmann::json;

struct SuiteOptions {
    double scale = 1.0;  // multiplies sample and path counts (determinism reruns use a small scale)
    int workers = 0;
    std::uint64_t seed = 20240611;
};

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string summary;  // measured value against its threshold
    double margin = 0.0;  // positive when passing
    json detail;
    double seconds = 0.0;  // wall time, kept out of the JSON
};

json to_json(const CriterionResult& r);

// Criteria 1-10; id 11 (determinism) is driven by the caller, see determinism_check.
CriterionResult check_geometry_roundtrip(const SuiteOptions& o);   // 1
CriterionResult check_curvature_oracles(const SuiteOptions& o);    // 2
CriterionResult check_martingales(const SuiteOptions& o);          // 3
CriterionResult check_gradient_exactness(const SuiteOptions& o);   // 4
CriterionResult check_cross_derivatives(const SuiteOptions& o);    // 5
CriterionResult check_contraction_rate(const SuiteOptions& o);     // 6
CriterionResult check_smallt_exponents(const SuiteOptions& o);     // 7
CriterionResult check_hyperbolic_bound(const SuiteOptions& o);     // 8
CriterionResult check_stein_bound(const SuiteOptions& o);          // 9
CriterionResult check_spectral_decay(const SuiteOptions& o);       // 10

CriterionResult run_criterion(int id, const SuiteOptions& o);

// Suite name -> criterion ids: geometry {1, 2, 8}, martingales {3}, derivatives {4, 5}, decay {6, 7},
// compact {10}, bounds {9}.
const std::vector<std::string>& suite_names();
std::vector<int> suite_criteria(const std::string& name);

// Runs criteria twice (workers = 1, then o.workers) and compares the JSON byte for byte.
CriterionResult determinism_check(const std::vector<int>& ids, const SuiteOptions& o);

// CSV summary: id,name,passed,margin,summary.
std::string summary_csv(const std::vector<CriterionResult>& rs);

}  // namespace stein::harness
