#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cmdp {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
    double time_limit_seconds = 0.0;
};

/// Runs the acceptance battery (criteria 1-10). `only` restricts the run to
/// the listed ids; progress lines go to `log` when given.
std::vector<CriterionResult> run_acceptance(const std::vector<int>& only = {}, std::ostream* log = nullptr);

/// "[PASS] 3 dual-regret inequality (12.3 s / 60 s): detail"
std::string format_result(const CriterionResult& r);

} // namespace cmdp
