#pragma once

#include "cmdp/core.hpp"
#include "cmdp/exact_solver.hpp"
#include "cmdp/learner.hpp"

#include "json.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace cmdp {

/// One row of run.csv.
struct EpisodeRow {
    std::int64_t k = 0; ///< 1-based episode number
    double v_r_true = 0.0;
    double v_c_true = 0.0;
    double regret_cum = 0.0;
    double cv_cum = 0.0;
    double lambda_mean = 0.0;
    std::int64_t model_updates_cum = 0;
    double wall_ms = 0.0;
    bool interpolated = false; ///< metrics filled in from neighbouring episodes

    bool operator==(const EpisodeRow&) const = default;
};

struct RunHeader {
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::string instance_hash;
    double zeta = 0.0;
    double optimal_value = 0.0;
    double budget = 0.0;
};

struct RunRecord {
    RunHeader header;
    std::vector<EpisodeRow> rows;

    double regret_total() const { return rows.empty() ? 0.0 : rows.back().regret_cum; }
    double cv_total() const { return rows.empty() ? 0.0 : rows.back().cv_cum; }
};

/// Regret(K) = sum (V* - V_r^{pi_k}) and CV(K) = (sum (V_c^{pi_k} - b))_+,
/// with every pi_k evaluated exactly on the true kernel.
///
/// With eval_every = n > 1 only episodes 1, 1 + n, 1 + 2n, ... and the last
/// are evaluated; the others are linearly interpolated and flagged.
class MetricsAccumulator {
public:
    MetricsAccumulator(const TabularCmdp& m, const ExactSolution& exact, std::int64_t eval_every = 1);

    void add_episode(const MixturePolicy& mix, double lambda_mean, std::int64_t updates_cumulative,
                     double wall_ms = 0.0);

    RunRecord finish(RunHeader header) &&;

private:
    struct Values {
        double reward;
        double cost;
    };
    Values component_values(const std::shared_ptr<const Policy>& pi);

    const TabularCmdp* m_;
    double optimal_value_;
    std::int64_t eval_every_;
    std::vector<EpisodeRow> rows_;
    std::vector<bool> evaluated_;
    MixturePolicy last_mixture_; ///< evaluated at finish() if it was skipped
    std::unordered_map<const Policy*, std::pair<std::shared_ptr<const Policy>, Values>> cache_;
};

/// Batch form of MetricsAccumulator for a finished list of episode policies.
RunRecord compute_metrics(const TabularCmdp& m, const ExactSolution& exact,
                          std::span<const MixturePolicy> episode_mixtures);

inline constexpr double kVerdictTolerance = 1e-9;

struct Verdict {
    FeasibilityMode mode = FeasibilityMode::Relaxed;
    double epsilon = 0.0;
    double reward_value = 0.0;
    double cost_value = 0.0;
    double optimal_value = 0.0;
    double budget = 0.0;
    bool reward_ok = false;
    bool cost_ok = false;

    bool passed() const { return reward_ok && cost_ok; }
};

/// Relaxed: V_r >= V* - eps and V_c <= b + eps. Strict: V_r >= V* - eps and
/// V_c <= b. Both comparisons allow kVerdictTolerance of rounding.
Verdict check_final_policy(const TabularCmdp& m, const ExactSolution& exact, const MixturePolicy& pi_bar,
                           double epsilon, FeasibilityMode mode);

nlohmann::json to_json(const Verdict& v);
nlohmann::json to_json(const LearnerConfig& cfg);

struct ExperimentOptions {
    std::int64_t eval_every = 1;
    bool record_timing = false; ///< wall_ms stays 0 unless set, so run.csv is reproducible
    double epsilon = 0.0;       ///< tolerance used for the final verdict
    double solver_tolerance = kDefaultSolverTolerance;
};

struct ExperimentResult {
    ExactSolution exact;
    LearnerResult learner;
    RunRecord record;
    Verdict verdict;
};

/// Solve the instance exactly, run the learner, and score every episode.
/// Throws std::runtime_error if the instance is infeasible.
ExperimentResult run_experiment(const TabularCmdp& m, const LearnerConfig& cfg, std::uint64_t seed,
                                const ExperimentOptions& options);

} // namespace cmdp
