#pragma once

#include "cmdp/core.hpp"

#include <cstddef>
#include <stdexcept>

namespace cmdp {

enum class Sense { Maximize, Minimize };

struct GreedySolution {
    Policy policy;     ///< deterministic
    ValueTable values; ///< exact value of `policy`
};

/// Backward DP on a (possibly signed) stage function. Exact ties go to the
/// lowest action index, which makes the returned policy a deterministic
/// function of the inputs.
GreedySolution solve_unconstrained(const Kernel& kernel, const StageTable& stage, Sense sense);

struct DualEvaluation {
    double g_value = 0.0;  ///< max_pi V_r - lambda (V_c - b)
    Policy policy;         ///< greedy policy on r - lambda c
    double reward_value = 0.0;
    double cost_value = 0.0;
};

/// Lagrangian dual function g(lambda); b - cost_value is a subgradient.
DualEvaluation dual_value(const TabularCmdp& m, double lambda);

enum class SolveStatus { Optimal, Infeasible };

const char* to_string(SolveStatus status);

struct ExactSolution {
    double optimal_value = 0.0;
    double optimal_cost = 0.0;
    MixturePolicy policy; ///< at most two deterministic components
    double lambda_star = 0.0;
    SolveStatus status = SolveStatus::Optimal;
    double zeta = 0.0;
};

inline constexpr double kDefaultSolverTolerance = 1e-8;
inline constexpr std::size_t kDefaultEnumerationLimit = 4096;

class InstanceTooLarge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalDegeneracy : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Optimal CMDP solution by bisection on the dual variable.
///
/// If the unconstrained optimum is feasible it is returned with
/// lambda_star = 0. Otherwise lambda is bracketed to width `tol` between an
/// infeasible greedy policy (left) and a feasible one (right), and the two
/// are mixed so that the mixture spends exactly the budget. For an
/// infeasible instance the min-cost policy is returned with status
/// Infeasible.
ExactSolution solve_cmdp_exact(const TabularCmdp& m, double tol = kDefaultSolverTolerance);

/// Exhaustive oracle: every deterministic policy and every feasible
/// two-policy mixture. Throws InstanceTooLarge when A^(S*H) > max_policies.
/// lambda_star is the chord slope of the optimal pair (0 for single-policy
/// optima).
ExactSolution brute_force_cmdp(const TabularCmdp& m, std::size_t max_policies = kDefaultEnumerationLimit);

/// A^(S*H), saturating at SIZE_MAX.
std::size_t deterministic_policy_count(int num_states, int num_actions, int horizon);

/// The i-th deterministic policy in mixed-radix order: digit (h*S + s) is the
/// action at (h, s), least significant first.
Policy enumerate_deterministic(int num_states, int num_actions, int horizon, std::size_t index);

} // namespace cmdp
