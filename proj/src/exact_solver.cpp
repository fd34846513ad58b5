#include "cmdp/exact_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cmdp {

GreedySolution solve_unconstrained(const Kernel& kernel, const StageTable& stage, Sense sense) {
    const int S = kernel.num_states(), A = kernel.num_actions(), H = kernel.horizon();
    if (stage.num_states() != S || stage.num_actions() != A || stage.horizon() != H)
        throw DimensionMismatch("stage function shape differs from kernel");

    ValueTable v(S, H);
    std::vector<int> actions(static_cast<std::size_t>(S) * H, 0);
    const bool maximize = sense == Sense::Maximize;
    for (int h = H - 1; h >= 0; --h) {
        const auto next = v.row(h + 1);
        for (int s = 0; s < S; ++s) {
            int best_action = 0;
            double best = 0.0;
            for (int a = 0; a < A; ++a) {
                const auto p = kernel.row(h, s, a);
                double q = stage(h, s, a);
                for (int sn = 0; sn < S; ++sn) q += p[sn] * next[sn];
                if (a == 0 || (maximize ? q > best : q < best)) {
                    best = q;
                    best_action = a;
                }
            }
            v(h, s) = best;
            actions[static_cast<std::size_t>(h) * S + s] = best_action;
        }
    }
    return {Policy::deterministic(S, A, H, actions), std::move(v)};
}

DualEvaluation dual_value(const TabularCmdp& m, double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("dual_value: lambda must be >= 0");
    auto greedy = solve_unconstrained(m.transition, m.reward.minus_scaled(m.cost, lambda), Sense::Maximize);
    DualEvaluation out;
    out.g_value = greedy.values(0, m.initial_state) + lambda * m.budget;
    out.reward_value = evaluate_policy(m.transition, m.reward, greedy.policy)(0, m.initial_state);
    out.cost_value = evaluate_policy(m.transition, m.cost, greedy.policy)(0, m.initial_state);
    out.policy = std::move(greedy.policy);
    return out;
}

const char* to_string(SolveStatus status) {
    return status == SolveStatus::Optimal ? "Optimal" : "Infeasible";
}

namespace {

ExactSolution infeasible_solution(const TabularCmdp& m, const SlaterResult& slater) {
    ExactSolution out;
    out.status = SolveStatus::Infeasible;
    out.zeta = slater.zeta;
    out.optimal_value = evaluate_policy(m.transition, m.reward, slater.min_cost_policy)(0, m.initial_state);
    out.optimal_cost = m.budget - slater.zeta;
    out.policy = MixturePolicy::single(slater.min_cost_policy);
    return out;
}

/// Mixture of a feasible (cost <= b) and an infeasible (cost > b) policy
/// that spends exactly b.
struct PairMix {
    double feasible_weight;
    double value;
    double cost;
};

PairMix mix_to_budget(double b, double v_feasible, double c_feasible, double v_infeasible, double c_infeasible) {
    double alpha = 1.0;
    if (c_infeasible != c_feasible) alpha = std::clamp((c_infeasible - b) / (c_infeasible - c_feasible), 0.0, 1.0);
    return {alpha, alpha * v_feasible + (1.0 - alpha) * v_infeasible,
            alpha * c_feasible + (1.0 - alpha) * c_infeasible};
}

MixturePolicy two_point_mixture(Policy feasible, Policy infeasible, double feasible_weight) {
    if (feasible_weight >= 1.0) return MixturePolicy::single(std::move(feasible));
    if (feasible_weight <= 0.0) return MixturePolicy::single(std::move(infeasible));
    return MixturePolicy({{feasible_weight, std::make_shared<const Policy>(std::move(feasible))},
                          {1.0 - feasible_weight, std::make_shared<const Policy>(std::move(infeasible))}});
}

} // namespace

ExactSolution solve_cmdp_exact(const TabularCmdp& m, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("solve_cmdp_exact: tol must be positive");
    const auto slater = slater_constant(m);
    if (slater.zeta < 0.0) return infeasible_solution(m, slater);

    const double b = m.budget;
    auto left = dual_value(m, 0.0);
    if (left.cost_value <= b) {
        ExactSolution out;
        out.optimal_value = left.reward_value;
        out.optimal_cost = left.cost_value;
        out.policy = MixturePolicy::single(std::move(left.policy));
        out.zeta = slater.zeta;
        return out;
    }

    const double cap = 4.0 * m.horizon() / std::max(slater.zeta, tol);
    double lambda_hi = 1.0;
    auto right = dual_value(m, lambda_hi);
    while (right.cost_value > b) {
        if (lambda_hi > cap) {
            if (deterministic_policy_count(m.num_states(), m.num_actions(), m.horizon()) <= kDefaultEnumerationLimit)
                return brute_force_cmdp(m);
            throw NumericalDegeneracy("solve_cmdp_exact: no feasible greedy policy below lambda cap");
        }
        lambda_hi *= 2.0;
        right = dual_value(m, lambda_hi);
    }

    double lambda_lo = 0.0;
    while (lambda_hi - lambda_lo > tol) {
        const double mid = 0.5 * (lambda_lo + lambda_hi);
        if (mid <= lambda_lo || mid >= lambda_hi) break;
        auto probe = dual_value(m, mid);
        if (probe.cost_value <= b) {
            lambda_hi = mid;
            right = std::move(probe);
        } else {
            lambda_lo = mid;
            left = std::move(probe);
        }
    }

    const auto mix = mix_to_budget(b, right.reward_value, right.cost_value, left.reward_value, left.cost_value);
    ExactSolution out;
    out.optimal_value = mix.value;
    out.optimal_cost = mix.cost;
    out.lambda_star = 0.5 * (lambda_lo + lambda_hi);
    out.zeta = slater.zeta;
    out.policy = two_point_mixture(std::move(right.policy), std::move(left.policy), mix.feasible_weight);
    return out;
}

std::size_t deterministic_policy_count(int num_states, int num_actions, int horizon) {
    std::size_t count = 1;
    const std::size_t digits = static_cast<std::size_t>(num_states) * horizon;
    for (std::size_t i = 0; i < digits; ++i) {
        if (count > std::numeric_limits<std::size_t>::max() / num_actions)
            return std::numeric_limits<std::size_t>::max();
        count *= num_actions;
    }
    return count;
}

Policy enumerate_deterministic(int num_states, int num_actions, int horizon, std::size_t index) {
    std::vector<int> actions(static_cast<std::size_t>(num_states) * horizon);
    for (auto& a : actions) {
        a = static_cast<int>(index % num_actions);
        index /= num_actions;
    }
    return Policy::deterministic(num_states, num_actions, horizon, actions);
}

ExactSolution brute_force_cmdp(const TabularCmdp& m, std::size_t max_policies) {
    const int S = m.num_states(), A = m.num_actions(), H = m.horizon();
    const std::size_t count = deterministic_policy_count(S, A, H);
    if (count > max_policies) {
        std::ostringstream msg;
        msg << "brute_force_cmdp: " << A << "^(" << S << "*" << H << ") policies exceed the limit of "
            << max_policies;
        throw InstanceTooLarge(msg.str());
    }

    std::vector<double> reward(count), cost(count);
    std::size_t min_cost_index = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const auto pi = enumerate_deterministic(S, A, H, i);
        reward[i] = evaluate_policy(m.transition, m.reward, pi)(0, m.initial_state);
        cost[i] = evaluate_policy(m.transition, m.cost, pi)(0, m.initial_state);
        if (cost[i] < cost[min_cost_index]) min_cost_index = i;
    }

    const double b = m.budget;
    const double zeta = b - cost[min_cost_index];
    if (cost[min_cost_index] > b) {
        ExactSolution out;
        out.status = SolveStatus::Infeasible;
        out.zeta = zeta;
        out.optimal_value = reward[min_cost_index];
        out.optimal_cost = cost[min_cost_index];
        out.policy = MixturePolicy::single(enumerate_deterministic(S, A, H, min_cost_index));
        return out;
    }

    std::vector<std::size_t> feasible, infeasible;
    std::size_t best_single = min_cost_index;
    for (std::size_t i = 0; i < count; ++i) {
        if (cost[i] <= b) {
            feasible.push_back(i);
            if (reward[i] > reward[best_single]) best_single = i;
        } else {
            infeasible.push_back(i);
        }
    }

    double best_value = reward[best_single];
    double best_cost = cost[best_single];
    std::size_t best_f = best_single, best_u = best_single;
    double best_alpha = 1.0;
    double best_slope = 0.0;
    for (std::size_t u : infeasible) {
        if (reward[u] <= best_value) continue;
        for (std::size_t f : feasible) {
            const auto mix = mix_to_budget(b, reward[f], cost[f], reward[u], cost[u]);
            if (mix.value > best_value) {
                best_value = mix.value;
                best_cost = mix.cost;
                best_f = f;
                best_u = u;
                best_alpha = mix.feasible_weight;
                best_slope = (reward[u] - reward[f]) / (cost[u] - cost[f]);
            }
        }
    }

    ExactSolution out;
    out.optimal_value = best_value;
    out.optimal_cost = best_cost;
    out.lambda_star = best_slope;
    out.zeta = zeta;
    out.policy = best_f == best_u ? MixturePolicy::single(enumerate_deterministic(S, A, H, best_f))
                                  : two_point_mixture(enumerate_deterministic(S, A, H, best_f),
                                                      enumerate_deterministic(S, A, H, best_u), best_alpha);
    return out;
}

} // namespace cmdp
