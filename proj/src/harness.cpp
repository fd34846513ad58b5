#include "cmdp/harness.hpp"

#include "cmdp/instance_io.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace cmdp {

MetricsAccumulator::MetricsAccumulator(const TabularCmdp& m, const ExactSolution& exact, std::int64_t eval_every)
    : m_(&m), optimal_value_(exact.optimal_value), eval_every_(eval_every) {
    if (exact.status != SolveStatus::Optimal) throw std::invalid_argument("metrics need an optimal exact solution");
    if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
}

MetricsAccumulator::Values MetricsAccumulator::component_values(const std::shared_ptr<const Policy>& pi) {
    if (auto it = cache_.find(pi.get()); it != cache_.end()) return it->second.second;
    const Values v{evaluate_policy(m_->transition, m_->reward, *pi)(0, m_->initial_state),
                   evaluate_policy(m_->transition, m_->cost, *pi)(0, m_->initial_state)};
    cache_.emplace(pi.get(), std::make_pair(pi, v));
    return v;
}

void MetricsAccumulator::add_episode(const MixturePolicy& mix, double lambda_mean, std::int64_t updates_cumulative,
                                     double wall_ms) {
    const auto first = mix.components().front().policy;
    if (first->num_states() != m_->num_states() || first->num_actions() != m_->num_actions() ||
        first->horizon() != m_->horizon())
        throw DimensionMismatch("episode policy shape differs from instance");

    EpisodeRow row;
    row.k = static_cast<std::int64_t>(rows_.size()) + 1;
    row.lambda_mean = lambda_mean;
    row.model_updates_cum = updates_cumulative;
    row.wall_ms = wall_ms;
    const bool evaluate = (row.k - 1) % eval_every_ == 0;
    if (evaluate) {
        for (const auto& c : mix.components()) {
            const auto v = component_values(c.policy);
            row.v_r_true += c.weight * v.reward;
            row.v_c_true += c.weight * v.cost;
        }
    }
    rows_.push_back(row);
    evaluated_.push_back(evaluate);
    last_mixture_ = mix;
}

RunRecord MetricsAccumulator::finish(RunHeader header) && {
    if (!rows_.empty() && !evaluated_.back()) {
        EpisodeRow& last = rows_.back();
        last.v_r_true = last.v_c_true = 0.0;
        for (const auto& c : last_mixture_.components()) {
            const auto v = component_values(c.policy);
            last.v_r_true += c.weight * v.reward;
            last.v_c_true += c.weight * v.cost;
        }
        evaluated_.back() = true;
    }
    // linear interpolation between evaluated neighbours
    std::size_t prev = 0;
    for (std::size_t i = 1; i < rows_.size(); ++i) {
        if (!evaluated_[i]) continue;
        for (std::size_t j = prev + 1; j < i; ++j) {
            const double w = static_cast<double>(j - prev) / static_cast<double>(i - prev);
            rows_[j].v_r_true = (1.0 - w) * rows_[prev].v_r_true + w * rows_[i].v_r_true;
            rows_[j].v_c_true = (1.0 - w) * rows_[prev].v_c_true + w * rows_[i].v_c_true;
            rows_[j].interpolated = true;
        }
        prev = i;
    }

    double regret = 0.0, excess = 0.0;
    for (auto& row : rows_) {
        regret += optimal_value_ - row.v_r_true;
        excess += row.v_c_true - m_->budget;
        row.regret_cum = regret;
        row.cv_cum = std::max(0.0, excess);
    }
    header.optimal_value = optimal_value_;
    header.budget = m_->budget;
    return RunRecord{std::move(header), std::move(rows_)};
}

RunRecord compute_metrics(const TabularCmdp& m, const ExactSolution& exact,
                          std::span<const MixturePolicy> episode_mixtures) {
    MetricsAccumulator acc(m, exact);
    for (const auto& mix : episode_mixtures) acc.add_episode(mix, 0.0, 0);
    RunHeader header;
    header.instance_hash = instance_hash(m);
    header.zeta = exact.zeta;
    return std::move(acc).finish(std::move(header));
}

Verdict check_final_policy(const TabularCmdp& m, const ExactSolution& exact, const MixturePolicy& pi_bar,
                           double epsilon, FeasibilityMode mode) {
    Verdict v;
    v.mode = mode;
    v.epsilon = epsilon;
    v.reward_value = evaluate_mixture(m, m.reward, pi_bar);
    v.cost_value = evaluate_mixture(m, m.cost, pi_bar);
    v.optimal_value = exact.optimal_value;
    v.budget = m.budget;
    v.reward_ok = v.reward_value >= exact.optimal_value - epsilon - kVerdictTolerance;
    const double allowance = mode == FeasibilityMode::Relaxed ? epsilon : 0.0;
    v.cost_ok = v.cost_value <= m.budget + allowance + kVerdictTolerance;
    return v;
}

nlohmann::json to_json(const Verdict& v) {
    return {{"mode", to_string(v.mode)},       {"epsilon", v.epsilon},     {"reward_value", v.reward_value},
            {"cost_value", v.cost_value},      {"optimal_value", v.optimal_value}, {"budget", v.budget},
            {"reward_ok", v.reward_ok},        {"cost_ok", v.cost_ok},     {"passed", v.passed()}};
}

nlohmann::json to_json(const LearnerConfig& cfg) {
    nlohmann::json j = {{"K", cfg.episodes},
                        {"T", cfg.iterations},
                        {"U", cfg.dual_cap},
                        {"eps1", cfg.grid_step},
                        {"delta", cfg.delta},
                        {"mode", to_string(cfg.mode)},
                        {"budget_shift", cfg.budget_shift},
                        {"c1", cfg.c1},
                        {"c2", cfg.c2},
                        {"bonus_scale", cfg.bonus_scale},
                        {"warm_start", cfg.warm_start}};
    if (cfg.eta_override) j["eta"] = *cfg.eta_override;
    if (cfg.zeta) j["zeta"] = *cfg.zeta;
    return j;
}

ExperimentResult run_experiment(const TabularCmdp& m, const LearnerConfig& cfg, std::uint64_t seed,
                                const ExperimentOptions& options) {
    auto exact = solve_cmdp_exact(m, options.solver_tolerance);
    if (exact.status != SolveStatus::Optimal) throw std::runtime_error("instance is infeasible (zeta < 0)");

    MetricsAccumulator metrics(m, exact, options.eval_every);
    using Clock = std::chrono::steady_clock;
    auto last = Clock::now();
    auto learner = run_learner(m, cfg, seed, [&](const EpisodeObservation& obs) {
        const auto& trace = obs.plan.lambda_trace;
        const double lambda_mean = std::accumulate(trace.begin(), trace.end(), 0.0) / static_cast<double>(trace.size());
        double wall_ms = 0.0;
        if (options.record_timing) {
            const auto now = Clock::now();
            wall_ms = std::chrono::duration<double, std::milli>(now - last).count();
            last = now;
        }
        metrics.add_episode(obs.plan.mixture, lambda_mean, obs.updates_cumulative, wall_ms);
    });

    RunHeader header;
    header.config = to_json(cfg);
    header.config["H"] = m.horizon();
    header.config["eta_effective"] = cfg.eta(m.horizon());
    header.config["budget_prime"] = learner.budget_prime;
    header.seed = seed;
    header.instance_hash = instance_hash(m);
    header.zeta = exact.zeta;
    auto record = std::move(metrics).finish(std::move(header));
    auto verdict = check_final_policy(m, exact, learner.final_policy, options.epsilon, cfg.mode);
    return {std::move(exact), std::move(learner), std::move(record), verdict};
}

} // namespace cmdp
