#include "cmdp/acceptance.hpp"

#include "cmdp/exact_solver.hpp"
#include "cmdp/harness.hpp"
#include "cmdp/instance_gen.hpp"
#include "cmdp/instance_io.hpp"
#include "cmdp/learner.hpp"
#include "cmdp/report.hpp"
#include "cmdp/rng.hpp"
#include "cmdp/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace cmdp {

namespace {

struct Outcome {
    bool passed;
    std::string detail;
};

std::string fmt(double x, int precision = 6) {
    std::ostringstream out;
    out.precision(precision);
    out << x;
    return out.str();
}

/// S=3, A=2, H=3 instance shared by several criteria.
TabularCmdp reference_instance() {
    GenSpec spec;
    spec.num_states = 3;
    spec.num_actions = 2;
    spec.horizon = 3;
    spec.zeta_target = 0.5;
    spec.seed = 20240601;
    return generate(spec);
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
    Rng pick = Rng::stream(1, 0);
    double worst_gap = 0.0, worst_excess = -1.0;
    int optimal = 0, binding = 0;
    for (int i = 0; i < 100; ++i) {
        GenSpec spec;
        spec.num_states = 1 + static_cast<int>(pick.below(3));
        spec.num_actions = 1 + static_cast<int>(pick.below(2));
        spec.horizon = 1 + static_cast<int>(pick.below(2));
        spec.zeta_target = 0.02 + 0.18 * pick.uniform();
        spec.seed = 1000 + static_cast<std::uint64_t>(i);
        const auto m = generate(spec);
        const auto fast = solve_cmdp_exact(m);
        const auto slow = brute_force_cmdp(m);
        if (fast.status != slow.status)
            return {false, "status mismatch on instance " + std::to_string(i)};
        if (fast.status != SolveStatus::Optimal) continue;
        ++optimal;
        if (fast.lambda_star > 0.0) ++binding;
        worst_gap = std::max(worst_gap, std::abs(fast.optimal_value - slow.optimal_value));
        const double mixture_cost = evaluate_mixture(m, m.cost, fast.policy);
        worst_excess = std::max(worst_excess, mixture_cost - m.budget);
    }
    const bool ok = worst_gap <= 1e-6 && worst_excess <= 1e-6;
    return {ok, std::to_string(optimal) + " optimal instances (" + std::to_string(binding) +
                    " with a binding constraint), max |V_bisect - V_brute| = " + fmt(worst_gap) +
                    ", max cost - b = " + fmt(worst_excess)};
}

Outcome evaluation_correctness() {
    Rng pick = Rng::stream(2, 0);
    double worst_z = 0.0;
    for (int i = 0; i < 20; ++i) {
        GenSpec spec;
        spec.num_states = 2 + static_cast<int>(pick.below(2));
        spec.num_actions = 2;
        spec.horizon = 2 + static_cast<int>(pick.below(2));
        spec.zeta_target = 0.3;
        spec.seed = 2000 + static_cast<std::uint64_t>(i);
        const auto m = generate(spec);
        // random stochastic policy
        std::vector<double> probs;
        for (int k = 0; k < m.horizon() * m.num_states(); ++k) {
            const double p = pick.uniform();
            probs.push_back(p);
            probs.push_back(1.0 - p);
        }
        const Policy pi(m.num_states(), 2, m.horizon(), probs);
        const double exact_r = evaluate_policy(m.transition, m.reward, pi)(0, m.initial_state);
        const double exact_c = evaluate_policy(m.transition, m.cost, pi)(0, m.initial_state);
        const auto mc = monte_carlo_evaluate(m, MixturePolicy::single(pi), 100'000, 3000 + i);
        worst_z = std::max(worst_z, std::abs(mc.mean_reward - exact_r) / mc.stderr_reward);
        worst_z = std::max(worst_z, std::abs(mc.mean_cost - exact_c) / mc.stderr_cost);
    }
    return {worst_z <= 4.0, "max |MC - exact| / stderr = " + fmt(worst_z, 4) + " over 20 instances x 2 channels"};
}

double dual_regret_bound(const LearnerConfig& cfg, int horizon) {
    const double T = static_cast<double>(cfg.iterations);
    const double U = cfg.grid().cap();
    return 2.0 * cfg.grid_step * horizon * std::sqrt(T) + U * horizon / std::sqrt(T);
}

Outcome dual_regret_inequality() {
    const auto m = reference_instance();
    const double zeta = slater_constant(m).zeta;
    const int H = m.horizon();
    std::int64_t violations = 0, checks = 0;
    double worst_margin = -1e300;
    std::string per_mode;
    for (auto mode : {FeasibilityMode::Relaxed, FeasibilityMode::Strict}) {
        const double eps = mode == FeasibilityMode::Relaxed ? 0.5 * H : 1.5;
        auto cfg = derive_config(mode, eps, 0.1, m, zeta);
        cfg.episodes = 200;
        cfg.iterations = 100;
        cfg.bonus_scale = 0.1;
        const double bound = dual_regret_bound(cfg, H);
        const double U = cfg.grid().cap();
        double b_prime = 0.0;
        run_learner(m, cfg, 7, [&](const EpisodeObservation& obs) {
            b_prime = cfg.shifted_budget(m.budget);
            for (double lambda : {0.0, U}) {
                double sum = 0.0;
                for (std::size_t t = 0; t < obs.plan.lambda_trace.size(); ++t)
                    sum += (obs.plan.lambda_trace[t] - lambda) * (b_prime - obs.plan.cost_trace[t]);
                const double lhs = sum / static_cast<double>(cfg.iterations);
                ++checks;
                if (lhs > bound) ++violations;
                worst_margin = std::max(worst_margin, lhs - bound);
            }
        });
        per_mode += std::string(to_string(mode)) + " bound " + fmt(bound, 4) + "; ";
    }
    return {violations == 0, per_mode + std::to_string(checks) + " checks, " + std::to_string(violations) +
                                 " violations, max lhs - bound = " + fmt(worst_margin, 4)};
}

Outcome doubling_epochs() {
    const auto m = reference_instance();
    auto cfg = derive_config(FeasibilityMode::Relaxed, 0.5 * m.horizon(), 0.1, m, std::nullopt);
    cfg.episodes = 1024;
    cfg.iterations = 10;
    cfg.bonus_scale = 0.1;
    const auto result = run_learner(m, cfg, 11);
    const std::int64_t limit = static_cast<std::int64_t>(m.num_states()) * m.num_actions() * m.horizon() * 11;
    const std::int64_t total = result.model.total_updates();

    std::map<std::tuple<int, int, int>, std::vector<std::int64_t>> sequences;
    for (const auto& u : result.updates) sequences[{u.h, u.s, u.a}].push_back(u.batch_size);
    bool sequences_ok = static_cast<std::int64_t>(result.updates.size()) == total;
    for (const auto& [key, seq] : sequences)
        for (std::size_t j = 0; j < seq.size(); ++j)
            if (seq[j] != (j == 0 ? 1 : std::int64_t{1} << (j - 1))) sequences_ok = false;
    return {total <= limit && sequences_ok,
            "total updates " + std::to_string(total) + " <= " + std::to_string(limit) + "; " +
                std::to_string(sequences.size()) + " rows, batch sequences " +
                (sequences_ok ? "all 1,1,2,4,..." : "BROKEN")};
}

Outcome optimism_frequency() {
    const auto m = reference_instance();
    const Policy reference = Policy::uniform(m.num_states(), m.num_actions(), m.horizon());
    const double true_r = evaluate_policy(m.transition, m.reward, reference)(0, m.initial_state);
    const double true_c = evaluate_policy(m.transition, m.cost, reference)(0, m.initial_state);
    auto cfg = derive_config(FeasibilityMode::Relaxed, 0.5 * m.horizon(), 0.1, m, std::nullopt);
    cfg.episodes = 200;
    cfg.iterations = 10;
    cfg.bonus_scale = 1.0;
    const auto params = cfg.bonus_params(m.num_states(), m.num_actions(), m.horizon());
    int holds = 0;
    constexpr int trials = 200;
    for (int trial = 0; trial < trials; ++trial) {
        const auto result = run_learner(m, cfg, 5000 + static_cast<std::uint64_t>(trial));
        const auto v = optimistic_policy_values(result.model, m.reward, m.cost, reference, params);
        if (v.reward_upper(0, m.initial_state) >= true_r && true_c >= v.cost_lower(0, m.initial_state)) ++holds;
    }
    const double rate = static_cast<double>(holds) / trials;
    return {rate >= 0.99, std::to_string(holds) + "/" + std::to_string(trials) + " trials optimistic (default bonus constants, delta = 0.1)"};
}

Outcome dual_bound() {
    int escapes = 0, bound_failures = 0;
    double worst_ratio = 0.0;
    for (int i = 0; i < 50; ++i) {
        GenSpec spec;
        spec.num_states = 3;
        spec.num_actions = 2;
        spec.horizon = 3;
        spec.zeta_target = 0.5;
        spec.seed = 6000 + static_cast<std::uint64_t>(i);
        const auto m = generate(spec);
        const auto exact = solve_cmdp_exact(m);
        const double limit = m.horizon() / spec.zeta_target;
        worst_ratio = std::max(worst_ratio, exact.lambda_star / limit);
        if (!(exact.lambda_star <= limit)) ++bound_failures;

        auto cfg = derive_config(FeasibilityMode::Strict, 1.5, 0.1, m, exact.zeta);
        cfg.episodes = 20;
        cfg.iterations = 20;
        cfg.bonus_scale = 0.1;
        const double U = cfg.grid().cap();
        run_learner(m, cfg, 17, [&](const EpisodeObservation& obs) {
            for (double lambda : obs.plan.lambda_trace) {
                const double q = lambda / cfg.grid_step;
                if (lambda < 0.0 || lambda > U || std::abs(q - std::round(q)) > 1e-9) ++escapes;
            }
        });
    }
    return {bound_failures == 0 && escapes == 0,
            "max lambda*/(H/zeta) = " + fmt(worst_ratio, 4) + ", bound failures " +
                std::to_string(bound_failures) + ", grid escapes " + std::to_string(escapes)};
}

/// Clipped recursions for a fixed deterministic policy with no bonus,
/// written out directly from the empirical rows.
std::pair<double, double> zero_bonus_values(const EmpiricalModel& model, const TabularCmdp& m, const Policy& pi) {
    const int S = m.num_states(), H = m.horizon();
    std::vector<double> vr(S, 0.0), vc(S, 0.0);
    for (int h = H - 1; h >= 0; --h) {
        std::vector<double> nr(S), nc(S);
        for (int s = 0; s < S; ++s) {
            const int a = pi.action(h, s);
            const auto p = model.kernel_row(h, s, a);
            double er = 0.0, ec = 0.0;
            for (int sn = 0; sn < S; ++sn) {
                er += p[sn] * vr[sn];
                ec += p[sn] * vc[sn];
            }
            nr[s] = std::min(m.reward(h, s, a) + er, static_cast<double>(H));
            nc[s] = std::max(m.cost(h, s, a) + ec, 0.0);
        }
        vr = nr;
        vc = nc;
    }
    return {vr[m.initial_state], vc[m.initial_state]};
}

Outcome greedy_primal() {
    double worst = 0.0;
    const double U = 2.0;
    for (int i = 0; i < 50; ++i) {
        GenSpec spec;
        spec.num_states = 2;
        spec.num_actions = 2;
        spec.horizon = 2;
        spec.zeta_target = 0.3;
        spec.seed = 7000 + static_cast<std::uint64_t>(i);
        const auto m = generate(spec);
        EmpiricalModel model(2, 2, 2);
        Rng rng = Rng::stream(7100 + static_cast<std::uint64_t>(i), 0);
        for (int h = 0; h < 2; ++h)
            for (int s = 0; s < 2; ++s)
                for (int a = 0; a < 2; ++a)
                    for (int rep = 0; rep < 4; ++rep)
                        model.record_transition(h, s, a,
                                                static_cast<int>(rng.categorical(m.transition.row(h, s, a))));
        BonusParams params;
        params.scale = 0.0;
        params.horizon = 2;
        for (double lambda : {0.0, 0.5, U}) {
            const auto greedy = lagrangian_greedy_backup(model, m.reward, m.cost, lambda, params);
            const double greedy_value =
                greedy.reward_upper(0, m.initial_state) - lambda * greedy.cost_lower(0, m.initial_state);
            double best = -1e300;
            for (std::size_t k = 0; k < deterministic_policy_count(2, 2, 2); ++k) {
                const auto [r, c] = zero_bonus_values(model, m, enumerate_deterministic(2, 2, 2, k));
                best = std::max(best, r - lambda * c);
            }
            worst = std::max(worst, std::abs(greedy_value - best));
        }
    }
    return {worst <= 1e-9, "max |greedy - enumeration| = " + fmt(worst, 3) + " over 50 instances x 3 lambdas"};
}

Outcome convergence_trend() {
    const auto m = preset("two_state_chain");
    const double H = m.horizon();
    const double eps = 0.5 * H;
    const double zeta = slater_constant(m).zeta;
    std::ostringstream detail;
    bool ok = true;

    auto relaxed = derive_config(FeasibilityMode::Relaxed, eps, 0.1, m, zeta);
    relaxed.episodes = 5000;
    relaxed.iterations = 50;
    relaxed.bonus_scale = 0.1;
    ExperimentOptions options;
    options.epsilon = eps;
    const auto run = run_experiment(m, relaxed, 2024, options);
    const auto& rows = run.record.rows;
    const std::size_t tenth = rows.size() / 10;
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < tenth; ++i) {
        first += run.record.header.optimal_value - rows[i].v_r_true;
        last += run.record.header.optimal_value - rows[rows.size() - tenth + i].v_r_true;
    }
    first /= static_cast<double>(tenth);
    last /= static_cast<double>(tenth);
    const bool trend = last < 0.5 * first;
    ok = ok && trend;
    detail << "(a) regret/episode first 10% " << fmt(first, 4) << ", last 10% " << fmt(last, 4)
           << (trend ? " ok" : " FAIL");
    ok = ok && run.verdict.passed();
    detail << "; (b) relaxed V_r " << fmt(run.verdict.reward_value, 4) << " vs V* " << fmt(run.verdict.optimal_value, 4)
           << ", V_c " << fmt(run.verdict.cost_value, 4) << " vs b " << fmt(m.budget, 4)
           << (run.verdict.passed() ? " ok" : " FAIL");

    auto strict = derive_config(FeasibilityMode::Strict, eps, 0.1, m, zeta);
    strict.episodes = 5000;
    strict.iterations = 50;
    strict.bonus_scale = 0.1;
    const auto strict_run = run_learner(m, strict, 2024);
    const double vc = evaluate_mixture(m, m.cost, strict_run.final_policy);
    const bool strict_ok = vc <= m.budget + 0.05 * H;
    ok = ok && strict_ok;
    detail << "; (c) strict Delta " << fmt(strict.budget_shift, 4) << ", V_c " << fmt(vc, 4) << " <= "
           << fmt(m.budget + 0.05 * H, 4) << (strict_ok ? " ok" : " FAIL");
    return {ok, detail.str()};
}

Outcome rounding_invariants() {
    const DualGrid grid(0.03, 1.0);
    const double U = grid.cap();
    Rng rng = Rng::stream(9, 0);
    int failures = 0;
    double worst = 0.0;
    for (int i = 0; i < 100'000; ++i) {
        const double lambda = -0.5 + (U + 1.0) * rng.uniform();
        const double rounded = round_to_grid(lambda, grid);
        if (lambda < 0.0) {
            if (rounded != 0.0) ++failures;
        } else if (lambda > U) {
            if (rounded != U) ++failures;
        } else {
            const double err = std::abs(rounded - lambda);
            worst = std::max(worst, err);
            if (err > grid.step() / 2 + 1e-12) ++failures;
        }
    }
    return {failures == 0, "eps1 = 0.03, U = " + fmt(U) + ": max in-range error " + fmt(worst, 6) + " (limit " +
                               fmt(grid.step() / 2, 6) + "), failures " + std::to_string(failures)};
}

Outcome reproducibility() {
    const auto m = preset("risky_shortcut");
    auto cfg = derive_config(FeasibilityMode::Relaxed, 0.5 * m.horizon(), 0.1, m, std::nullopt);
    cfg.episodes = 300;
    cfg.iterations = 20;
    cfg.bonus_scale = 0.1;
    ExperimentOptions options;
    options.epsilon = 0.5 * m.horizon();
    const auto base = std::filesystem::temp_directory_path() / "cmdp_acceptance_repro";
    std::string texts[2];
    for (int i = 0; i < 2; ++i) {
        const auto dir = base / ("run" + std::to_string(i));
        const auto run = run_experiment(m, cfg, 99, options);
        const auto files = emit_report(run.record, dir, nlohmann::json::object(), false);
        std::ifstream in(files.csv, std::ios::binary);
        texts[i].assign(std::istreambuf_iterator<char>(in), {});
    }
    std::filesystem::remove_all(base);
    const bool same = !texts[0].empty() && texts[0] == texts[1];
    return {same, std::to_string(texts[0].size()) + " bytes per run.csv, " + (same ? "identical" : "DIFFERENT")};
}

struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
};

} // namespace

std::vector<CriterionResult> run_acceptance(const std::vector<int>& only, std::ostream* log) {
    const std::vector<Criterion> criteria = {
        {1, "oracle equivalence (bisection vs brute force)", 10, oracle_equivalence},
        {2, "evaluation correctness (DP vs Monte Carlo)", 60, evaluation_correctness},
        {3, "deterministic dual-regret inequality", 60, dual_regret_inequality},
        {4, "doubling-epoch bound", 60, doubling_epochs},
        {5, "optimism frequency", 300, optimism_frequency},
        {6, "dual-variable bound", 60, dual_bound},
        {7, "greedy primal equals enumeration", 60, greedy_primal},
        {8, "end-to-end convergence trend", 600, convergence_trend},
        {9, "rounding and grid invariants", 5, rounding_invariants},
        {10, "reproducibility of run.csv", 60, reproducibility},
    };
    std::vector<CriterionResult> results;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        CriterionResult r;
        r.id = c.id;
        r.name = c.name;
        r.time_limit_seconds = c.limit_seconds;
        const auto start = std::chrono::steady_clock::now();
        try {
            const auto outcome = c.run();
            r.passed = outcome.passed;
            r.detail = outcome.detail;
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail = std::string("exception: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (r.seconds >= r.time_limit_seconds) {
            r.passed = false;
            r.detail += " [time limit exceeded]";
        }
        if (log) *log << format_result(r) << std::endl;
        results.push_back(std::move(r));
    }
    return results;
}

std::string format_result(const CriterionResult& r) {
    std::ostringstream out;
    out << (r.passed ? "[PASS] " : "[FAIL] ") << r.id << " " << r.name << " (" << fmt(r.seconds, 3) << " s / "
        << r.time_limit_seconds << " s): " << r.detail;
    return out.str();
}

} // namespace cmdp
