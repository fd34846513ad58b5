#include "doctest.h"
#include "support.hpp"

#include "cmdp/exact_solver.hpp"
#include "cmdp/learner.hpp"

#include <cmath>
#include <vector>

using namespace cmdp;

TEST_CASE("doubling triggers fire at visits 1, 2, 4, 8") {
    EmpiricalModel model(2, 2, 1);
    std::vector<int> fired;
    std::vector<std::int64_t> sizes;
    for (int visit = 1; visit <= 8; ++visit) {
        if (model.record_transition(0, 1, 0, visit % 2)) {
            fired.push_back(visit);
            sizes.push_back(model.batch_size(0, 1, 0));
            for (int sn = 0; sn < 2; ++sn) CHECK(model.batch_count(0, 1, 0, sn) == 0);
        }
    }
    CHECK(fired == std::vector<int>{1, 2, 4, 8});
    CHECK(sizes == std::vector<std::int64_t>{1, 1, 2, 4});
    CHECK(model.epoch(0, 1, 0) == 4);
    CHECK(model.total_updates() == 4);
    CHECK(model.total_visits(0, 1, 0) == 8);
    CHECK(model.batch_size(0, 0, 0) == 0);
}

TEST_CASE("row is rebuilt from the latest batch only") {
    EmpiricalModel model(3, 1, 1);
    model.record_transition(0, 0, 0, 0);
    CHECK(model.kernel_row(0, 0, 0)[0] == 1.0);
    model.record_transition(0, 0, 0, 2);
    CHECK(model.kernel_row(0, 0, 0)[2] == 1.0);
    model.record_transition(0, 0, 0, 1);
    CHECK(model.kernel_row(0, 0, 0)[2] == 1.0);
    model.record_transition(0, 0, 0, 1);
    CHECK(model.kernel_row(0, 0, 0)[0] == 0.0);
    CHECK(model.kernel_row(0, 0, 0)[1] == 1.0);
    CHECK_THROWS_AS(model.record_transition(1, 0, 0, 0), std::out_of_range);
    CHECK_THROWS_AS(model.record_transition(0, 0, 0, 3), std::out_of_range);
}

TEST_CASE("bonus worked example") {
    BonusParams params;
    params.log_inv_delta_prime = 1.0;
    params.horizon = 2;
    const std::vector<double> p{0.5, 0.5}, v{0.0, 1.0};
    const double expected = (460.0 / 9.0) * std::sqrt(0.25 / 100.0) + (544.0 / 9.0) * 2.0 / 100.0;
    CHECK(compute_bonus(p, v, 100, params) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(3.7644).epsilon(1e-4));
}

TEST_CASE("bonus with constant continuation has no variance term") {
    BonusParams params;
    params.log_inv_delta_prime = 3.0;
    params.horizon = 4;
    params.scale = 0.1;
    const std::vector<double> p{0.2, 0.3, 0.5}, v{2.0, 2.0, 2.0};
    CHECK(compute_bonus(p, v, 7, params) == doctest::Approx(0.1 * kDefaultBonusC2 * 4 * 3.0 / 7));
}

TEST_CASE("bonus scaling in n") {
    BonusParams params;
    params.horizon = 3;
    params.log_inv_delta_prime = 2.0;
    const std::vector<double> p{0.4, 0.6}, v{0.0, 2.5};
    BonusParams first = params, second = params;
    first.c2 = 0.0;
    second.c1 = 0.0;
    CHECK(compute_bonus(p, v, 16, first) == doctest::Approx(compute_bonus(p, v, 8, first) / std::sqrt(2.0)));
    CHECK(compute_bonus(p, v, 16, second) == doctest::Approx(compute_bonus(p, v, 8, second) / 2.0));
    CHECK_THROWS(compute_bonus(p, v, 0, params));
}

TEST_CASE("rounding examples") {
    const DualGrid grid(0.25, 1.0);
    CHECK(round_to_grid(0.3, grid) == 0.25);
    CHECK(round_to_grid(0.375, grid) == 0.25);
    CHECK(round_to_grid(1.7, grid) == 1.0);
    CHECK(round_to_grid(-0.2, grid) == 0.0);
    CHECK(grid.max_index() == 4);
}

TEST_CASE("grid cap is rounded up to a multiple of the step") {
    const DualGrid grid(0.3, 1.0);
    CHECK(grid.max_index() == 4);
    CHECK(grid.cap() == doctest::Approx(1.2));
}

TEST_CASE("dual_step examples") {
    DualState state{DualGrid(0.25, 1.0), 0.5, 0};
    CHECK(dual_step(state, 2.0, 1.0).lambda() == 0.5);
    state.index = 2;
    CHECK(dual_step(state, 1.0, 1.0).index == 2);
    state.index = 4;
    CHECK(dual_step(state, 3.0, 1.0).index == 4);
}

TEST_CASE("derive_config relaxed with eps = H") {
    const auto m = testing::random_instance(2, 2, 3, 0.5, 1);
    const auto cfg = derive_config(FeasibilityMode::Relaxed, 3.0, 0.1, m, std::nullopt);
    CHECK(cfg.iterations == 1);
    CHECK(cfg.dual_cap == 1.0);
    CHECK(cfg.grid_step == 1.0);
    CHECK(cfg.budget_shift == 1.5);
    CHECK(cfg.episodes == 2 * 2 * 27 / 9);
}

TEST_CASE("derive_config relaxed with eps = 0.5, H = 4") {
    const auto m = testing::random_instance(2, 2, 4, 0.5, 1);
    const auto cfg = derive_config(FeasibilityMode::Relaxed, 0.5, 0.1, m, std::nullopt);
    CHECK(cfg.iterations == 4096);
    CHECK(cfg.dual_cap == 8.0);
    CHECK(cfg.grid_step == doctest::Approx(0.125 / 64));
    CHECK(cfg.eta(4) == doctest::Approx(8.0 / (4.0 * 64.0)));
}

TEST_CASE("derive_config strict") {
    const auto m = testing::random_instance(2, 2, 3, 0.6, 2);
    const double zeta = slater_constant(m).zeta;
    const auto cfg = derive_config(FeasibilityMode::Strict, 1.0, 0.1, m, zeta);
    CHECK(cfg.budget_shift == doctest::Approx(zeta * 1.0 / 6.0));
    CHECK(cfg.dual_cap >= 9.0 / (zeta * 2.0) - 1e-12);
    CHECK(cfg.grid_step == doctest::Approx(zeta * zeta / 81.0));
    CHECK(cfg.shifted_budget(m.budget) == doctest::Approx(m.budget - zeta / 6.0));
    CHECK_THROWS(derive_config(FeasibilityMode::Strict, 1.0, 0.1, m, std::nullopt));
    CHECK_THROWS(derive_config(FeasibilityMode::Strict, 2.9, 0.1, m, zeta));
    CHECK_THROWS(derive_config(FeasibilityMode::Relaxed, 0.0, 0.1, m, std::nullopt));
}

TEST_CASE("empty model backup uses the default branch") {
    const auto m = testing::random_instance(2, 3, 3, 0.4, 3);
    const EmpiricalModel model(2, 3, 3);
    BonusParams params;
    params.horizon = 3;
    for (double lambda : {0.0, 1.0, 7.5}) {
        const auto b = lagrangian_greedy_backup(model, m.reward, m.cost, lambda, params);
        for (int s = 0; s < 2; ++s) {
            CHECK(b.reward_upper(0, s) == 3.0);
            CHECK(b.cost_lower(0, s) == 0.0);
            CHECK(b.policy.action(0, s) == 0);
        }
    }
}

TEST_CASE("zero bonus on a populated model reduces to exact DP") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto m = testing::random_instance(2, 2, 2, 0.3, 20 + seed);
        EmpiricalModel model(2, 2, 2);
        Rng rng = Rng::stream(seed, 1);
        for (int h = 0; h < 2; ++h)
            for (int s = 0; s < 2; ++s)
                for (int a = 0; a < 2; ++a)
                    for (int i = 0; i < 3; ++i)
                        model.record_transition(h, s, a, static_cast<int>(rng.categorical(m.transition.row(h, s, a))));
        BonusParams params;
        params.scale = 0.0;
        params.horizon = 2;
        for (double lambda : {0.0, 0.5, 2.0}) {
            const auto b = lagrangian_greedy_backup(model, m.reward, m.cost, lambda, params);
            const auto exact =
                solve_unconstrained(model.kernel_hat(), m.reward.minus_scaled(m.cost, lambda), Sense::Maximize);
            CHECK(b.policy == exact.policy);
            const auto vr = evaluate_policy(model.kernel_hat(), m.reward, b.policy);
            const auto vc = evaluate_policy(model.kernel_hat(), m.cost, b.policy);
            for (int s = 0; s < 2; ++s) {
                CHECK(b.reward_upper(0, s) == doctest::Approx(vr(0, s)).epsilon(1e-12));
                CHECK(b.cost_lower(0, s) == doctest::Approx(vc(0, s)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("primal_dual_episode with T = 1 and an empty model") {
    const auto m = testing::random_instance(2, 2, 2, 0.4, 4);
    auto cfg = derive_config(FeasibilityMode::Relaxed, 1.0, 0.1, m, std::nullopt);
    cfg.iterations = 1;
    const EmpiricalModel model(2, 2, 2);
    const auto plan = primal_dual_episode(model, m.reward, m.cost, 0, cfg, cfg.shifted_budget(m.budget));
    CHECK(plan.mixture.size() == 1);
    CHECK(plan.lambda_trace == std::vector<double>{0.0});

    cfg.iterations = 25;
    const auto many = primal_dual_episode(model, m.reward, m.cost, 0, cfg, cfg.shifted_budget(m.budget));
    CHECK(many.mixture.size() == 1);
    for (double l : many.lambda_trace) CHECK(l == 0.0);
    for (double c : many.cost_trace) CHECK(c == 0.0);
}

TEST_CASE("dual-regret inequality on a fully observed instance") {
    const auto m = testing::random_instance(2, 2, 2, 0.3, 9);
    EmpiricalModel model(2, 2, 2);
    Rng rng = Rng::stream(9, 0);
    for (int h = 0; h < 2; ++h)
        for (int s = 0; s < 2; ++s)
            for (int a = 0; a < 2; ++a)
                for (int i = 0; i < 8; ++i)
                    model.record_transition(h, s, a, static_cast<int>(rng.categorical(m.transition.row(h, s, a))));
    auto cfg = derive_config(FeasibilityMode::Relaxed, 0.5, 0.1, m, std::nullopt);
    cfg.iterations = 200;
    cfg.bonus_scale = 0.0;
    const double b_prime = m.budget - 0.2; // force the constraint to bind
    const auto plan = primal_dual_episode(model, m.reward, m.cost, 0, cfg, b_prime);
    const double U = cfg.grid().cap();
    const double T = 200.0;
    const double bound = 2.0 * cfg.grid_step * 2 * std::sqrt(T) + U * 2 / std::sqrt(T);
    for (double lambda : {0.0, U}) {
        double sum = 0.0;
        for (std::size_t t = 0; t < plan.lambda_trace.size(); ++t)
            sum += (plan.lambda_trace[t] - lambda) * (b_prime - plan.cost_trace[t]);
        CHECK(sum / T <= bound);
    }
}

TEST_CASE("run_learner with K = 1, T = 1") {
    const auto m = testing::random_instance(2, 2, 2, 0.4, 5);
    auto cfg = derive_config(FeasibilityMode::Relaxed, 1.0, 0.1, m, std::nullopt);
    cfg.episodes = 1;
    cfg.iterations = 1;
    EpisodePlan seen;
    const auto result = run_learner(m, cfg, 3, [&](const EpisodeObservation& o) { seen = o.plan; });
    REQUIRE(result.final_policy.size() == 1);
    CHECK(*result.final_policy.components()[0].policy == *seen.mixture.components()[0].policy);
    CHECK(result.final_policy.weights()[0] == 1.0);
}

TEST_CASE("run_learner is deterministic in the seed") {
    const auto m = testing::random_instance(3, 2, 3, 0.4, 6);
    auto cfg = derive_config(FeasibilityMode::Relaxed, 1.5, 0.1, m, std::nullopt);
    cfg.episodes = 100;
    cfg.iterations = 10;
    cfg.bonus_scale = 0.1;
    const auto a = run_learner(m, cfg, 42);
    const auto b = run_learner(m, cfg, 42);
    CHECK(a.model.kernel_hat() == b.model.kernel_hat());
    REQUIRE(a.final_policy.size() == b.final_policy.size());
    for (std::size_t i = 0; i < a.final_policy.size(); ++i) {
        CHECK(a.final_policy.weights()[i] == b.final_policy.weights()[i]);
        CHECK(*a.final_policy.components()[i].policy == *b.final_policy.components()[i].policy);
    }
    const auto c = run_learner(m, cfg, 43);
    CHECK_FALSE(a.model.kernel_hat() == c.model.kernel_hat());
}

TEST_CASE("final mixture weights sum to one") {
    const auto m = testing::random_instance(2, 2, 2, 0.3, 7);
    auto cfg = derive_config(FeasibilityMode::Relaxed, 1.0, 0.1, m, std::nullopt);
    cfg.episodes = 50;
    cfg.iterations = 7;
    cfg.bonus_scale = 0.05;
    const auto result = run_learner(m, cfg, 1);
    double total = 0.0;
    for (double w : result.final_policy.weights()) total += w;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("config validation") {
    LearnerConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.episodes = 0;
    CHECK_THROWS(cfg.validate());
    cfg = LearnerConfig{};
    cfg.episodes = cfg.max_episodes + 1;
    CHECK_THROWS(cfg.validate());
    cfg = LearnerConfig{};
    cfg.grid_step = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg = LearnerConfig{};
    cfg.delta = 1.5;
    CHECK_THROWS(cfg.validate());
    CHECK(parse_mode("strict") == FeasibilityMode::Strict);
    CHECK_THROWS(parse_mode("loose"));
}

TEST_CASE("delta prime") {
    LearnerConfig cfg;
    cfg.episodes = 10;
    cfg.delta = 0.1;
    CHECK(cfg.delta_prime(2, 3, 4) == doctest::Approx(0.1 / (200.0 * 2 * 3 * 16 * 100)));
}
