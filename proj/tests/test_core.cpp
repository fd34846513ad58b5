#include "doctest.h"
#include "support.hpp"

#include "cmdp/exact_solver.hpp"
#include "cmdp/simulator.hpp"

#include <cmath>
#include <memory>

using namespace cmdp;

TEST_CASE("validate_cmdp accepts a well-formed instance") {
    const auto m = testing::random_instance(2, 2, 3, 0.4, 1);
    CHECK(validate_cmdp(m).empty());
}

TEST_CASE("validate_cmdp names the row that does not sum to one") {
    auto m = testing::constant_instance(2, 2, 2, 0.5, 0.5, 1.0);
    m.transition.row(1, 0, 1)[0] = 0.4;
    m.transition.row(1, 0, 1)[1] = 0.5;
    const auto v = validate_cmdp(m);
    REQUIRE(v.size() == 1);
    CHECK(v[0].h == 1);
    CHECK(v[0].s == 0);
    CHECK(v[0].a == 1);
    CHECK(v[0].magnitude == doctest::Approx(-0.1));
}

TEST_CASE("validate_cmdp rejects a zero budget") {
    auto m = testing::constant_instance(2, 2, 2, 0.5, 0.5, 0.0);
    const auto v = validate_cmdp(m);
    REQUIRE(v.size() == 1);
    CHECK(v[0].message == "budget out of (0,H]");
}

TEST_CASE("validate_cmdp flags out-of-range stage values and s1") {
    auto m = testing::constant_instance(2, 2, 2, 0.5, 0.5, 1.0);
    m.reward(0, 1, 1) = 1.5;
    m.cost(1, 0, 0) = -0.1;
    m.initial_state = 2;
    CHECK(validate_cmdp(m).size() == 3);
}

TEST_CASE("evaluate_policy with H = 1 is the expected stage value") {
    const auto m = testing::random_instance(3, 2, 1, 0.2, 4);
    const auto pi = Policy::uniform(3, 2, 1);
    const auto v = evaluate_policy(m.transition, m.reward, pi);
    for (int s = 0; s < 3; ++s)
        CHECK(v(0, s) == doctest::Approx(0.5 * m.reward(0, s, 0) + 0.5 * m.reward(0, s, 1)));
    CHECK(v(1, 0) == 0.0);
}

TEST_CASE("evaluate_policy sums unit rewards on a deterministic chain") {
    TabularCmdp m;
    m.transition = Kernel(2, 1, 2, {0, 1, 1, 0, 0, 1, 1, 0});
    m.reward = StageTable(2, 1, 2, 1.0);
    m.cost = StageTable(2, 1, 2, 0.0);
    m.budget = 1.0;
    const auto pi = Policy::deterministic(2, 1, 2, {0, 0, 0, 0});
    CHECK(evaluate_policy(m.transition, m.reward, pi)(0, 0) == 2.0);
}

TEST_CASE("evaluate_policy rejects mismatched shapes") {
    const auto m = testing::random_instance(2, 2, 2, 0.3, 5);
    CHECK_THROWS_AS(evaluate_policy(m.transition, m.reward, Policy::uniform(3, 2, 2)), DimensionMismatch);
    CHECK_THROWS_AS(evaluate_policy(m.transition, StageTable(2, 2, 3), Policy::uniform(2, 2, 2)), DimensionMismatch);
}

TEST_CASE("evaluate_policy agrees with Monte Carlo") {
    const auto m = testing::random_instance(2, 2, 2, 0.3, 6);
    const Policy pi(2, 2, 2, {0.3, 0.7, 0.9, 0.1, 0.5, 0.5, 0.2, 0.8});
    const double exact = evaluate_policy(m.transition, m.reward, pi)(0, m.initial_state);
    const auto mc = monte_carlo_evaluate(m, MixturePolicy::single(pi), 1'000'000, 77);
    CHECK(std::abs(mc.mean_reward - exact) <= 4.0 * mc.stderr_reward);
}

TEST_CASE("value entries stay within [0, H - h]") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto m = testing::random_instance(3, 3, 4, 0.5, seed);
        const auto v = evaluate_policy(m.transition, m.cost, Policy::uniform(3, 3, 4));
        for (int h = 0; h <= 4; ++h)
            for (int s = 0; s < 3; ++s) {
                CHECK(v(h, s) >= 0.0);
                CHECK(v(h, s) <= 4 - h + 1e-12);
            }
    }
}

TEST_CASE("evaluate_mixture is the weighted mean of component values") {
    const auto m = testing::random_instance(3, 2, 3, 0.4, 8);
    const auto a = std::make_shared<const Policy>(enumerate_deterministic(3, 2, 3, 5));
    const auto b = std::make_shared<const Policy>(enumerate_deterministic(3, 2, 3, 300));
    const double va = evaluate_policy(m.transition, m.reward, *a)(0, m.initial_state);
    const double vb = evaluate_policy(m.transition, m.reward, *b)(0, m.initial_state);

    CHECK(evaluate_mixture(m, m.reward, MixturePolicy::single(a)) == va);
    CHECK(evaluate_mixture(m, m.reward, MixturePolicy({{0.3, a}, {0.7, a}})) == doctest::Approx(va).epsilon(1e-15));
    CHECK(evaluate_mixture(m, m.reward, MixturePolicy({{0.25, a}, {0.75, b}})) ==
          doctest::Approx(0.25 * va + 0.75 * vb).epsilon(1e-15));
}

TEST_CASE("mixture of a value-2 and a value-0 policy averages to 1") {
    TabularCmdp m;
    m.transition = Kernel(1, 2, 2, {1, 1, 1, 1});
    m.reward = StageTable(1, 2, 2, {1, 0, 1, 0});
    m.cost = StageTable(1, 2, 2, 0.0);
    m.budget = 1.0;
    const auto hi = std::make_shared<const Policy>(Policy::deterministic(1, 2, 2, {0, 0}));
    const auto lo = std::make_shared<const Policy>(Policy::deterministic(1, 2, 2, {1, 1}));
    CHECK(evaluate_mixture(m, m.reward, MixturePolicy({{0.5, hi}, {0.5, lo}})) == 1.0);
}

TEST_CASE("MixturePolicy rejects bad weights") {
    const auto p = std::make_shared<const Policy>(Policy::uniform(1, 2, 1));
    CHECK_THROWS(MixturePolicy({{0.5, p}, {0.6, p}}));
    CHECK_THROWS(MixturePolicy({{-0.1, p}, {1.1, p}}));
    CHECK_THROWS(MixturePolicy({{1.0, nullptr}}));
}

TEST_CASE("Policy rejects rows off the simplex") {
    CHECK_THROWS(Policy(1, 2, 1, {0.6, 0.6}));
    CHECK_THROWS(Policy(1, 2, 1, {1.0}));
}

TEST_CASE("slater_constant examples") {
    SUBCASE("zero cost") {
        const auto m = testing::constant_instance(2, 2, 3, 0.5, 0.0, 1.3);
        CHECK(slater_constant(m).zeta == 1.3);
    }
    SUBCASE("single state picks the cheap action") {
        const auto s = slater_constant(testing::single_state(1, 0, 1, 0, 0.5));
        CHECK(s.zeta == 0.5);
        CHECK(s.min_cost_policy.action(0, 0) == 1);
    }
    SUBCASE("unit cost everywhere") {
        const auto m = testing::constant_instance(2, 2, 2, 0.5, 1.0, 0.5);
        CHECK(slater_constant(m).zeta == doctest::Approx(-1.5));
    }
}

TEST_CASE("slater_constant is invariant under action relabeling") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto m = testing::random_instance(3, 3, 3, 0.3, 100 + seed);
        const int perm[3] = {2, 0, 1};
        TabularCmdp p = m;
        for (int h = 0; h < 3; ++h)
            for (int s = 0; s < 3; ++s)
                for (int a = 0; a < 3; ++a) {
                    p.reward(h, s, perm[a]) = m.reward(h, s, a);
                    p.cost(h, s, perm[a]) = m.cost(h, s, a);
                    for (int sn = 0; sn < 3; ++sn) p.transition.row(h, s, perm[a])[sn] = m.transition.row(h, s, a)[sn];
                }
        CHECK(slater_constant(p).zeta == doctest::Approx(slater_constant(m).zeta).epsilon(1e-12));
    }
}
