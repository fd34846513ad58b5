#include "doctest.h"
#include "support.hpp"

#include "cmdp/exact_solver.hpp"
#include "cmdp/harness.hpp"
#include "cmdp/instance_io.hpp"
#include "cmdp/report.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cmdp;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("cmdp_tests_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("optimal mixture every episode has no regret or violation") {
    const auto m = preset("risky_shortcut");
    const auto exact = solve_cmdp_exact(m);
    const std::vector<MixturePolicy> episodes(5, exact.policy);
    const auto record = compute_metrics(m, exact, episodes);
    REQUIRE(record.rows.size() == 5);
    CHECK(record.regret_total() == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(record.cv_total() == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
}

TEST_CASE("min-cost policy every episode") {
    const auto m = preset("two_state_chain");
    const auto exact = solve_cmdp_exact(m);
    const auto slater = slater_constant(m);
    const double vr = evaluate_policy(m.transition, m.reward, slater.min_cost_policy)(0, m.initial_state);
    const std::vector<MixturePolicy> episodes(4, MixturePolicy::single(slater.min_cost_policy));
    const auto record = compute_metrics(m, exact, episodes);
    CHECK(record.cv_total() == 0.0);
    CHECK(record.regret_total() == doctest::Approx(4 * (exact.optimal_value - vr)));
}

TEST_CASE("single episode over budget") {
    const auto m = testing::single_state(1, 0, 1, 0, 0.8);
    const auto exact = solve_cmdp_exact(m);
    const auto record = compute_metrics(m, exact, std::vector<MixturePolicy>{
                                                      MixturePolicy::single(Policy::deterministic(1, 2, 1, {0}))});
    CHECK(record.cv_total() == doctest::Approx(0.2));
}

TEST_CASE("cv_cum is the positive part of the running sum") {
    const auto m = testing::single_state(1, 0, 1, 0, 0.5);
    const auto exact = solve_cmdp_exact(m);
    const auto hi = MixturePolicy::single(Policy::deterministic(1, 2, 1, {0}));
    const auto lo = MixturePolicy::single(Policy::deterministic(1, 2, 1, {1}));
    const auto record = compute_metrics(m, exact, std::vector<MixturePolicy>{lo, lo, hi, hi, hi});
    double sum = 0.0;
    for (const auto& row : record.rows) {
        sum += row.v_c_true - m.budget;
        CHECK(row.cv_cum == doctest::Approx(std::max(sum, 0.0)));
    }
    CHECK(record.rows[2].cv_cum == 0.0);
    CHECK(record.rows[4].cv_cum == doctest::Approx(0.5));
}

TEST_CASE("sparse evaluation interpolates and flags rows") {
    const auto m = testing::single_state(1, 0, 1, 0, 0.5);
    const auto exact = solve_cmdp_exact(m);
    const auto hi = MixturePolicy::single(Policy::deterministic(1, 2, 1, {0}));
    const auto lo = MixturePolicy::single(Policy::deterministic(1, 2, 1, {1}));
    MetricsAccumulator acc(m, exact, 3);
    for (int k = 0; k < 4; ++k) acc.add_episode(k < 3 ? lo : hi, 0.0, 0);
    const auto record = std::move(acc).finish(RunHeader{});
    REQUIRE(record.rows.size() == 4);
    CHECK_FALSE(record.rows[0].interpolated);
    CHECK(record.rows[1].interpolated);
    CHECK(record.rows[2].interpolated);
    CHECK_FALSE(record.rows[3].interpolated);
    CHECK(record.rows[1].v_r_true == doctest::Approx(1.0 / 3.0));
    CHECK(record.rows[3].v_r_true == 1.0);
    CHECK(run_csv(record).find("interpolated") != std::string::npos);
}

TEST_CASE("verdicts") {
    const auto m = preset("two_state_chain");
    const auto exact = solve_cmdp_exact(m);
    CHECK(check_final_policy(m, exact, exact.policy, 0.0, FeasibilityMode::Relaxed).passed());
    CHECK(check_final_policy(m, exact, exact.policy, 0.0, FeasibilityMode::Strict).passed());

    const auto slater = slater_constant(m);
    const auto safe = MixturePolicy::single(slater.min_cost_policy);
    const double gap = exact.optimal_value - evaluate_mixture(m, m.reward, safe);
    CHECK(check_final_policy(m, exact, safe, gap, FeasibilityMode::Relaxed).passed());
    CHECK_FALSE(check_final_policy(m, exact, safe, gap - 0.01, FeasibilityMode::Relaxed).passed());

    // always action 1 costs 2.5 = b + 1.3
    const auto greedy = MixturePolicy::single(Policy::deterministic(2, 2, 3, {1, 1, 1, 1, 1, 1}));
    CHECK(check_final_policy(m, exact, greedy, 1.3 + 1e-6, FeasibilityMode::Relaxed).passed());
    CHECK_FALSE(check_final_policy(m, exact, greedy, 1.29, FeasibilityMode::Relaxed).passed());
    CHECK_FALSE(check_final_policy(m, exact, greedy, 3.0, FeasibilityMode::Strict).passed());
}

TEST_CASE("report files") {
    const auto m = preset("risky_shortcut");
    auto cfg = derive_config(FeasibilityMode::Relaxed, 1.5, 0.1, m, std::nullopt);
    cfg.episodes = 3;
    cfg.iterations = 4;
    cfg.bonus_scale = 0.1;
    ExperimentOptions options;
    options.epsilon = 1.5;
    const auto run = run_experiment(m, cfg, 5, options);
    const auto dir = scratch("report");
    const auto files = emit_report(run.record, dir, to_json(run.verdict));

    const auto csv = slurp(files.csv);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.rfind("k,v_r_true,v_c_true,regret_cum,cv_cum,lambda_mean,model_updates_cum,wall_ms\n", 0) == 0);
    CHECK(files.plots.size() == 2);
    for (const auto& p : files.plots) CHECK(std::filesystem::exists(p));

    emit_report(run.record, dir, to_json(run.verdict));
    CHECK(slurp(files.csv) == csv);

    const auto summary = nlohmann::json::parse(slurp(files.summary));
    CHECK(summary["regret_total"].get<double>() == run.record.rows.back().regret_cum);
    CHECK(summary["cv_total"].get<double>() == run.record.rows.back().cv_cum);
    std::filesystem::remove_all(dir);
}

TEST_CASE("CSV round trip is exact") {
    const auto m = testing::random_instance(3, 2, 3, 0.3, 12);
    auto cfg = derive_config(FeasibilityMode::Relaxed, 1.5, 0.1, m, std::nullopt);
    cfg.episodes = 40;
    cfg.iterations = 6;
    cfg.bonus_scale = 0.1;
    ExperimentOptions options;
    options.epsilon = 1.5;
    options.record_timing = true;
    const auto run = run_experiment(m, cfg, 8, options);
    CHECK(parse_run_csv(run_csv(run.record)) == run.record.rows);

    options.eval_every = 7;
    options.record_timing = false;
    const auto sparse = run_experiment(m, cfg, 8, options);
    CHECK(parse_run_csv(run_csv(sparse.record)) == sparse.record.rows);
    CHECK_THROWS(parse_run_csv("k,v_r_true\n1,2\n"));
}

TEST_CASE("wall clock column stays zero without timing") {
    const auto m = preset("two_state_chain");
    auto cfg = derive_config(FeasibilityMode::Relaxed, 1.5, 0.1, m, std::nullopt);
    cfg.episodes = 10;
    cfg.iterations = 3;
    ExperimentOptions options;
    options.epsilon = 1.5;
    for (const auto& row : run_experiment(m, cfg, 1, options).record.rows) CHECK(row.wall_ms == 0.0);
}

TEST_CASE("policy JSON round trip") {
    const auto m = preset("risky_shortcut");
    const auto exact = solve_cmdp_exact(m);
    const auto back = mixture_from_json(to_json(exact.policy));
    REQUIRE(back.size() == exact.policy.size());
    CHECK(evaluate_mixture(m, m.reward, back) == evaluate_mixture(m, m.reward, exact.policy));
}

TEST_CASE("infeasible instance aborts the experiment") {
    const auto m = testing::constant_instance(1, 2, 1, 0.5, 1.0, 0.5);
    LearnerConfig cfg;
    CHECK_THROWS(run_experiment(m, cfg, 1, ExperimentOptions{}));
}
