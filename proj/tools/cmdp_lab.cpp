// cmdp_lab: generate instances, solve them exactly, train the primal-dual
// learner and produce reports.

#include "cmdp/acceptance.hpp"
#include "cmdp/exact_solver.hpp"
#include "cmdp/harness.hpp"
#include "cmdp/instance_gen.hpp"
#include "cmdp/instance_io.hpp"
#include "cmdp/learner.hpp"
#include "cmdp/report.hpp"
#include "cmdp/simulator.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::string out;
};

struct InstanceSource {
    std::string path;
    std::string preset;

    void add_to(CLI::App* cmd) {
        auto* file = cmd->add_option("-i,--instance", path, "instance JSON file");
        auto* name = cmd->add_option("-p,--preset", preset, "named preset instead of a file");
        file->excludes(name);
    }

    cmdp::TabularCmdp load() const {
        if (!preset.empty()) return cmdp::preset(preset);
        if (path.empty()) throw CLI::ValidationError("--instance", "one of --instance or --preset is required");
        return cmdp::load_instance(path);
    }
};

/// Print to stdout, and also to `file` when one is given.
void emit_json(const json& j, const std::string& file) {
    std::cout << j.dump(2) << "\n";
    if (!file.empty()) cmdp::write_text_file(file, j.dump(2) + "\n");
}

// --- generate -------------------------------------------------------------

struct GenerateArgs {
    cmdp::GenSpec spec;
    std::string preset;
};

int run_generate(const Globals& g, GenerateArgs args) {
    cmdp::TabularCmdp m;
    if (!args.preset.empty()) {
        m = cmdp::preset(args.preset);
    } else {
        args.spec.seed = g.seed;
        m = cmdp::generate(args.spec);
    }
    const auto zeta = cmdp::slater_constant(m).zeta;
    if (g.out.empty()) {
        std::cout << cmdp::to_json(m).dump(1) << "\n";
    } else {
        cmdp::save_instance(m, g.out);
        std::cerr << "wrote " << g.out << " (S=" << m.num_states() << " A=" << m.num_actions()
                  << " H=" << m.horizon() << " b=" << m.budget << " zeta=" << zeta
                  << " hash=" << cmdp::instance_hash(m) << ")\n";
    }
    return 0;
}

// --- solve ----------------------------------------------------------------

struct SolveArgs {
    InstanceSource source;
    double tol = cmdp::kDefaultSolverTolerance;
    bool brute = false;
    std::string policy_out;
};

int run_solve(const Globals& g, const SolveArgs& args) {
    const auto m = args.source.load();
    const auto sol = args.brute ? cmdp::brute_force_cmdp(m) : cmdp::solve_cmdp_exact(m, args.tol);
    json j = {{"optimal_value", sol.optimal_value},
              {"optimal_cost", sol.optimal_cost},
              {"lambda_star", sol.lambda_star},
              {"zeta", sol.zeta},
              {"status", cmdp::to_string(sol.status)},
              {"components", sol.policy.size()}};
    emit_json(j, g.out);
    if (!args.policy_out.empty()) cmdp::save_policy(sol.policy, args.policy_out);
    return sol.status == cmdp::SolveStatus::Optimal ? 0 : 1;
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
    InstanceSource source;
    std::string mode = "relaxed";
    double epsilon = 0.0;
    double delta = 0.1;
    std::optional<std::int64_t> episodes;
    std::optional<std::int64_t> iterations;
    std::optional<double> dual_cap;
    std::optional<double> grid_step;
    std::optional<double> eta;
    std::optional<double> budget_shift;
    std::optional<double> zeta;
    double c1 = cmdp::kDefaultBonusC1;
    double c2 = cmdp::kDefaultBonusC2;
    double bonus_scale = 1.0;
    bool warm_start = false;
    cmdp::ConfigMultipliers multipliers;
    std::int64_t eval_every = 1;
    bool timing = false;
    bool no_plots = false;
    std::string out_csv;
    std::string out_policy;
};

cmdp::LearnerConfig build_config(const TrainArgs& a, const cmdp::TabularCmdp& m) {
    const auto mode = cmdp::parse_mode(a.mode);
    std::optional<double> zeta = a.zeta;
    if (!zeta && mode == cmdp::FeasibilityMode::Strict) zeta = cmdp::slater_constant(m).zeta;
    auto cfg = cmdp::derive_config(mode, a.epsilon, a.delta, m, zeta, a.multipliers);
    if (a.episodes) cfg.episodes = *a.episodes;
    if (a.iterations) cfg.iterations = *a.iterations;
    if (a.dual_cap) cfg.dual_cap = *a.dual_cap;
    if (a.grid_step) cfg.grid_step = *a.grid_step;
    if (a.eta) cfg.eta_override = *a.eta;
    if (a.budget_shift) cfg.budget_shift = *a.budget_shift;
    cfg.c1 = a.c1;
    cfg.c2 = a.c2;
    cfg.bonus_scale = a.bonus_scale;
    cfg.warm_start = a.warm_start;
    cfg.validate();
    return cfg;
}

int run_train(const Globals& g, const TrainArgs& args) {
    const auto m = args.source.load();
    const auto cfg = build_config(args, m);
    cmdp::ExperimentOptions options;
    options.eval_every = args.eval_every;
    options.record_timing = args.timing;
    options.epsilon = args.epsilon;
    auto run = cmdp::run_experiment(m, cfg, g.seed, options);
    run.record.header.config["epsilon"] = args.epsilon;

    const fs::path dir = g.out.empty() ? fs::path("runs") / ("seed" + std::to_string(g.seed)) : fs::path(g.out);
    const auto verdict = cmdp::to_json(run.verdict);
    const auto files = cmdp::emit_report(run.record, dir, verdict, !args.no_plots);
    cmdp::save_policy(run.learner.final_policy, dir / "policy.json");
    if (!args.out_policy.empty()) cmdp::save_policy(run.learner.final_policy, args.out_policy);
    if (!args.out_csv.empty()) cmdp::write_text_file(args.out_csv, cmdp::run_csv(run.record));

    std::cout << "K=" << cfg.episodes << " T=" << cfg.iterations << " U=" << cfg.grid().cap()
              << " eps1=" << cfg.grid_step << " b'=" << run.learner.budget_prime << "\n"
              << "regret " << run.record.regret_total() << "  cv " << run.record.cv_total() << "\n"
              << "final V_r " << run.verdict.reward_value << " (V* " << run.verdict.optimal_value << ")  V_c "
              << run.verdict.cost_value << " (b " << run.verdict.budget << ")  "
              << cmdp::to_string(run.verdict.mode) << " verdict " << (run.verdict.passed() ? "PASS" : "FAIL")
              << "\n"
              << "wrote " << files.csv.string() << "\n";
    return run.verdict.passed() ? 0 : 1;
}

// --- evaluate -------------------------------------------------------------

struct EvaluateArgs {
    InstanceSource source;
    std::string policy;
    std::size_t episodes = 0;
    std::optional<double> epsilon;
    std::string mode = "relaxed";
};

int run_evaluate(const Globals& g, const EvaluateArgs& args) {
    const auto m = args.source.load();
    const auto mix = cmdp::load_policy(args.policy);
    json j = {{"reward", cmdp::evaluate_mixture(m, m.reward, mix)},
              {"cost", cmdp::evaluate_mixture(m, m.cost, mix)},
              {"budget", m.budget}};
    if (args.episodes > 0) {
        const auto mc = cmdp::monte_carlo_evaluate(m, mix, args.episodes, g.seed);
        j["monte_carlo"] = {{"episodes", mc.episodes},
                            {"reward", mc.mean_reward},
                            {"reward_stderr", mc.stderr_reward},
                            {"cost", mc.mean_cost},
                            {"cost_stderr", mc.stderr_cost}};
    }
    int status = 0;
    if (args.epsilon) {
        const auto exact = cmdp::solve_cmdp_exact(m);
        const auto v = cmdp::check_final_policy(m, exact, mix, *args.epsilon, cmdp::parse_mode(args.mode));
        j["verdict"] = cmdp::to_json(v);
        status = v.passed() ? 0 : 1;
    }
    emit_json(j, g.out);
    return status;
}

// --- report ---------------------------------------------------------------

int run_report(const Globals& g, const std::string& csv_path, bool plots) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + csv_path);
    std::ostringstream text;
    text << in.rdbuf();
    cmdp::RunRecord record;
    record.rows = cmdp::parse_run_csv(text.str());

    const fs::path dir = g.out.empty() ? fs::path(csv_path).parent_path() : fs::path(g.out);
    if (plots)
        for (const auto& p : cmdp::emit_plots(record.rows, dir)) std::cout << "wrote " << p.string() << "\n";

    std::int64_t interpolated = 0;
    for (const auto& row : record.rows) interpolated += row.interpolated ? 1 : 0;
    json j = {{"episodes", record.rows.size()},
              {"regret_total", record.regret_total()},
              {"cv_total", record.cv_total()},
              {"interpolated_rows", interpolated}};
    if (!record.rows.empty()) {
        j["final_v_r"] = record.rows.back().v_r_true;
        j["final_v_c"] = record.rows.back().v_c_true;
        j["model_updates"] = record.rows.back().model_updates_cum;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

// --- suite ----------------------------------------------------------------

int run_suite(const Globals& g, const std::vector<int>& only) {
    const auto results = cmdp::run_acceptance(only, &std::cout);
    json j = json::array();
    int failed = 0;
    for (const auto& r : results) {
        failed += r.passed ? 0 : 1;
        j.push_back({{"id", r.id},
                     {"name", r.name},
                     {"passed", r.passed},
                     {"seconds", r.seconds},
                     {"detail", r.detail}});
    }
    std::cout << (results.size() - failed) << "/" << results.size() << " criteria passed\n";
    if (!g.out.empty()) cmdp::write_text_file(g.out, j.dump(2) + "\n");
    return failed == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular constrained-MDP lab: exact solver, primal-dual learner, experiments"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file; keys match long flag names, [train] etc. per subcommand");

    Globals globals;
    app.add_option("--seed", globals.seed, "random seed")->capture_default_str();
    app.add_option("--out", globals.out, "output file or directory");

    int status = 0;

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "random or preset instance");
    generate->add_option("-S,--states", gen.spec.num_states)->capture_default_str();
    generate->add_option("-A,--actions", gen.spec.num_actions)->capture_default_str();
    generate->add_option("-H,--horizon", gen.spec.horizon)->capture_default_str();
    generate->add_option("--zeta", gen.spec.zeta_target, "Slater constant of the result")->capture_default_str();
    generate->add_option("--alpha", gen.spec.dirichlet_alpha, "Dirichlet concentration")->capture_default_str();
    generate->add_option("--preset", gen.preset, "one of: " + [] {
        std::string s;
        for (const auto& n : cmdp::preset_names()) s += (s.empty() ? "" : ", ") + n;
        return s;
    }());
    generate->callback([&] { status = run_generate(globals, gen); });

    SolveArgs solve_args;
    auto* solve = app.add_subcommand("solve", "exact CMDP optimum");
    solve_args.source.add_to(solve);
    solve->add_option("--tol", solve_args.tol, "bisection width")->capture_default_str();
    solve->add_flag("--brute-force", solve_args.brute, "enumerate deterministic policies instead");
    solve->add_option("--policy-out", solve_args.policy_out, "write the optimal mixture here");
    solve->callback([&] { status = run_solve(globals, solve_args); });

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "run the primal-dual learner and score it");
    train_args.source.add_to(train);
    train->add_option("--mode", train_args.mode, "relaxed or strict")
        ->check(CLI::IsMember({"relaxed", "strict"}))
        ->capture_default_str();
    train->add_option("--epsilon", train_args.epsilon, "target accuracy")->required();
    train->add_option("--delta", train_args.delta)->capture_default_str();
    train->add_option("-K,--K,--episodes", train_args.episodes, "override K");
    train->add_option("-T,--T,--iterations", train_args.iterations, "override T");
    train->add_option("-U,--U,--dual-cap", train_args.dual_cap, "override U");
    train->add_option("--eps1,--grid-step", train_args.grid_step, "override eps1");
    train->add_option("--eta", train_args.eta, "override the dual step size");
    train->add_option("--budget-shift", train_args.budget_shift, "override tau or Delta");
    train->add_option("--zeta", train_args.zeta, "Slater constant (computed if omitted)");
    train->add_option("--c1", train_args.c1)->capture_default_str();
    train->add_option("--c2", train_args.c2)->capture_default_str();
    train->add_option("--bonus-scale", train_args.bonus_scale)->capture_default_str();
    train->add_flag("--warm-start", train_args.warm_start, "carry lambda across episodes");
    train->add_option("--mult-episodes", train_args.multipliers.episodes)->capture_default_str();
    train->add_option("--mult-iterations", train_args.multipliers.iterations)->capture_default_str();
    train->add_option("--mult-dual-cap", train_args.multipliers.dual_cap)->capture_default_str();
    train->add_option("--mult-grid-step", train_args.multipliers.grid_step)->capture_default_str();
    train->add_option("--eval-every", train_args.eval_every, "exact evaluation stride")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train->add_flag("--timing", train_args.timing, "record wall_ms (breaks byte-reproducibility)");
    train->add_flag("--no-plots", train_args.no_plots);
    train->add_option("--out-csv", train_args.out_csv, "also copy run.csv here");
    train->add_option("--out-policy", train_args.out_policy, "also write the final policy here");
    train->callback([&] { status = run_train(globals, train_args); });

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "exact and Monte-Carlo value of a saved policy");
    eval_args.source.add_to(evaluate);
    evaluate->add_option("--policy", eval_args.policy, "policy JSON")->required();
    evaluate->add_option("--episodes", eval_args.episodes, "Monte-Carlo episodes (0 = skip)")->capture_default_str();
    evaluate->add_option("--epsilon", eval_args.epsilon, "also check the final-policy verdict");
    evaluate->add_option("--mode", eval_args.mode)->check(CLI::IsMember({"relaxed", "strict"}))->capture_default_str();
    evaluate->callback([&] { status = run_evaluate(globals, eval_args); });

    std::string csv_path;
    bool report_plots = true;
    auto* report = app.add_subcommand("report", "plots and totals from a run.csv");
    report->add_option("run_csv", csv_path)->required()->check(CLI::ExistingFile);
    report->add_flag("!--no-plots", report_plots);
    report->callback([&] { status = run_report(globals, csv_path, report_plots); });

    std::vector<int> only;
    auto* suite = app.add_subcommand("suite", "acceptance battery");
    suite->add_option("--only", only, "criterion ids")->check(CLI::Range(1, 10));
    suite->callback([&] { status = run_suite(globals, only); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return status;
}
