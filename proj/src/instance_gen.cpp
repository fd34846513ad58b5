#include "cmdp/instance_gen.hpp"

#include "cmdp/exact_solver.hpp"
#include "cmdp/rng.hpp"

#include <sstream>

namespace cmdp {

namespace {

TabularCmdp draw_instance(const GenSpec& spec, Rng& rng) {
    const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
    TabularCmdp m;
    m.transition = Kernel(S, A, H);
    m.reward = StageTable(S, A, H);
    m.cost = StageTable(S, A, H);
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                auto row = m.transition.row(h, s, a);
                double sum = 0.0;
                for (double& p : row) {
                    p = rng.gamma(spec.dirichlet_alpha);
                    sum += p;
                }
                if (sum > 0.0) {
                    for (double& p : row) p /= sum;
                } else {
                    // all gamma draws underflowed (tiny alpha): fall back to a point mass
                    row[rng.below(S)] = 1.0;
                }
                m.reward(h, s, a) = rng.uniform();
                m.cost(h, s, a) = rng.uniform();
            }
    m.transition.normalize_rows();
    m.initial_state = 0;
    return m;
}

TabularCmdp single_state_tradeoff() {
    TabularCmdp m;
    m.transition = Kernel(1, 2, 1, {1.0, 1.0});
    m.reward = StageTable(1, 2, 1, std::vector<double>{1.0, 0.0});
    m.cost = StageTable(1, 2, 1, std::vector<double>{1.0, 0.0});
    m.budget = 0.5;
    return m;
}

TabularCmdp two_state_chain() {
    constexpr int S = 2, A = 2, H = 3;
    TabularCmdp m;
    m.transition = Kernel(S, A, H);
    m.reward = StageTable(S, A, H);
    m.cost = StageTable(S, A, H);
    const double r[S][A] = {{0.1, 0.5}, {0.3, 1.0}};
    const double c[S][A] = {{0.0, 0.5}, {0.2, 1.0}};
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                m.transition.row(h, s, a)[a] = 1.0;
                m.reward(h, s, a) = r[s][a];
                m.cost(h, s, a) = c[s][a];
            }
    m.budget = 1.2;
    return m;
}

TabularCmdp risky_shortcut() {
    constexpr int S = 3, A = 2, H = 3;
    constexpr int start = 0, hazard = 1, goal = 2;
    TabularCmdp m;
    m.transition = Kernel(S, A, H);
    m.reward = StageTable(S, A, H);
    m.cost = StageTable(S, A, H);
    for (int h = 0; h < H; ++h) {
        auto slow = m.transition.row(h, start, 0);
        slow[start] = 0.8;
        slow[goal] = 0.2;
        auto fast = m.transition.row(h, start, 1);
        fast[goal] = 0.7;
        fast[hazard] = 0.3;
        m.cost(h, start, 1) = 0.1;
        for (int a = 0; a < A; ++a) {
            auto out = m.transition.row(h, hazard, a);
            out[hazard] = 0.5;
            out[start] = 0.5;
            m.cost(h, hazard, a) = 1.0;
            m.transition.row(h, goal, a)[goal] = 1.0;
            m.reward(h, goal, a) = 1.0;
        }
    }
    m.budget = 0.3;
    return m;
}

} // namespace

TabularCmdp generate(const GenSpec& spec) {
    if (spec.num_states <= 0 || spec.num_actions <= 0 || spec.horizon <= 0)
        throw GenerationError("generate: dimensions must be positive");
    if (!(spec.dirichlet_alpha > 0.0)) throw GenerationError("generate: dirichlet_alpha must be positive");
    if (!(spec.zeta_target > 0.0)) throw GenerationError("generate: zeta_target must be positive");

    for (int attempt = 0; attempt < kGenerationRetries; ++attempt) {
        Rng rng = Rng::stream(spec.seed, static_cast<std::uint64_t>(attempt));
        TabularCmdp m = draw_instance(spec, rng);
        const double min_cost =
            solve_unconstrained(m.transition, m.cost, Sense::Minimize).values(0, m.initial_state);
        const double budget = min_cost + spec.zeta_target;
        if (budget > 0.0 && budget <= spec.horizon) {
            m.budget = budget;
            return m;
        }
    }
    std::ostringstream msg;
    msg << "generate: no draw in " << kGenerationRetries << " attempts admits zeta_target " << spec.zeta_target
        << " with H = " << spec.horizon << " (budget must stay in (0, H])";
    throw GenerationError(msg.str());
}

std::vector<std::string> preset_names() { return {"single_state_tradeoff", "two_state_chain", "risky_shortcut"}; }

TabularCmdp preset(std::string_view name) {
    if (name == "single_state_tradeoff") return single_state_tradeoff();
    if (name == "two_state_chain") return two_state_chain();
    if (name == "risky_shortcut") return risky_shortcut();
    std::ostringstream msg;
    msg << "unknown preset \"" << name << "\"; available:";
    for (const auto& n : preset_names()) msg << " " << n;
    throw std::invalid_argument(msg.str());
}

} // namespace cmdp
