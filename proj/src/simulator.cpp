#include "cmdp/simulator.hpp"

#include <cmath>

namespace cmdp {

double Trajectory::total_reward() const {
    double total = 0.0;
    for (const auto& s : steps) total += s.reward;
    return total;
}

double Trajectory::total_cost() const {
    double total = 0.0;
    for (const auto& s : steps) total += s.cost;
    return total;
}

Trajectory sample_episode(const TabularCmdp& m, const Policy& pi, Rng& rng) {
    if (pi.num_states() != m.num_states() || pi.num_actions() != m.num_actions() || pi.horizon() != m.horizon())
        throw DimensionMismatch("sample_episode: policy shape differs from instance");
    Trajectory out;
    out.steps.reserve(m.horizon());
    int state = m.initial_state;
    for (int h = 0; h < m.horizon(); ++h) {
        const int action = static_cast<int>(rng.categorical(pi.distribution(h, state)));
        const int next = static_cast<int>(rng.categorical(m.transition.row(h, state, action)));
        out.steps.push_back({h, state, action, m.reward(h, state, action), m.cost(h, state, action), next});
        state = next;
    }
    return out;
}

MixtureEpisode sample_mixture_episode(const TabularCmdp& m, const MixturePolicy& mix, Rng& rng) {
    MixtureEpisode out;
    if (mix.size() > 1) {
        const auto w = mix.weights();
        out.component = rng.categorical(w);
    }
    out.trajectory = sample_episode(m, *mix.components()[out.component].policy, rng);
    return out;
}

MonteCarloEstimate monte_carlo_evaluate(const TabularCmdp& m, const MixturePolicy& mix, std::size_t episodes,
                                        std::uint64_t seed) {
    MonteCarloEstimate out;
    out.episodes = episodes;
    if (episodes == 0) return out;
    double sum_r = 0.0, sum_r2 = 0.0, sum_c = 0.0, sum_c2 = 0.0;
    for (std::size_t i = 0; i < episodes; ++i) {
        Rng rng = Rng::stream(seed, i);
        const auto episode = sample_mixture_episode(m, mix, rng);
        const double r = episode.trajectory.total_reward();
        const double c = episode.trajectory.total_cost();
        sum_r += r;
        sum_r2 += r * r;
        sum_c += c;
        sum_c2 += c * c;
    }
    const double n = static_cast<double>(episodes);
    out.mean_reward = sum_r / n;
    out.mean_cost = sum_c / n;
    if (episodes > 1) {
        const double var_r = std::max(0.0, (sum_r2 - n * out.mean_reward * out.mean_reward) / (n - 1.0));
        const double var_c = std::max(0.0, (sum_c2 - n * out.mean_cost * out.mean_cost) / (n - 1.0));
        out.stderr_reward = std::sqrt(var_r / n);
        out.stderr_cost = std::sqrt(var_c / n);
    }
    return out;
}

} // namespace cmdp
