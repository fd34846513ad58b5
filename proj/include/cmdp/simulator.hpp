#pragma once

#include "cmdp/core.hpp"
#include "cmdp/rng.hpp"

#include <cstdint>
#include <vector>

namespace cmdp {

struct Step {
    int h = 0;
    int state = 0;
    int action = 0;
    double reward = 0.0;
    double cost = 0.0;
    int next_state = 0;
};

/// Exactly H steps starting at s1; steps[h].next_state == steps[h+1].state.
struct Trajectory {
    std::vector<Step> steps;

    double total_reward() const;
    double total_cost() const;
};

/// Roll out `pi` on the true instance. Actions and successors are drawn by
/// inverse CDF in ascending index order, action before successor at each step.
Trajectory sample_episode(const TabularCmdp& m, const Policy& pi, Rng& rng);

struct MixtureEpisode {
    std::size_t component = 0;
    Trajectory trajectory;
};

/// Draw one component from the mixture weights, then roll it out.
MixtureEpisode sample_mixture_episode(const TabularCmdp& m, const MixturePolicy& mix, Rng& rng);

struct MonteCarloEstimate {
    double mean_reward = 0.0;
    double stderr_reward = 0.0;
    double mean_cost = 0.0;
    double stderr_cost = 0.0;
    std::size_t episodes = 0;
};

/// Average return over `episodes` rollouts; episode i uses Rng::stream(seed, i).
MonteCarloEstimate monte_carlo_evaluate(const TabularCmdp& m, const MixturePolicy& mix, std::size_t episodes,
                                        std::uint64_t seed);

} // namespace cmdp
