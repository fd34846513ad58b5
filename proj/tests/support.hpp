#pragma once

#include "cmdp/core.hpp"
#include "cmdp/instance_gen.hpp"

#include <cstdint>
#include <vector>

namespace testing {

/// Single state, H = 1, two actions.
inline cmdp::TabularCmdp single_state(double r0, double r1, double c0, double c1, double budget) {
    cmdp::TabularCmdp m;
    m.transition = cmdp::Kernel(1, 2, 1, {1.0, 1.0});
    m.reward = cmdp::StageTable(1, 2, 1, {r0, r1});
    m.cost = cmdp::StageTable(1, 2, 1, {c0, c1});
    m.budget = budget;
    return m;
}

/// Constant reward and cost on a uniform kernel.
inline cmdp::TabularCmdp constant_instance(int S, int A, int H, double r, double c, double budget) {
    cmdp::TabularCmdp m;
    m.transition = cmdp::Kernel(S, A, H, std::vector<double>(static_cast<std::size_t>(H) * S * A * S, 1.0 / S));
    m.reward = cmdp::StageTable(S, A, H, r);
    m.cost = cmdp::StageTable(S, A, H, c);
    m.budget = budget;
    return m;
}

inline cmdp::TabularCmdp random_instance(int S, int A, int H, double zeta, std::uint64_t seed) {
    cmdp::GenSpec spec;
    spec.num_states = S;
    spec.num_actions = A;
    spec.horizon = H;
    spec.zeta_target = zeta;
    spec.seed = seed;
    return cmdp::generate(spec);
}

} // namespace testing
