#pragma once

#include "cmdp/core.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cmdp {

struct GenSpec {
    int num_states = 2;
    int num_actions = 2;
    int horizon = 2;
    double zeta_target = 0.5; ///< must lie in (0, H)
    double dirichlet_alpha = 1.0;
    std::uint64_t seed = 0;
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kGenerationRetries = 100;

/// Random instance with Slater constant exactly `spec.zeta_target`.
///
/// Kernel rows are symmetric Dirichlet, rewards and costs uniform on [0,1].
/// The budget is set to (min achievable cost) + zeta_target; draws whose
/// budget falls outside (0, H] are discarded. Attempt i draws from
/// Rng::stream(seed, i).
TabularCmdp generate(const GenSpec& spec);

/// Fixed instances used by tests and experiments:
///
///   single_state_tradeoff  S=1 A=2 H=1, r=(1,0), c=(1,0), b=0.5; V* = 0.5.
///   two_state_chain        S=2 A=2 H=3, deterministic: action 0 moves to
///                          state 0, action 1 moves to state 1; start 0.
///                          r(s,a) = [[0.1, 0.5], [0.3, 1.0]],
///                          c(s,a) = [[0.0, 0.5], [0.2, 1.0]], b = 1.2.
///                          Always-0 earns r 0.3 at cost 0; always-1 earns
///                          r 2.5 at cost 2.5. zeta = 1.2.
///   risky_shortcut         S=3 A=2 H=3 (start, hazard, goal). From start,
///                          action 0 reaches the goal w.p. 0.2 (else stays),
///                          action 1 w.p. 0.7 (else hazard) at cost 0.1.
///                          The hazard costs 1 per step and returns to start
///                          or stays w.p. 1/2; the goal is absorbing with
///                          reward 1 per step. b = 0.3.
TabularCmdp preset(std::string_view name);

std::vector<std::string> preset_names();

} // namespace cmdp
