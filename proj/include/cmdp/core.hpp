#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

/// Tabular finite-horizon constrained MDPs.
///
/// All indices are 0-based: steps h = 0..H-1, states s = 0..S-1, actions
/// a = 0..A-1. Value tables carry one extra terminal row h = H that is
/// identically zero.
namespace cmdp {

/// Tolerance on probability sums accepted from callers and files.
inline constexpr double kProbabilityTolerance = 1e-9;

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Transition kernel P_h(s' | s, a), stored densely as [h][s][a][s'].
class Kernel {
public:
    Kernel() = default;
    Kernel(int num_states, int num_actions, int horizon);
    Kernel(int num_states, int num_actions, int horizon, std::vector<double> probabilities);

    int num_states() const { return states_; }
    int num_actions() const { return actions_; }
    int horizon() const { return horizon_; }

    std::span<const double> row(int h, int s, int a) const {
        return {data_.data() + offset(h, s, a), static_cast<std::size_t>(states_)};
    }
    std::span<double> row(int h, int s, int a) {
        return {data_.data() + offset(h, s, a), static_cast<std::size_t>(states_)};
    }

    const std::vector<double>& data() const { return data_; }

    /// Rescale every row to sum to exactly one in floating point.
    void normalize_rows();

    bool operator==(const Kernel&) const = default;

private:
    std::size_t offset(int h, int s, int a) const {
        return ((static_cast<std::size_t>(h) * states_ + s) * actions_ + a) * states_;
    }

    int states_ = 0;
    int actions_ = 0;
    int horizon_ = 0;
    std::vector<double> data_;
};

/// A per-step function g_h(s, a), stored as [h][s][a]. Used for rewards,
/// costs and Lagrangian combinations of them.
class StageTable {
public:
    StageTable() = default;
    StageTable(int num_states, int num_actions, int horizon, double fill = 0.0);
    StageTable(int num_states, int num_actions, int horizon, std::vector<double> values);

    int num_states() const { return states_; }
    int num_actions() const { return actions_; }
    int horizon() const { return horizon_; }

    double operator()(int h, int s, int a) const { return data_[offset(h, s, a)]; }
    double& operator()(int h, int s, int a) { return data_[offset(h, s, a)]; }

    const std::vector<double>& data() const { return data_; }

    /// this - weight * other, elementwise.
    StageTable minus_scaled(const StageTable& other, double weight) const;

    bool operator==(const StageTable&) const = default;

private:
    std::size_t offset(int h, int s, int a) const {
        return (static_cast<std::size_t>(h) * states_ + s) * actions_ + a;
    }

    int states_ = 0;
    int actions_ = 0;
    int horizon_ = 0;
    std::vector<double> data_;
};

/// Time-indexed stochastic policy pi_h(a | s), stored as [h][s][a].
class Policy {
public:
    Policy() = default;
    /// Throws std::invalid_argument if any distribution is off the simplex.
    Policy(int num_states, int num_actions, int horizon, std::vector<double> probabilities);

    /// `actions` is indexed [h * S + s].
    static Policy deterministic(int num_states, int num_actions, int horizon,
                                const std::vector<int>& actions);
    static Policy uniform(int num_states, int num_actions, int horizon);

    int num_states() const { return states_; }
    int num_actions() const { return actions_; }
    int horizon() const { return horizon_; }

    std::span<const double> distribution(int h, int s) const {
        return {data_.data() + (static_cast<std::size_t>(h) * states_ + s) * actions_,
                static_cast<std::size_t>(actions_)};
    }

    bool is_deterministic() const;
    /// Most likely action at (h, s); the unique action for deterministic rules.
    int action(int h, int s) const;

    const std::vector<double>& data() const { return data_; }

    bool operator==(const Policy&) const = default;

private:
    int states_ = 0;
    int actions_ = 0;
    int horizon_ = 0;
    std::vector<double> data_;
};

struct MixtureComponent {
    double weight = 0.0;
    std::shared_ptr<const Policy> policy;
};

/// A distribution over policies. One component is drawn at the start of an
/// episode and followed for the whole episode, so the value of a mixture is
/// the weighted average of its components' values.
class MixturePolicy {
public:
    MixturePolicy() = default;
    /// Throws std::invalid_argument on empty input, negative weights or a
    /// weight sum off 1 by more than kProbabilityTolerance.
    explicit MixturePolicy(std::vector<MixtureComponent> components);

    static MixturePolicy single(Policy policy);
    static MixturePolicy single(std::shared_ptr<const Policy> policy);

    const std::vector<MixtureComponent>& components() const { return components_; }
    std::size_t size() const { return components_.size(); }
    std::vector<double> weights() const;

private:
    std::vector<MixtureComponent> components_;
};

/// V_h(s) for h = 0..H; row H is the zero terminal row.
class ValueTable {
public:
    ValueTable() = default;
    ValueTable(int num_states, int horizon);

    int num_states() const { return states_; }
    int horizon() const { return horizon_; }

    double operator()(int h, int s) const { return data_[static_cast<std::size_t>(h) * states_ + s]; }
    double& operator()(int h, int s) { return data_[static_cast<std::size_t>(h) * states_ + s]; }

    std::span<const double> row(int h) const {
        return {data_.data() + static_cast<std::size_t>(h) * states_, static_cast<std::size_t>(states_)};
    }

private:
    int states_ = 0;
    int horizon_ = 0;
    std::vector<double> data_;
};

/// Ground-truth CMDP (S, A, H, P, r, c, b) with start state s1.
struct TabularCmdp {
    Kernel transition;
    StageTable reward;
    StageTable cost;
    double budget = 0.0;
    int initial_state = 0;

    int num_states() const { return transition.num_states(); }
    int num_actions() const { return transition.num_actions(); }
    int horizon() const { return transition.horizon(); }
};

struct Violation {
    std::string message;
    int h = -1;
    int s = -1;
    int a = -1;
    double magnitude = 0.0;
};

std::string to_string(const Violation& v);

/// Every invariant breach of `m`; empty iff the instance is well formed.
std::vector<Violation> validate_cmdp(const TabularCmdp& m);

/// Exact value of `pi` for stage function `g` by backward recursion.
ValueTable evaluate_policy(const Kernel& kernel, const StageTable& g, const Policy& pi);

/// sum_i w_i V_0^{pi_i}(s1) under `g`.
double evaluate_mixture(const TabularCmdp& m, const StageTable& g, const MixturePolicy& mix);

struct SlaterResult {
    double zeta = 0.0;
    Policy min_cost_policy;
};

/// zeta = b - min_pi V_c^pi(s1). May be <= 0; callers decide what that means.
SlaterResult slater_constant(const TabularCmdp& m);

/// Throws DimensionMismatch unless kernel, g and pi agree on (S, A, H).
void require_same_shape(const Kernel& kernel, const StageTable& g, const Policy& pi);

} // namespace cmdp
