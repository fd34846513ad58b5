#include "cmdp/core.hpp"

#include "cmdp/exact_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cmdp {

namespace {

void require_positive_dims(int num_states, int num_actions, int horizon) {
    if (num_states <= 0 || num_actions <= 0 || horizon <= 0)
        throw std::invalid_argument("dimensions must be positive");
}

std::size_t table_size(int num_states, int num_actions, int horizon) {
    return static_cast<std::size_t>(num_states) * num_actions * horizon;
}

bool on_simplex(std::span<const double> p) {
    double sum = 0.0;
    for (double x : p) {
        if (!(x >= 0.0)) return false;
        sum += x;
    }
    return std::abs(sum - 1.0) <= kProbabilityTolerance;
}

} // namespace

// ---------------------------------------------------------------------------
// Kernel

Kernel::Kernel(int num_states, int num_actions, int horizon)
    : states_(num_states), actions_(num_actions), horizon_(horizon) {
    require_positive_dims(num_states, num_actions, horizon);
    data_.assign(table_size(num_states, num_actions, horizon) * num_states, 0.0);
}

Kernel::Kernel(int num_states, int num_actions, int horizon, std::vector<double> probabilities)
    : states_(num_states), actions_(num_actions), horizon_(horizon), data_(std::move(probabilities)) {
    require_positive_dims(num_states, num_actions, horizon);
    if (data_.size() != table_size(num_states, num_actions, horizon) * num_states)
        throw DimensionMismatch("kernel data size does not match H*S*A*S");
}

void Kernel::normalize_rows() {
    for (int h = 0; h < horizon_; ++h)
        for (int s = 0; s < states_; ++s)
            for (int a = 0; a < actions_; ++a) {
                auto r = row(h, s, a);
                const double sum = std::accumulate(r.begin(), r.end(), 0.0);
                if (sum > 0.0)
                    for (double& x : r) x /= sum;
            }
}

// ---------------------------------------------------------------------------
// StageTable

StageTable::StageTable(int num_states, int num_actions, int horizon, double fill)
    : states_(num_states), actions_(num_actions), horizon_(horizon) {
    require_positive_dims(num_states, num_actions, horizon);
    data_.assign(table_size(num_states, num_actions, horizon), fill);
}

StageTable::StageTable(int num_states, int num_actions, int horizon, std::vector<double> values)
    : states_(num_states), actions_(num_actions), horizon_(horizon), data_(std::move(values)) {
    require_positive_dims(num_states, num_actions, horizon);
    if (data_.size() != table_size(num_states, num_actions, horizon))
        throw DimensionMismatch("stage table size does not match H*S*A");
}

StageTable StageTable::minus_scaled(const StageTable& other, double weight) const {
    if (other.states_ != states_ || other.actions_ != actions_ || other.horizon_ != horizon_)
        throw DimensionMismatch("stage tables differ in shape");
    StageTable out = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] -= weight * other.data_[i];
    return out;
}

// ---------------------------------------------------------------------------
// Policy

Policy::Policy(int num_states, int num_actions, int horizon, std::vector<double> probabilities)
    : states_(num_states), actions_(num_actions), horizon_(horizon), data_(std::move(probabilities)) {
    require_positive_dims(num_states, num_actions, horizon);
    if (data_.size() != table_size(num_states, num_actions, horizon))
        throw DimensionMismatch("policy data size does not match H*S*A");
    for (int h = 0; h < horizon; ++h)
        for (int s = 0; s < num_states; ++s)
            if (!on_simplex(distribution(h, s))) {
                std::ostringstream msg;
                msg << "policy distribution at (h=" << h << ", s=" << s << ") is not on the simplex";
                throw std::invalid_argument(msg.str());
            }
}

Policy Policy::deterministic(int num_states, int num_actions, int horizon, const std::vector<int>& actions) {
    if (actions.size() != static_cast<std::size_t>(num_states) * horizon)
        throw DimensionMismatch("deterministic policy needs H*S actions");
    std::vector<double> probs(table_size(num_states, num_actions, horizon), 0.0);
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (actions[i] < 0 || actions[i] >= num_actions)
            throw std::invalid_argument("deterministic policy action out of range");
        probs[i * num_actions + actions[i]] = 1.0;
    }
    return Policy(num_states, num_actions, horizon, std::move(probs));
}

Policy Policy::uniform(int num_states, int num_actions, int horizon) {
    return Policy(num_states, num_actions, horizon,
                  std::vector<double>(table_size(num_states, num_actions, horizon), 1.0 / num_actions));
}

bool Policy::is_deterministic() const {
    return std::all_of(data_.begin(), data_.end(), [](double p) { return p == 0.0 || p == 1.0; });
}

int Policy::action(int h, int s) const {
    const auto d = distribution(h, s);
    return static_cast<int>(std::max_element(d.begin(), d.end()) - d.begin());
}

// ---------------------------------------------------------------------------
// MixturePolicy

MixturePolicy::MixturePolicy(std::vector<MixtureComponent> components) : components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("mixture needs at least one component");
    double sum = 0.0;
    for (const auto& c : components_) {
        if (!c.policy) throw std::invalid_argument("mixture component without a policy");
        if (!(c.weight >= 0.0)) throw std::invalid_argument("mixture weight must be non-negative");
        sum += c.weight;
    }
    if (std::abs(sum - 1.0) > kProbabilityTolerance)
        throw std::invalid_argument("mixture weights must sum to 1");
    const auto& first = *components_.front().policy;
    for (const auto& c : components_)
        if (c.policy->num_states() != first.num_states() || c.policy->num_actions() != first.num_actions() ||
            c.policy->horizon() != first.horizon())
            throw DimensionMismatch("mixture components differ in shape");
}

MixturePolicy MixturePolicy::single(Policy policy) {
    return single(std::make_shared<const Policy>(std::move(policy)));
}

MixturePolicy MixturePolicy::single(std::shared_ptr<const Policy> policy) {
    return MixturePolicy({MixtureComponent{1.0, std::move(policy)}});
}

std::vector<double> MixturePolicy::weights() const {
    std::vector<double> w;
    w.reserve(components_.size());
    for (const auto& c : components_) w.push_back(c.weight);
    return w;
}

// ---------------------------------------------------------------------------
// ValueTable

ValueTable::ValueTable(int num_states, int horizon) : states_(num_states), horizon_(horizon) {
    if (num_states <= 0 || horizon <= 0) throw std::invalid_argument("dimensions must be positive");
    data_.assign(static_cast<std::size_t>(horizon + 1) * num_states, 0.0);
}

// ---------------------------------------------------------------------------
// Operations

std::string to_string(const Violation& v) {
    std::ostringstream out;
    out << v.message;
    if (v.h >= 0) {
        out << " at (h=" << v.h;
        if (v.s >= 0) out << ", s=" << v.s;
        if (v.a >= 0) out << ", a=" << v.a;
        out << ")";
    }
    out << " [" << v.magnitude << "]";
    return out.str();
}

std::vector<Violation> validate_cmdp(const TabularCmdp& m) {
    std::vector<Violation> out;
    const int S = m.num_states(), A = m.num_actions(), H = m.horizon();
    if (S <= 0 || A <= 0 || H <= 0) {
        out.push_back({"dimensions must be positive", -1, -1, -1, 0.0});
        return out;
    }
    auto same_shape = [&](const StageTable& t) {
        return t.num_states() == S && t.num_actions() == A && t.horizon() == H;
    };
    if (!same_shape(m.reward)) out.push_back({"reward table shape differs from kernel", -1, -1, -1, 0.0});
    if (!same_shape(m.cost)) out.push_back({"cost table shape differs from kernel", -1, -1, -1, 0.0});
    if (!out.empty()) return out;

    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const auto row = m.transition.row(h, s, a);
                double sum = 0.0;
                double most_negative = 0.0;
                for (double p : row) {
                    sum += p;
                    most_negative = std::min(most_negative, p);
                }
                if (most_negative < 0.0 || std::isnan(sum))
                    out.push_back({"negative transition probability", h, s, a, most_negative});
                if (!(std::abs(sum - 1.0) <= kProbabilityTolerance))
                    out.push_back({"transition row does not sum to 1", h, s, a, sum - 1.0});
                const double r = m.reward(h, s, a);
                if (!(r >= 0.0 && r <= 1.0)) out.push_back({"reward outside [0,1]", h, s, a, r});
                const double c = m.cost(h, s, a);
                if (!(c >= 0.0 && c <= 1.0)) out.push_back({"cost outside [0,1]", h, s, a, c});
            }
    if (!(m.budget > 0.0 && m.budget <= H)) out.push_back({"budget out of (0,H]", -1, -1, -1, m.budget});
    if (m.initial_state < 0 || m.initial_state >= S)
        out.push_back({"initial state out of range", -1, -1, -1, static_cast<double>(m.initial_state)});
    return out;
}

void require_same_shape(const Kernel& kernel, const StageTable& g, const Policy& pi) {
    const int S = kernel.num_states(), A = kernel.num_actions(), H = kernel.horizon();
    if (g.num_states() != S || g.num_actions() != A || g.horizon() != H)
        throw DimensionMismatch("stage function shape differs from kernel");
    if (pi.num_states() != S || pi.num_actions() != A || pi.horizon() != H)
        throw DimensionMismatch("policy shape differs from kernel");
}

ValueTable evaluate_policy(const Kernel& kernel, const StageTable& g, const Policy& pi) {
    require_same_shape(kernel, g, pi);
    const int S = kernel.num_states(), A = kernel.num_actions(), H = kernel.horizon();
    ValueTable v(S, H);
    for (int h = H - 1; h >= 0; --h) {
        const auto next = v.row(h + 1);
        for (int s = 0; s < S; ++s) {
            const auto dist = pi.distribution(h, s);
            double total = 0.0;
            for (int a = 0; a < A; ++a) {
                if (dist[a] == 0.0) continue;
                const auto p = kernel.row(h, s, a);
                double q = g(h, s, a);
                for (int sn = 0; sn < S; ++sn) q += p[sn] * next[sn];
                total += dist[a] * q;
            }
            v(h, s) = total;
        }
    }
    return v;
}

double evaluate_mixture(const TabularCmdp& m, const StageTable& g, const MixturePolicy& mix) {
    double value = 0.0;
    for (const auto& c : mix.components())
        value += c.weight * evaluate_policy(m.transition, g, *c.policy)(0, m.initial_state);
    return value;
}

SlaterResult slater_constant(const TabularCmdp& m) {
    auto [policy, values] = solve_unconstrained(m.transition, m.cost, Sense::Minimize);
    return {m.budget - values(0, m.initial_state), std::move(policy)};
}

} // namespace cmdp
