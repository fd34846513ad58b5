#include "cmdp/learner.hpp"

#include "cmdp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace cmdp {

// ---------------------------------------------------------------------------
// EmpiricalModel

namespace {
bool is_power_of_two(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }
} // namespace

EmpiricalModel::EmpiricalModel(int num_states, int num_actions, int horizon)
    : states_(num_states), actions_(num_actions), horizon_(horizon), kernel_(num_states, num_actions, horizon) {
    const std::size_t rows = static_cast<std::size_t>(num_states) * num_actions * horizon;
    total_visits_.assign(rows, 0);
    batch_counts_.assign(rows * num_states, 0);
    batch_size_.assign(rows, 0);
    epoch_.assign(rows, 0);
}

bool EmpiricalModel::record_transition(int h, int s, int a, int next_state) {
    if (h < 0 || h >= horizon_ || s < 0 || s >= states_ || a < 0 || a >= actions_ || next_state < 0 ||
        next_state >= states_)
        throw std::out_of_range("record_transition: index out of range");
    const std::size_t row = index(h, s, a);
    const std::int64_t visits = ++total_visits_[row];
    ++batch_counts_[row * states_ + next_state];
    if (!is_power_of_two(visits)) return false;

    const auto counts = std::span(batch_counts_).subspan(row * states_, states_);
    std::int64_t n = 0;
    for (auto c : counts) n += c;
    auto p = kernel_.row(h, s, a);
    for (int sn = 0; sn < states_; ++sn) p[sn] = static_cast<double>(counts[sn]) / static_cast<double>(n);
    batch_size_[row] = n;
    std::fill(counts.begin(), counts.end(), 0);
    ++epoch_[row];
    ++total_updates_;
    return true;
}

// ---------------------------------------------------------------------------
// Bonus

namespace {

struct Moments {
    double mean;
    double variance;
};

Moments moments(std::span<const double> p, std::span<const double> v) {
    double mean = 0.0, second = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        mean += p[i] * v[i];
        second += p[i] * v[i] * v[i];
    }
    return {mean, std::max(0.0, second - mean * mean)};
}

double bonus_from_variance(double variance, std::int64_t n, const BonusParams& params) {
    const double L = params.log_inv_delta_prime;
    const double inv_n = 1.0 / static_cast<double>(n);
    return params.scale * (params.c1 * std::sqrt(variance * L * inv_n) + params.c2 * params.horizon * L * inv_n);
}

} // namespace

double compute_bonus(std::span<const double> p_hat, std::span<const double> v_next, std::int64_t n,
                     const BonusParams& params) {
    if (n < 1) throw std::invalid_argument("compute_bonus: batch size must be >= 1");
    if (p_hat.size() != v_next.size()) throw DimensionMismatch("compute_bonus: p_hat and v_next differ in size");
    return bonus_from_variance(moments(p_hat, v_next).variance, n, params);
}

// ---------------------------------------------------------------------------
// Backups

namespace {

void require_model_shape(const EmpiricalModel& model, const StageTable& reward, const StageTable& cost) {
    for (const auto* t : {&reward, &cost})
        if (t->num_states() != model.num_states() || t->num_actions() != model.num_actions() ||
            t->horizon() != model.horizon())
            throw DimensionMismatch("stage table shape differs from the empirical model");
}

struct QPair {
    double reward_upper;
    double cost_lower;
};

QPair optimistic_q(const EmpiricalModel& model, const StageTable& reward, const StageTable& cost, int h, int s,
                   int a, std::span<const double> reward_next, std::span<const double> cost_next,
                   const BonusParams& params) {
    const double H = model.horizon();
    const std::int64_t n = model.batch_size(h, s, a);
    if (n == 0) return {H, 0.0};
    const auto p = model.kernel_row(h, s, a);
    const auto mr = moments(p, reward_next);
    const auto mc = moments(p, cost_next);
    const double qr = reward(h, s, a) + bonus_from_variance(mr.variance, n, params) + mr.mean;
    const double qc = cost(h, s, a) - bonus_from_variance(mc.variance, n, params) + mc.mean;
    return {std::min(qr, H), std::max(qc, 0.0)};
}

} // namespace

OptimisticBackup lagrangian_greedy_backup(const EmpiricalModel& model, const StageTable& reward,
                                          const StageTable& cost, double lambda, const BonusParams& params) {
    require_model_shape(model, reward, cost);
    const int S = model.num_states(), A = model.num_actions(), H = model.horizon();
    ValueTable vr(S, H), vc(S, H);
    std::vector<int> actions(static_cast<std::size_t>(S) * H, 0);
    for (int h = H - 1; h >= 0; --h) {
        const auto r_next = vr.row(h + 1);
        const auto c_next = vc.row(h + 1);
        for (int s = 0; s < S; ++s) {
            int best_action = 0;
            QPair best{};
            double best_score = 0.0;
            for (int a = 0; a < A; ++a) {
                const auto q = optimistic_q(model, reward, cost, h, s, a, r_next, c_next, params);
                const double score = q.reward_upper - lambda * q.cost_lower;
                if (a == 0 || score > best_score) {
                    best_score = score;
                    best = q;
                    best_action = a;
                }
            }
            vr(h, s) = best.reward_upper;
            vc(h, s) = best.cost_lower;
            actions[static_cast<std::size_t>(h) * S + s] = best_action;
        }
    }
    return {Policy::deterministic(S, A, H, actions), std::move(vr), std::move(vc)};
}

OptimisticValues optimistic_policy_values(const EmpiricalModel& model, const StageTable& reward,
                                          const StageTable& cost, const Policy& pi, const BonusParams& params) {
    require_model_shape(model, reward, cost);
    const int S = model.num_states(), A = model.num_actions(), H = model.horizon();
    if (pi.num_states() != S || pi.num_actions() != A || pi.horizon() != H)
        throw DimensionMismatch("policy shape differs from the empirical model");
    ValueTable vr(S, H), vc(S, H);
    for (int h = H - 1; h >= 0; --h) {
        const auto r_next = vr.row(h + 1);
        const auto c_next = vc.row(h + 1);
        for (int s = 0; s < S; ++s) {
            const auto dist = pi.distribution(h, s);
            double r_total = 0.0, c_total = 0.0;
            for (int a = 0; a < A; ++a) {
                if (dist[a] == 0.0) continue;
                const auto q = optimistic_q(model, reward, cost, h, s, a, r_next, c_next, params);
                r_total += dist[a] * q.reward_upper;
                c_total += dist[a] * q.cost_lower;
            }
            vr(h, s) = r_total;
            vc(h, s) = c_total;
        }
    }
    return {std::move(vr), std::move(vc)};
}

// ---------------------------------------------------------------------------
// Dual variable

DualGrid::DualGrid(double eps1, double cap) : eps1_(eps1) {
    if (!(eps1 > 0.0) || !std::isfinite(eps1)) throw std::invalid_argument("dual grid step must be positive");
    if (!(cap > 0.0) || !std::isfinite(cap)) throw std::invalid_argument("dual cap U must be positive");
    // relative slack so that U already on the grid is not bumped by rounding noise
    max_index_ = static_cast<std::int64_t>(std::ceil(cap / eps1 * (1.0 - 1e-12)));
    if (max_index_ < 1) max_index_ = 1;
}

std::int64_t DualGrid::round_index(double lambda) const {
    if (std::isnan(lambda)) throw std::invalid_argument("round_index: NaN");
    if (lambda <= 0.0) return 0;
    const double q = lambda / eps1_;
    if (q >= static_cast<double>(max_index_)) return max_index_;
    const double lower = std::floor(q);
    auto i = static_cast<std::int64_t>(lower);
    if (q - lower > 0.5) ++i;
    return std::min(i, max_index_);
}

double round_to_grid(double lambda_raw, const DualGrid& grid) { return grid.value(grid.round_index(lambda_raw)); }

DualState dual_step(const DualState& state, double cost_value, double budget_prime) {
    DualState next = state;
    next.index = state.grid.round_index(state.lambda() + state.eta * (cost_value - budget_prime));
    return next;
}

// ---------------------------------------------------------------------------
// Configuration

const char* to_string(FeasibilityMode mode) { return mode == FeasibilityMode::Relaxed ? "relaxed" : "strict"; }

FeasibilityMode parse_mode(const std::string& text) {
    if (text == "relaxed") return FeasibilityMode::Relaxed;
    if (text == "strict") return FeasibilityMode::Strict;
    throw std::invalid_argument("mode must be \"relaxed\" or \"strict\", got \"" + text + "\"");
}

double LearnerConfig::eta(int horizon) const {
    if (eta_override) return *eta_override;
    return grid().cap() / (horizon * std::sqrt(static_cast<double>(iterations)));
}

double LearnerConfig::delta_prime(int num_states, int num_actions, int horizon) const {
    const double K = static_cast<double>(episodes);
    return delta / (200.0 * num_states * num_actions * static_cast<double>(horizon) * horizon * K * K);
}

double LearnerConfig::shifted_budget(double budget) const {
    return mode == FeasibilityMode::Relaxed ? budget + budget_shift : budget - budget_shift;
}

BonusParams LearnerConfig::bonus_params(int num_states, int num_actions, int horizon) const {
    BonusParams p;
    p.c1 = c1;
    p.c2 = c2;
    p.scale = bonus_scale;
    p.log_inv_delta_prime = -std::log(delta_prime(num_states, num_actions, horizon));
    p.horizon = horizon;
    return p;
}

void LearnerConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("learner config: " + what); };
    if (episodes < 1) fail("K must be >= 1");
    if (episodes > max_episodes) fail("K exceeds the hard cap of " + std::to_string(max_episodes));
    if (iterations < 1) fail("T must be >= 1");
    if (!(dual_cap > 0.0)) fail("U must be positive");
    if (!(grid_step > 0.0)) fail("eps1 must be positive");
    if (eta_override && !(*eta_override > 0.0)) fail("eta must be positive");
    if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0,1)");
    if (!(budget_shift >= 0.0)) fail("budget shift must be non-negative");
    if (!(bonus_scale >= 0.0)) fail("bonus scale must be non-negative");
    if (mode == FeasibilityMode::Strict && zeta && !(budget_shift > 0.0 && budget_shift < *zeta))
        fail("strict mode requires 0 < Delta < zeta");
}

namespace {
std::int64_t ceil_count(double x) {
    // tolerate representation noise in values that are integers in exact arithmetic
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(x * (1.0 - 1e-12))));
}
} // namespace

LearnerConfig derive_config(FeasibilityMode mode, double epsilon, double delta, const TabularCmdp& m,
                            std::optional<double> zeta, const ConfigMultipliers& mult) {
    const double S = m.num_states(), A = m.num_actions(), H = m.horizon();
    LearnerConfig cfg;
    cfg.mode = mode;
    cfg.delta = delta;
    cfg.zeta = zeta;
    if (mode == FeasibilityMode::Relaxed) {
        if (!(epsilon > 0.0 && epsilon <= H)) throw std::invalid_argument("derive_config: epsilon must lie in (0, H]");
        cfg.episodes = ceil_count(mult.episodes * S * A * std::pow(H, 3) / (epsilon * epsilon));
        cfg.iterations = ceil_count(mult.iterations * std::pow(H / epsilon, 4));
        cfg.dual_cap = mult.dual_cap * H / epsilon;
        cfg.grid_step = mult.grid_step * std::pow(epsilon / H, 3);
        cfg.budget_shift = epsilon / 2.0;
    } else {
        if (!zeta) throw std::invalid_argument("derive_config: strict mode needs the Slater constant");
        const double z = *zeta;
        if (!(z > 0.0)) throw std::invalid_argument("derive_config: strict mode needs zeta > 0");
        if (!(epsilon > 0.0 && epsilon <= H - z))
            throw std::invalid_argument("derive_config: epsilon must lie in (0, H - zeta]");
        cfg.episodes = ceil_count(mult.episodes * S * A * std::pow(H, 5) / (epsilon * epsilon * z * z));
        cfg.iterations = ceil_count(mult.iterations * std::pow(H, 6) / (std::pow(z, 4) * epsilon * epsilon));
        cfg.dual_cap = mult.dual_cap * H * H / (z * (H - epsilon));
        cfg.grid_step = mult.grid_step * epsilon * epsilon * z * z / std::pow(H, 4);
        cfg.budget_shift = z * epsilon / (2.0 * H);
    }
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Primal-dual episode

std::shared_ptr<const OptimisticBackup> BackupCache::find(std::int64_t index) const {
    const auto it = entries_.find(index);
    return it == entries_.end() ? nullptr : it->second;
}

void BackupCache::store(std::int64_t index, std::shared_ptr<const OptimisticBackup> backup) {
    entries_[index] = std::move(backup);
}

EpisodePlan primal_dual_episode(const EmpiricalModel& model, const StageTable& reward, const StageTable& cost,
                                int initial_state, const LearnerConfig& cfg, double budget_prime,
                                BackupCache* cache, std::int64_t start_index) {
    const int S = model.num_states(), A = model.num_actions(), H = model.horizon();
    const auto params = cfg.bonus_params(S, A, H);
    DualState dual{cfg.grid(), cfg.eta(H), std::clamp<std::int64_t>(start_index, 0, cfg.grid().max_index())};

    EpisodePlan plan;
    const auto T = static_cast<std::size_t>(cfg.iterations);
    plan.lambda_trace.reserve(T);
    plan.cost_trace.reserve(T);
    plan.reward_trace.reserve(T);

    BackupCache local;
    BackupCache& memo = cache ? *cache : local;
    // component order follows first appearance
    std::vector<std::shared_ptr<const OptimisticBackup>> distinct;
    std::vector<std::int64_t> counts;
    for (std::size_t t = 0; t < T; ++t) {
        auto backup = memo.find(dual.index);
        if (!backup) {
            backup = std::make_shared<const OptimisticBackup>(
                lagrangian_greedy_backup(model, reward, cost, dual.lambda(), params));
            memo.store(dual.index, backup);
        }
        const double vc = backup->cost_lower(0, initial_state);
        plan.lambda_trace.push_back(dual.lambda());
        plan.cost_trace.push_back(vc);
        plan.reward_trace.push_back(backup->reward_upper(0, initial_state));

        const auto it = std::find(distinct.begin(), distinct.end(), backup);
        if (it == distinct.end()) {
            distinct.push_back(backup);
            counts.push_back(1);
        } else {
            ++counts[static_cast<std::size_t>(it - distinct.begin())];
        }
        dual = dual_step(dual, vc, budget_prime);
    }
    plan.final_index = dual.index;

    std::vector<MixtureComponent> components;
    components.reserve(distinct.size());
    for (std::size_t i = 0; i < distinct.size(); ++i)
        components.push_back({static_cast<double>(counts[i]) / static_cast<double>(T),
                              std::shared_ptr<const Policy>(distinct[i], &distinct[i]->policy)});
    plan.mixture = MixturePolicy(std::move(components));
    return plan;
}

// ---------------------------------------------------------------------------
// Full run

namespace {

/// Accumulates sum_k pi^k / K with identical policies merged by content.
class FinalMixtureBuilder {
public:
    void add(const MixturePolicy& episode_mixture, std::int64_t iterations) {
        for (const auto& c : episode_mixture.components()) {
            const auto ticks = static_cast<std::int64_t>(std::llround(c.weight * static_cast<double>(iterations)));
            auto [it, inserted] = index_.try_emplace(c.policy->data(), policies_.size());
            if (inserted) {
                policies_.push_back(c.policy);
                ticks_.push_back(0);
            }
            ticks_[it->second] += ticks;
            total_ += ticks;
        }
    }

    MixturePolicy build() const {
        std::vector<MixtureComponent> components;
        for (std::size_t i = 0; i < policies_.size(); ++i)
            components.push_back({static_cast<double>(ticks_[i]) / static_cast<double>(total_), policies_[i]});
        return MixturePolicy(std::move(components));
    }

private:
    std::map<std::vector<double>, std::size_t> index_;
    std::vector<std::shared_ptr<const Policy>> policies_;
    std::vector<std::int64_t> ticks_;
    std::int64_t total_ = 0;
};

} // namespace

LearnerResult run_learner(const TabularCmdp& env, const LearnerConfig& cfg, std::uint64_t seed,
                          const EpisodeCallback& on_episode) {
    cfg.validate();
    const int S = env.num_states(), A = env.num_actions(), H = env.horizon();
    LearnerResult result{MixturePolicy{}, EmpiricalModel(S, A, H), {}, cfg.shifted_budget(env.budget)};
    EmpiricalModel& model = result.model;
    BackupCache cache;
    FinalMixtureBuilder final_mixture;
    std::int64_t start_index = 0;

    for (std::int64_t k = 0; k < cfg.episodes; ++k) {
        const auto plan = primal_dual_episode(model, env.reward, env.cost, env.initial_state, cfg,
                                              result.budget_prime, &cache, cfg.warm_start ? start_index : 0);
        start_index = plan.final_index;

        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(k));
        const auto rollout = sample_mixture_episode(env, plan.mixture, rng);
        bool triggered = false;
        for (const auto& step : rollout.trajectory.steps) {
            if (model.record_transition(step.h, step.state, step.action, step.next_state)) {
                triggered = true;
                result.updates.push_back({k, step.h, step.state, step.action,
                                          model.batch_size(step.h, step.state, step.action)});
            }
        }
        if (triggered) cache.invalidate();

        final_mixture.add(plan.mixture, cfg.iterations);
        if (on_episode) on_episode(EpisodeObservation{k, plan, rollout, model.total_updates()});
    }
    result.final_policy = final_mixture.build();
    return result;
}

} // namespace cmdp
