#pragma once

#include "cmdp/core.hpp"
#include "cmdp/simulator.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

/// Model-based primal-dual online learner for tabular CMDPs.
///
/// Each episode runs T rounds of (optimistic greedy primal step, rounded
/// projected dual step) on an empirical CMDP built from doubling batches,
/// executes the uniform mixture of the T primal policies, and feeds the
/// observed transitions back into the empirical model.
namespace cmdp {

// ---------------------------------------------------------------------------
// Empirical model

/// Doubling-batch estimate of the transition kernel.
///
/// A row (h, s, a) is rebuilt whenever its total visit count reaches a power
/// of two, from the transitions observed since the previous rebuild only.
/// Batch sizes per row are therefore 1, 1, 2, 4, 8, ...
class EmpiricalModel {
public:
    EmpiricalModel(int num_states, int num_actions, int horizon);

    int num_states() const { return states_; }
    int num_actions() const { return actions_; }
    int horizon() const { return horizon_; }

    /// Count one transition; returns true if the row was rebuilt.
    bool record_transition(int h, int s, int a, int next_state);

    /// Empirical successor distribution; all zeros until the first batch.
    std::span<const double> kernel_row(int h, int s, int a) const { return kernel_.row(h, s, a); }
    const Kernel& kernel_hat() const { return kernel_; }

    std::int64_t total_visits(int h, int s, int a) const { return total_visits_[index(h, s, a)]; }
    std::int64_t batch_count(int h, int s, int a, int next_state) const {
        return batch_counts_[index(h, s, a) * states_ + next_state];
    }
    /// Size of the batch behind the current row; 0 if never built.
    std::int64_t batch_size(int h, int s, int a) const { return batch_size_[index(h, s, a)]; }
    /// Number of rebuilds of the row so far.
    std::int64_t epoch(int h, int s, int a) const { return epoch_[index(h, s, a)]; }

    /// Sum of epoch() over all rows.
    std::int64_t total_updates() const { return total_updates_; }

private:
    std::size_t index(int h, int s, int a) const {
        return (static_cast<std::size_t>(h) * states_ + s) * actions_ + a;
    }

    int states_;
    int actions_;
    int horizon_;
    Kernel kernel_;
    std::vector<std::int64_t> total_visits_;
    std::vector<std::int64_t> batch_counts_;
    std::vector<std::int64_t> batch_size_;
    std::vector<std::int64_t> epoch_;
    std::int64_t total_updates_ = 0;
};

// ---------------------------------------------------------------------------
// Bonus

inline constexpr double kDefaultBonusC1 = 460.0 / 9.0;
inline constexpr double kDefaultBonusC2 = 544.0 / 9.0;

struct BonusParams {
    double c1 = kDefaultBonusC1;
    double c2 = kDefaultBonusC2;
    double scale = 1.0;
    double log_inv_delta_prime = 1.0; ///< log(1/delta')
    int horizon = 1;
};

/// scale * (c1 sqrt(Var_p(v) L / n) + c2 H L / n) with L = log(1/delta').
/// Throws std::invalid_argument when n < 1.
double compute_bonus(std::span<const double> p_hat, std::span<const double> v_next, std::int64_t n,
                     const BonusParams& params);

// ---------------------------------------------------------------------------
// Optimistic backups

/// Output of a backup on the empirical CMDP. reward_upper is the optimistic
/// reward value (each Q clipped at H); cost_lower the pessimistic cost value
/// (each Q clipped at 0).
struct OptimisticBackup {
    Policy policy;
    ValueTable reward_upper;
    ValueTable cost_lower;
};

/// Greedy backward selection on Q_r~ - lambda Q_c_ with the lowest action
/// index winning ties. Rows that were never built use Q_r~ = H, Q_c_ = 0.
OptimisticBackup lagrangian_greedy_backup(const EmpiricalModel& model, const StageTable& reward,
                                          const StageTable& cost, double lambda, const BonusParams& params);

struct OptimisticValues {
    ValueTable reward_upper;
    ValueTable cost_lower;
};

/// The same clipped recursions for a fixed (possibly stochastic) policy.
OptimisticValues optimistic_policy_values(const EmpiricalModel& model, const StageTable& reward,
                                          const StageTable& cost, const Policy& pi, const BonusParams& params);

// ---------------------------------------------------------------------------
// Dual variable

/// The net {0, eps1, 2 eps1, ..., U}. U is rounded up to a multiple of eps1.
class DualGrid {
public:
    DualGrid(double eps1, double cap);

    double step() const { return eps1_; }
    double cap() const { return static_cast<double>(max_index_) * eps1_; }
    std::int64_t max_index() const { return max_index_; }
    double value(std::int64_t index) const { return static_cast<double>(index) * eps1_; }

    /// Index of the nearest grid point; midpoints round down, and inputs
    /// outside [0, U] clamp to the ends.
    std::int64_t round_index(double lambda) const;

private:
    double eps1_;
    std::int64_t max_index_;
};

double round_to_grid(double lambda_raw, const DualGrid& grid);

struct DualState {
    DualGrid grid;
    double eta = 0.0;
    std::int64_t index = 0;

    double lambda() const { return grid.value(index); }
};

/// lambda <- R[lambda + eta (V_c_ - b')].
DualState dual_step(const DualState& state, double cost_value, double budget_prime);

// ---------------------------------------------------------------------------
// Configuration

enum class FeasibilityMode { Relaxed, Strict };

const char* to_string(FeasibilityMode mode);
FeasibilityMode parse_mode(const std::string& text);

struct LearnerConfig {
    std::int64_t episodes = 1;   ///< K
    std::int64_t iterations = 1; ///< T
    double dual_cap = 1.0;       ///< U
    double grid_step = 1.0;      ///< eps1
    std::optional<double> eta_override;
    double delta = 0.1;
    FeasibilityMode mode = FeasibilityMode::Relaxed;
    double budget_shift = 0.0; ///< tau (relaxed) or Delta (strict)
    std::optional<double> zeta;
    double c1 = kDefaultBonusC1;
    double c2 = kDefaultBonusC2;
    double bonus_scale = 1.0;
    bool warm_start = false;
    std::int64_t max_episodes = 10'000'000;

    DualGrid grid() const { return DualGrid(grid_step, dual_cap); }
    /// U / (H sqrt(T)) with U the grid cap, unless overridden.
    double eta(int horizon) const;
    /// delta / (200 S A H^2 K^2).
    double delta_prime(int num_states, int num_actions, int horizon) const;
    /// b + tau or b - Delta.
    double shifted_budget(double budget) const;
    BonusParams bonus_params(int num_states, int num_actions, int horizon) const;

    /// Throws std::invalid_argument on any out-of-range field.
    void validate() const;
};

struct ConfigMultipliers {
    double episodes = 1.0;
    double iterations = 1.0;
    double dual_cap = 1.0;
    double grid_step = 1.0;
};

/// Hyperparameters from the sample-complexity settings.
///
/// Relaxed: K = SAH^3/eps^2, T = H^4/eps^4, U = H/eps, eps1 = eps^3/H^3,
/// tau = eps/2, for eps in (0, H].
/// Strict: K = SAH^5/(eps^2 zeta^2), T = H^6/(zeta^4 eps^2),
/// U = H^2/(zeta (H - eps)), eps1 = eps^2 zeta^2/H^4, Delta = zeta eps/(2H),
/// for eps in (0, H - zeta].
/// The settings are orders, so each is scaled by its multiplier; K and T are
/// rounded up to integers.
LearnerConfig derive_config(FeasibilityMode mode, double epsilon, double delta, const TabularCmdp& m,
                            std::optional<double> zeta, const ConfigMultipliers& multipliers = {});

// ---------------------------------------------------------------------------
// Primal-dual episode

/// Memoized backups keyed by dual grid index. Valid until the empirical
/// model changes.
class BackupCache {
public:
    std::shared_ptr<const OptimisticBackup> find(std::int64_t index) const;
    void store(std::int64_t index, std::shared_ptr<const OptimisticBackup> backup);
    void invalidate() { entries_.clear(); }
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::int64_t, std::shared_ptr<const OptimisticBackup>> entries_;
};

struct EpisodePlan {
    MixturePolicy mixture;             ///< uniform over the T primal policies
    std::vector<double> lambda_trace;  ///< lambda_1 .. lambda_T
    std::vector<double> cost_trace;    ///< V_c_(pi_t) at (0, s1)
    std::vector<double> reward_trace;  ///< V_r~(pi_t) at (0, s1)
    std::int64_t final_index = 0;      ///< grid index of lambda_{T+1}
};

/// T primal-dual rounds from lambda_1 = grid(start_index) (0 unless warm
/// starting). Identical policies share one mixture component.
EpisodePlan primal_dual_episode(const EmpiricalModel& model, const StageTable& reward, const StageTable& cost,
                                int initial_state, const LearnerConfig& cfg, double budget_prime,
                                BackupCache* cache = nullptr, std::int64_t start_index = 0);

// ---------------------------------------------------------------------------
// Full run

struct ModelUpdate {
    std::int64_t episode = 0;
    int h = 0;
    int s = 0;
    int a = 0;
    std::int64_t batch_size = 0;
};

struct EpisodeObservation {
    std::int64_t episode = 0; ///< 0-based
    const EpisodePlan& plan;
    const MixtureEpisode& rollout;
    std::int64_t updates_cumulative = 0;
};

using EpisodeCallback = std::function<void(const EpisodeObservation&)>;

struct LearnerResult {
    MixturePolicy final_policy; ///< (1/K) sum of the episode mixtures
    EmpiricalModel model;
    std::vector<ModelUpdate> updates;
    double budget_prime = 0.0;
};

/// Runs K episodes against `env`, which is used only as a trajectory
/// sampler plus the known reward and cost tables. Episode k samples from
/// Rng::stream(seed, k).
LearnerResult run_learner(const TabularCmdp& env, const LearnerConfig& cfg, std::uint64_t seed,
                          const EpisodeCallback& on_episode = {});

} // namespace cmdp
