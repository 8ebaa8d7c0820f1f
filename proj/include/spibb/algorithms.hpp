#pragma once

#include <span>
#include <vector>

#include "spibb/data.hpp"
#include "spibb/mdp.hpp"

namespace spibb {

/// Policy-iteration cap shared by both SPIBB trainers.
inline constexpr int kMaxPolicyIterations = 300;

struct SpibbConfig {
    double n_wedge = 0.0; // pairs seen fewer than n_wedge times are bootstrapped
    int max_iterations = kMaxPolicyIterations;
};

struct SoftSpibbConfig {
    double epsilon = 0.0; // per-state error budget
    double delta = 0.05;  // confidence fed to the error table
    int max_iterations = kMaxPolicyIterations;
};

struct RaMdpConfig {
    double kappa = 0.0;
};

/// Per-pair model error e_delta(x, a); +infinity where the pair was never observed.
struct ErrorTable {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> e;

    double operator()(int x, int a) const { return e[static_cast<std::size_t>(x) * n_actions + a]; }
    std::span<const double> row(int x) const {
        return {e.data() + static_cast<std::size_t>(x) * n_actions, static_cast<std::size_t>(n_actions)};
    }
};

/// log(2 |X| |A| 2^|X| / delta), evaluated without forming 2^|X|.
double error_log_term(int n_states, int n_actions, double delta);

/// e(x, a) = sqrt(2 / N(x, a) * error_log_term).
ErrorTable error_table(const CountTables& counts, double delta);

/// Dynamic programming on the MLE model.
Policy train_basic_rl(const FiniteMdp& mle);

/// MLE model with rewards lowered by kappa / sqrt(N(x, a)) on observed pairs.
FiniteMdp reward_adjusted_mdp(const FiniteMdp& mle, const CountTables& counts, double kappa);

Policy train_ramdp(const FiniteMdp& mle, const CountTables& counts, const RaMdpConfig& cfg);

/// Pi_b-SPIBB: the best policy in the MLE model among those that copy the
/// baseline on every pair with N(x, a) < n_wedge. Policy iteration; the
/// improvement step keeps baseline mass on bootstrapped pairs and moves the
/// rest onto the best non-bootstrapped action.
Policy train_spibb(const FiniteMdp& mle, const CountTables& counts, const Policy& baseline,
                   const SpibbConfig& cfg);

/// One state's Soft-SPIBB improvement: starting from the baseline row, move
/// mass from the lowest-valued donor to the highest-valued action (both with
/// finite error) until the error-weighted budget is spent. Moving m costs
/// m * (e_donor + e_receiver). Infinite-error actions are left untouched.
std::vector<double> soft_spibb_local_step(std::span<const double> q_row, std::span<const double> e_row,
                                          std::span<const double> baseline_row, double epsilon);

/// Approximate Soft-SPIBB: policy iteration with soft_spibb_local_step as the
/// improvement operator.
Policy train_soft_spibb(const FiniteMdp& mle, const ErrorTable& errors, const Policy& baseline,
                        const SoftSpibbConfig& cfg);

/// True iff `pi` reproduces `baseline` bitwise on every bootstrapped pair.
bool satisfies_pi_b(const Policy& pi, const Policy& baseline, const CountTables& counts, double n_wedge);

/// sum_a e(x, a) |pi(a|x) - baseline(a|x)| over finite-error actions.
double soft_constraint_cost(std::span<const double> pi_row, std::span<const double> baseline_row,
                            std::span<const double> e_row);

} // namespace spibb
