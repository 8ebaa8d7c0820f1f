#include "spibb/algorithms.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "spibb/errors.hpp"

namespace spibb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_shapes(const FiniteMdp& mle, const Policy& baseline) {
    if (baseline.n_states() != mle.n_states || baseline.n_actions() != mle.n_actions)
        throw ValidationError("baseline shape does not match the MLE model");
    baseline.validate(1e-9);
}

void check_shapes(const FiniteMdp& mle, const CountTables& counts) {
    if (counts.n_states != mle.n_states || counts.n_actions != mle.n_actions)
        throw ValidationError("count tables do not match the MLE model");
}

bool is_bootstrapped(const CountTables& counts, int x, int a, double n_wedge) {
    return counts.count(x, a) < n_wedge;
}

} // namespace

double error_log_term(int n_states, int n_actions, double delta) {
    if (!(delta > 0.0 && delta <= 1.0)) throw ValidationError("delta must lie in (0, 1]");
    return std::log(2.0 * n_states * n_actions) + n_states * std::numbers::ln2 - std::log(delta);
}

ErrorTable error_table(const CountTables& counts, double delta) {
    const double log_term = error_log_term(counts.n_states, counts.n_actions, delta);
    ErrorTable table{counts.n_states, counts.n_actions, std::vector<double>(counts.n_xa.size(), kInf)};
    for (std::size_t i = 0; i < counts.n_xa.size(); ++i)
        if (counts.n_xa[i] > 0.0) table.e[i] = std::sqrt(2.0 / counts.n_xa[i] * log_term);
    return table;
}

Policy train_basic_rl(const FiniteMdp& mle) { return optimal_policy(mle); }

FiniteMdp reward_adjusted_mdp(const FiniteMdp& mle, const CountTables& counts, double kappa) {
    check_shapes(mle, counts);
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw ValidationError("kappa must be finite and >= 0");
    FiniteMdp adjusted = mle;
    double largest = adjusted.r_max;
    for (int x = 0; x < mle.n_states; ++x) {
        if (mle.is_terminal(x)) continue;
        for (int a = 0; a < mle.n_actions; ++a) {
            const double n = counts.count(x, a);
            if (n <= 0.0) continue;
            adjusted.r(x, a) -= kappa / std::sqrt(n);
            largest = std::max(largest, std::abs(adjusted.r(x, a)));
        }
    }
    adjusted.r_max = largest;
    return adjusted;
}

Policy train_ramdp(const FiniteMdp& mle, const CountTables& counts, const RaMdpConfig& cfg) {
    return optimal_policy(reward_adjusted_mdp(mle, counts, cfg.kappa));
}

Policy train_spibb(const FiniteMdp& mle, const CountTables& counts, const Policy& baseline,
                   const SpibbConfig& cfg) {
    check_shapes(mle, baseline);
    check_shapes(mle, counts);
    if (!(cfg.n_wedge >= 0.0)) throw ValidationError("n_wedge must be >= 0");

    std::vector<char> allowed(mle.n_actions);
    auto improve = [&](const QFunction& q) {
        Policy next = baseline;
        for (int x = 0; x < mle.n_states; ++x) {
            auto row = next.row(x);
            double bootstrapped_mass = 0.0;
            bool any_free = false;
            for (int a = 0; a < mle.n_actions; ++a) {
                const bool boot = is_bootstrapped(counts, x, a, cfg.n_wedge);
                allowed[a] = !boot;
                if (boot) {
                    bootstrapped_mass += row[a];
                } else {
                    any_free = true;
                    row[a] = 0.0;
                }
            }
            if (!any_free) continue; // fully constrained: the baseline row
            const int best = greedy_action(q.row(x), allowed);
            row[best] = std::max(0.0, 1.0 - bootstrapped_mass);
        }
        return next;
    };

    Policy pi = baseline;
    for (int it = 0; it < cfg.max_iterations; ++it) {
        Policy next = improve(q_from_v(mle, policy_evaluation_exact(mle, pi)));
        if (next == pi) break;
        pi = std::move(next);
    }
    return pi;
}

std::vector<double> soft_spibb_local_step(std::span<const double> q_row, std::span<const double> e_row,
                                          std::span<const double> baseline_row, double epsilon) {
    const std::size_t n = q_row.size();
    if (e_row.size() != n || baseline_row.size() != n) throw ValidationError("soft_spibb_local_step: row size mismatch");
    if (!(epsilon >= 0.0)) throw ValidationError("epsilon must be >= 0");

    std::vector<double> row(baseline_row.begin(), baseline_row.end());
    std::vector<char> finite(n);
    bool any_finite = false;
    for (std::size_t a = 0; a < n; ++a) {
        finite[a] = std::isfinite(e_row[a]);
        any_finite = any_finite || finite[a];
    }
    if (!any_finite || epsilon == 0.0) return row;

    const int receiver = greedy_action(q_row, finite);
    double budget = epsilon;
    bool moved = false;
    while (budget > 0.0) {
        int donor = -1;
        for (std::size_t a = 0; a < n; ++a) {
            if (!finite[a] || static_cast<int>(a) == receiver || row[a] <= 0.0) continue;
            if (donor < 0 || q_row[a] < q_row[donor] - kTieTolerance) donor = static_cast<int>(a);
        }
        if (donor < 0 || q_row[receiver] - q_row[donor] <= kTieTolerance) break;

        moved = true;
        const double cost = e_row[donor] + e_row[receiver];
        const double affordable = cost > 0.0 ? budget / cost : kInf;
        if (affordable >= row[donor]) {
            const double m = row[donor];
            row[receiver] += m;
            row[donor] = 0.0;
            budget -= m * cost;
        } else {
            row[receiver] += affordable;
            row[donor] -= affordable;
            budget = 0.0;
        }
    }
    if (moved) {
        // Rebuild the receiver from the rest of the row so that the row sums
        // to 1 and a fully drained row is exactly one-hot.
        double others = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            if (static_cast<int>(a) != receiver) others += row[a];
        row[receiver] = std::max(0.0, 1.0 - others);
    }
    return row;
}

Policy train_soft_spibb(const FiniteMdp& mle, const ErrorTable& errors, const Policy& baseline,
                        const SoftSpibbConfig& cfg) {
    check_shapes(mle, baseline);
    if (errors.n_states != mle.n_states || errors.n_actions != mle.n_actions)
        throw ValidationError("error table does not match the MLE model");
    if (!(cfg.epsilon >= 0.0)) throw ValidationError("epsilon must be >= 0");

    auto improve = [&](const QFunction& q) {
        Policy next = baseline;
        for (int x = 0; x < mle.n_states; ++x) {
            if (mle.is_terminal(x)) continue;
            const auto row = soft_spibb_local_step(q.row(x), errors.row(x), baseline.row(x), cfg.epsilon);
            std::copy(row.begin(), row.end(), next.row(x).begin());
        }
        return next;
    };

    Policy pi = baseline;
    for (int it = 0; it < cfg.max_iterations; ++it) {
        Policy next = improve(q_from_v(mle, policy_evaluation_exact(mle, pi)));
        if (next == pi) break;
        pi = std::move(next);
    }
    return pi;
}

bool satisfies_pi_b(const Policy& pi, const Policy& baseline, const CountTables& counts, double n_wedge) {
    if (pi.n_states() != baseline.n_states() || pi.n_actions() != baseline.n_actions()) return false;
    for (int x = 0; x < pi.n_states(); ++x)
        for (int a = 0; a < pi.n_actions(); ++a)
            if (is_bootstrapped(counts, x, a, n_wedge) && pi(x, a) != baseline(x, a)) return false;
    return true;
}

double soft_constraint_cost(std::span<const double> pi_row, std::span<const double> baseline_row,
                            std::span<const double> e_row) {
    double cost = 0.0;
    for (std::size_t a = 0; a < pi_row.size(); ++a)
        if (std::isfinite(e_row[a])) cost += e_row[a] * std::abs(pi_row[a] - baseline_row[a]);
    return cost;
}

} // namespace spibb
