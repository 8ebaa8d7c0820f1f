#include "spibb/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spibb/algorithms.hpp"
#include "spibb/data.hpp"
#include "spibb/errors.hpp"
#include "spibb/parallel.hpp"
#include "spibb/rng.hpp"

namespace spibb {

namespace {

void check_discount(double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("gamma must lie in [0, 1)");
}

} // namespace

double theorem1_zeta(double n_wedge, int n_states, int n_actions, double gamma, double v_max, double delta,
                     double rho_pistar_mle, double rho_baseline_mle) {
    check_discount(gamma);
    if (!(n_wedge >= 0.0)) throw ValidationError("n_wedge must be >= 0");
    if (n_wedge == 0.0) return std::numeric_limits<double>::infinity();
    const double radical = std::sqrt(2.0 / n_wedge * error_log_term(n_states, n_actions, delta));
    return 4.0 * v_max / (1.0 - gamma) * radical - rho_pistar_mle + rho_baseline_mle;
}

double baseline_estimation_penalty(double r_max, double gamma, int n_states, int n_actions, int n_trajectories,
                                   double delta_prime) {
    check_discount(gamma);
    if (n_trajectories <= 0) throw ValidationError("number of trajectories must be positive");
    if (!(delta_prime > 0.0 && delta_prime <= 1.0)) throw ValidationError("delta_prime must lie in (0, 1]");
    const double numerator = 3.0 * n_states * n_actions + 4.0 * std::log(1.0 / delta_prime);
    return 2.0 * r_max / (1.0 - gamma) * std::sqrt(numerator / (2.0 * n_trajectories));
}

BoundReport theorem2_zeta_hat(double zeta, double delta, double r_max, double gamma, int n_states, int n_actions,
                              int n_trajectories, double delta_prime) {
    BoundReport report;
    report.zeta = zeta;
    report.delta = delta;
    report.delta_prime = delta_prime;
    report.estimation_penalty =
        baseline_estimation_penalty(r_max, gamma, n_states, n_actions, n_trajectories, delta_prime);
    report.zeta_hat = zeta + report.estimation_penalty;
    report.delta_hat = delta + 2.0 * delta_prime;
    return report;
}

bool is_vacuous(const BoundReport& report, double v_max, double gamma) {
    return report.zeta_hat > 2.0 * v_max / (1.0 - gamma);
}

double lemma1_bound(int n_states, int n_actions, int n_trajectories, double eps) {
    if (n_states <= 0 || n_actions <= 0) throw ValidationError("sizes must be positive");
    if (n_trajectories < 0 || !(eps >= 0.0)) throw ValidationError("N and eps must be non-negative");
    // (2^k - 2) e^{-x} computed in log space; 2^k overflows quickly.
    const double k = static_cast<double>(n_states) * n_actions;
    const double exponent = -static_cast<double>(n_trajectories) * eps * eps / 2.0;
    if (k <= 1.0) return 0.0; // 2^1 - 2 = 0 subsets to union over
    const double log_subsets = k * std::log(2.0) + std::log1p(-std::exp2(1.0 - k));
    const double log_bound = log_subsets + exponent;
    if (log_bound >= 0.0) return 1.0;
    return std::clamp(std::exp(log_bound), 0.0, 1.0);
}

Lemma1Check lemma1_monte_carlo_check(const FiniteMdp& mdp, const Policy& pi_b, int n_trajectories, double eps,
                                     int n_resamples, std::uint64_t seed, int max_len, int workers) {
    if (n_resamples <= 0) throw ValidationError("n_resamples must be positive");
    const VisitDistribution analytic = analytic_visit_distribution(mdp, pi_b);
    const double residue = std::pow(mdp.gamma, max_len);

    std::vector<double> deviations(n_resamples);
    parallel_for(static_cast<std::size_t>(n_resamples), workers, [&](std::size_t i) {
        const Dataset ds = collect_dataset(mdp, pi_b, n_trajectories, max_len, derive_seed(seed, i));
        const VisitDistribution empirical =
            empirical_visit_distribution(ds, mdp.n_states, mdp.n_actions, mdp.gamma);
        deviations[i] = rescaled_l1_distance(analytic, empirical, mdp.gamma);
    });

    Lemma1Check out;
    out.n_resamples = n_resamples;
    out.truncation_residue = residue;
    out.bound = lemma1_bound(mdp.n_states, mdp.n_actions, n_trajectories, eps);
    int exceed = 0;
    for (double dev : deviations) {
        out.max_deviation = std::max(out.max_deviation, dev);
        if (dev - residue >= eps) ++exceed;
    }
    out.empirical_prob = static_cast<double>(exceed) / n_resamples;
    return out;
}

} // namespace spibb
