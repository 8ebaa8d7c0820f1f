#pragma once

#include <cstdint>

#include "spibb/mdp.hpp"

namespace spibb {

/// Safety slack of a policy trained with an estimated baseline.
/// zeta_hat = zeta + estimation_penalty, delta_hat = delta + 2 delta_prime.
struct BoundReport {
    double zeta = 0.0;
    double zeta_hat = 0.0;
    double delta = 0.0;
    double delta_prime = 0.0;
    double delta_hat = 0.0;
    double estimation_penalty = 0.0;
};

/// Improvement slack of Pi_b-SPIBB with a known baseline:
/// 4 V_max / (1 - gamma) * sqrt(2 / n_wedge * log(2 |X| |A| 2^|X| / delta))
///   - rho(pi*_b, M_hat) + rho(pi_b, M_hat).
/// Returns +infinity when n_wedge == 0.
double theorem1_zeta(double n_wedge, int n_states, int n_actions, double gamma, double v_max, double delta,
                     double rho_pistar_mle, double rho_baseline_mle);

/// Additive cost of replacing the baseline by its MLE estimate:
/// 2 R_max / (1 - gamma) * sqrt((3 |X| |A| + 4 log(1 / delta')) / (2 N)).
double baseline_estimation_penalty(double r_max, double gamma, int n_states, int n_actions, int n_trajectories,
                                   double delta_prime);

/// Combines a known-baseline guarantee (zeta, delta) with the estimation penalty.
BoundReport theorem2_zeta_hat(double zeta, double delta, double r_max, double gamma, int n_states, int n_actions,
                              int n_trajectories, double delta_prime);

/// True when zeta_hat exceeds 2 V_max / (1 - gamma), i.e. the bound says nothing.
bool is_vacuous(const BoundReport& report, double v_max, double gamma);

/// (2^(|X||A|) - 2) exp(-N eps^2 / 2), clipped to [0, 1].
double lemma1_bound(int n_states, int n_actions, int n_trajectories, double eps);

struct Lemma1Check {
    double empirical_prob = 0.0; // fraction of resampled datasets whose deviation reached eps
    double bound = 0.0;
    double truncation_residue = 0.0; // gamma^max_len, in rescaled units
    double max_deviation = 0.0;
    int n_resamples = 0;
};

/// Monte Carlo check of the visit-distribution concentration bound: draws
/// `n_resamples` datasets of `n_trajectories` trajectories under `pi_b`, and
/// counts how often (1 - gamma) || d_analytic - d_D ||_1 >= eps. Truncated
/// trajectories can inflate the deviation by at most gamma^max_len, which is
/// subtracted before the comparison. Independent of `workers`.
Lemma1Check lemma1_monte_carlo_check(const FiniteMdp& mdp, const Policy& pi_b, int n_trajectories, double eps,
                                     int n_resamples, std::uint64_t seed, int max_len = 1000, int workers = 1);

} // namespace spibb
