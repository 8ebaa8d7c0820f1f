#pragma once

#include <cstdint>
#include <vector>

#include "spibb/mdp.hpp"

namespace spibb {

/// One logged step. `t` is the within-trajectory timestep; t == 0 starts a trajectory.
struct Transition {
    int x = 0;
    int a = 0;
    double r = 0.0;
    int x_next = 0;
    int t = 0;

    bool operator==(const Transition&) const = default;
};

struct Dataset {
    std::vector<Transition> transitions;
    int n_trajectories = 0;

    /// Checks trajectory structure: t == 0 exactly at starts, chained states
    /// and consecutive timesteps inside a trajectory, and the trajectory count.
    void validate() const;

    /// Lengths (in transitions) of every trajectory, in order.
    std::vector<int> trajectory_lengths() const;

    bool operator==(const Dataset&) const = default;
};

/// Tallies derived from a Dataset.
struct CountTables {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> n_xa;       // counts are integral but stored as double for the arithmetic downstream
    std::vector<double> n_xax;      // [x][a][x']
    std::vector<double> n_x;
    std::vector<double> reward_sum; // [x][a]

    std::size_t pair_index(int x, int a) const { return static_cast<std::size_t>(x) * n_actions + a; }
    double count(int x, int a) const { return n_xa[pair_index(x, a)]; }
    double count(int x, int a, int next) const { return n_xax[pair_index(x, a) * n_states + next]; }
    double count(int x) const { return n_x[x]; }
};

/// Discounted state-action visits, [state][action].
struct VisitDistribution {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> d;

    double operator()(int x, int a) const { return d[static_cast<std::size_t>(x) * n_actions + a]; }
    double total() const;
};

inline constexpr int kDefaultMaxTrajectoryLength = 1000;

/// Rolls out `n_trajectories` episodes of `pi_b` from the initial state. An
/// episode ends on entering a terminal state, on a sink row, or after
/// `max_len` steps. Deterministic in `seed`; each trajectory draws from its
/// own derived stream.
Dataset collect_dataset(const FiniteMdp& mdp, const Policy& pi_b, int n_trajectories,
                        int max_len, std::uint64_t seed);

CountTables build_counts(const Dataset& ds, int n_states, int n_actions);

/// Maximum-likelihood model. Pairs never observed get a sink row and zero
/// reward, so their action value is 0. Terminal set, discount, initial state
/// and reward scale come from `template_mdp`.
FiniteMdp build_mle_mdp(const CountTables& counts, const FiniteMdp& template_mdp);

/// d_D(x, a) = (1/N) sum_i sum_t gamma^t 1[(x_t, a_t) = (x, a)].
VisitDistribution empirical_visit_distribution(const Dataset& ds, int n_states, int n_actions,
                                               double gamma);

/// Exact discounted occupancy of `pi` from the initial state, solved as a
/// linear system. Mass entering a terminal state or a sink row leaves.
VisitDistribution analytic_visit_distribution(const FiniteMdp& mdp, const Policy& pi);

/// (1 - gamma) * || lhs - rhs ||_1.
double rescaled_l1_distance(const VisitDistribution& lhs, const VisitDistribution& rhs, double gamma);

} // namespace spibb
