#include "spibb/data.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <string>

#include "spibb/errors.hpp"
#include "spibb/rng.hpp"

namespace spibb {

void Dataset::validate() const {
    int starts = 0;
    for (std::size_t k = 0; k < transitions.size(); ++k) {
        const Transition& tr = transitions[k];
        if (tr.t < 0) throw ValidationError("negative timestep at transition " + std::to_string(k));
        if (tr.t == 0) {
            ++starts;
            continue;
        }
        if (k == 0) throw ValidationError("dataset must start with t = 0");
        const Transition& prev = transitions[k - 1];
        if (tr.t != prev.t + 1 || tr.x != prev.x_next)
            throw ValidationError("broken trajectory chain at transition " + std::to_string(k));
    }
    if (starts != n_trajectories)
        throw ValidationError("n_trajectories (" + std::to_string(n_trajectories) +
                              ") does not match the number of trajectory starts (" + std::to_string(starts) + ")");
}

std::vector<int> Dataset::trajectory_lengths() const {
    std::vector<int> lengths;
    for (const Transition& tr : transitions) {
        if (tr.t == 0 || lengths.empty()) lengths.push_back(0);
        ++lengths.back();
    }
    return lengths;
}

double VisitDistribution::total() const { return std::accumulate(d.begin(), d.end(), 0.0); }

Dataset collect_dataset(const FiniteMdp& mdp, const Policy& pi_b, int n_trajectories, int max_len,
                        std::uint64_t seed) {
    mdp.validate();
    pi_b.validate(1e-9);
    if (pi_b.n_states() != mdp.n_states || pi_b.n_actions() != mdp.n_actions)
        throw ValidationError("collect_dataset: policy shape does not match MDP");
    if (n_trajectories < 1) throw ValidationError("collect_dataset: n_trajectories must be >= 1");
    if (max_len < 1) throw ValidationError("collect_dataset: max_len must be >= 1");
    if (mdp.is_terminal(mdp.initial_state))
        throw ValidationError("collect_dataset: initial state is terminal");

    Dataset ds;
    ds.n_trajectories = n_trajectories;
    for (int i = 0; i < n_trajectories; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        int x = mdp.initial_state;
        for (int t = 0; t < max_len; ++t) {
            const int a = rng.categorical(pi_b.row(x));
            if (mdp.is_sink_row(x, a))
                throw ValidationError("collect_dataset: reached a sink row; cannot sample a successor");
            const int next = rng.categorical(mdp.row(x, a));
            const double r = mdp.entry_reward.empty() ? mdp.r(x, a) : mdp.entry_reward[next];
            ds.transitions.push_back({x, a, r, next, t});
            if (mdp.is_terminal(next)) break;
            x = next;
        }
    }
    return ds;
}

CountTables build_counts(const Dataset& ds, int n_states, int n_actions) {
    if (n_states <= 0 || n_actions <= 0) throw ValidationError("build_counts: sizes must be positive");
    CountTables c;
    c.n_states = n_states;
    c.n_actions = n_actions;
    const std::size_t pairs = static_cast<std::size_t>(n_states) * n_actions;
    c.n_xa.assign(pairs, 0.0);
    c.n_xax.assign(pairs * n_states, 0.0);
    c.n_x.assign(n_states, 0.0);
    c.reward_sum.assign(pairs, 0.0);
    for (const Transition& tr : ds.transitions) {
        if (tr.x < 0 || tr.x >= n_states || tr.x_next < 0 || tr.x_next >= n_states)
            throw ValidationError("build_counts: state index out of range");
        if (tr.a < 0 || tr.a >= n_actions) throw ValidationError("build_counts: action index out of range");
        const std::size_t p = c.pair_index(tr.x, tr.a);
        c.n_xa[p] += 1.0;
        c.n_xax[p * n_states + tr.x_next] += 1.0;
        c.n_x[tr.x] += 1.0;
        c.reward_sum[p] += tr.r;
    }
    return c;
}

FiniteMdp build_mle_mdp(const CountTables& counts, const FiniteMdp& template_mdp) {
    if (counts.n_states != template_mdp.n_states || counts.n_actions != template_mdp.n_actions)
        throw ValidationError("build_mle_mdp: count tables do not match template");
    FiniteMdp mle(counts.n_states, counts.n_actions, template_mdp.gamma);
    mle.initial_state = template_mdp.initial_state;
    mle.terminal_states = template_mdp.terminal_states;
    mle.r_max = template_mdp.r_max;
    mle.v_max = template_mdp.v_max;
    for (int x = 0; x < counts.n_states; ++x) {
        if (mle.is_terminal(x)) continue;
        for (int a = 0; a < counts.n_actions; ++a) {
            const double n = counts.count(x, a);
            if (n <= 0.0) continue; // sink row, zero reward
            auto row = mle.row(x, a);
            for (int y = 0; y < counts.n_states; ++y) row[y] = counts.count(x, a, y) / n;
            mle.r(x, a) = counts.reward_sum[counts.pair_index(x, a)] / n;
        }
    }
    return mle;
}

VisitDistribution empirical_visit_distribution(const Dataset& ds, int n_states, int n_actions, double gamma) {
    if (ds.n_trajectories <= 0) throw ValidationError("empirical_visit_distribution: dataset has no trajectories");
    VisitDistribution out{n_states, n_actions, std::vector<double>(static_cast<std::size_t>(n_states) * n_actions, 0.0)};
    for (const Transition& tr : ds.transitions) {
        if (tr.x < 0 || tr.x >= n_states || tr.a < 0 || tr.a >= n_actions)
            throw ValidationError("empirical_visit_distribution: index out of range");
        out.d[static_cast<std::size_t>(tr.x) * n_actions + tr.a] += std::pow(gamma, tr.t);
    }
    for (double& v : out.d) v /= ds.n_trajectories;
    return out;
}

VisitDistribution analytic_visit_distribution(const FiniteMdp& mdp, const Policy& pi) {
    mdp.validate();
    pi.validate(1e-9);
    if (pi.n_states() != mdp.n_states || pi.n_actions() != mdp.n_actions)
        throw ValidationError("analytic_visit_distribution: policy shape does not match MDP");
    const int n = mdp.n_states;
    VisitDistribution out{n, mdp.n_actions, std::vector<double>(static_cast<std::size_t>(n) * mdp.n_actions, 0.0)};
    if (mdp.is_terminal(mdp.initial_state)) return out;

    // mu = e_init + gamma P_pi^T mu over non-terminal states.
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(mdp.initial_state) = 1.0;
    for (int x = 0; x < n; ++x) {
        if (mdp.is_terminal(x)) continue;
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double w = pi(x, a);
            if (w == 0.0) continue;
            const auto row = mdp.row(x, a);
            for (int y = 0; y < n; ++y)
                if (row[y] != 0.0 && !mdp.is_terminal(y)) system(y, x) -= mdp.gamma * w * row[y];
        }
    }
    const Eigen::VectorXd mu = system.partialPivLu().solve(rhs);
    for (int x = 0; x < n; ++x) {
        if (mdp.is_terminal(x)) continue;
        for (int a = 0; a < mdp.n_actions; ++a)
            out.d[static_cast<std::size_t>(x) * mdp.n_actions + a] = mu(x) * pi(x, a);
    }
    return out;
}

double rescaled_l1_distance(const VisitDistribution& lhs, const VisitDistribution& rhs, double gamma) {
    if (lhs.d.size() != rhs.d.size()) throw ValidationError("rescaled_l1_distance: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < lhs.d.size(); ++i) s += std::abs(lhs.d[i] - rhs.d[i]);
    return (1.0 - gamma) * s;
}

} // namespace spibb
