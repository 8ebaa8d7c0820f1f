#include "spibb/mdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spibb/errors.hpp"

namespace spibb {

namespace {

bool finite(double v) { return std::isfinite(v); }

/// Non-zero successors of each state-action pair, for the iterative sweeps.
struct SparseRows {
    std::vector<std::size_t> offsets;
    std::vector<int> next;
    std::vector<double> prob;

    explicit SparseRows(const FiniteMdp& mdp) {
        const std::size_t pairs = static_cast<std::size_t>(mdp.n_states) * mdp.n_actions;
        offsets.reserve(pairs + 1);
        offsets.push_back(0);
        for (int x = 0; x < mdp.n_states; ++x) {
            for (int a = 0; a < mdp.n_actions; ++a) {
                const auto row = mdp.row(x, a);
                for (int y = 0; y < mdp.n_states; ++y) {
                    if (row[y] != 0.0) {
                        next.push_back(y);
                        prob.push_back(row[y]);
                    }
                }
                offsets.push_back(next.size());
            }
        }
    }

    double expect(std::size_t pair, const ValueFunction& v) const {
        double s = 0.0;
        for (std::size_t k = offsets[pair]; k < offsets[pair + 1]; ++k) s += prob[k] * v[next[k]];
        return s;
    }
};

void check_policy_shape(const FiniteMdp& mdp, const Policy& pi) {
    if (pi.n_states() != mdp.n_states || pi.n_actions() != mdp.n_actions)
        throw ValidationError("policy shape does not match MDP");
}

} // namespace

FiniteMdp::FiniteMdp(int states, int actions, double discount)
    : n_states(states), n_actions(actions), gamma(discount),
      transition(static_cast<std::size_t>(states) * actions * states, 0.0),
      reward(static_cast<std::size_t>(states) * actions, 0.0) {
    if (states <= 0 || actions <= 0) throw ValidationError("FiniteMdp: sizes must be positive");
}

bool FiniteMdp::is_terminal(int x) const {
    return std::binary_search(terminal_states.begin(), terminal_states.end(), x);
}

void FiniteMdp::set_terminal(std::vector<int> states) {
    std::sort(states.begin(), states.end());
    states.erase(std::unique(states.begin(), states.end()), states.end());
    terminal_states = std::move(states);
}

bool FiniteMdp::is_sink_row(int x, int a) const {
    if (is_terminal(x)) return false;
    const auto rw = row(x, a);
    return std::all_of(rw.begin(), rw.end(), [](double p) { return p == 0.0; });
}

void FiniteMdp::validate() const {
    if (n_states <= 0 || n_actions <= 0) throw ValidationError("MDP sizes must be positive");
    const std::size_t pairs = static_cast<std::size_t>(n_states) * n_actions;
    if (transition.size() != pairs * n_states) throw ValidationError("transition tensor has wrong size");
    if (reward.size() != pairs) throw ValidationError("reward table has wrong size");
    if (!entry_reward.empty() && entry_reward.size() != static_cast<std::size_t>(n_states))
        throw ValidationError("entry_reward has wrong size");
    if (!finite(gamma) || gamma < 0.0 || gamma >= 1.0) throw ValidationError("gamma must lie in [0, 1)");
    if (initial_state < 0 || initial_state >= n_states) throw ValidationError("initial_state out of range");
    for (int t : terminal_states)
        if (t < 0 || t >= n_states) throw ValidationError("terminal state out of range");
    if (!std::is_sorted(terminal_states.begin(), terminal_states.end()))
        throw ValidationError("terminal states must be sorted");
    if (!finite(r_max) || r_max <= 0.0) throw ValidationError("r_max must be positive");
    if (!finite(v_max) || v_max <= 0.0) throw ValidationError("v_max must be positive");
    if (v_max > r_max / (1.0 - gamma) * (1.0 + 1e-12)) throw ValidationError("v_max exceeds r_max / (1 - gamma)");
    for (double e : entry_reward)
        if (!finite(e) || std::abs(e) > r_max) throw ValidationError("entry reward outside [-r_max, r_max]");

    for (int x = 0; x < n_states; ++x) {
        for (int a = 0; a < n_actions; ++a) {
            const double rr = r(x, a);
            if (!finite(rr)) throw ValidationError("non-finite reward");
            if (std::abs(rr) > r_max * (1.0 + 1e-12))
                throw ValidationError("reward outside [-r_max, r_max] at state " + std::to_string(x));
            double sum = 0.0;
            for (double p : row(x, a)) {
                if (!finite(p) || p < 0.0) throw ValidationError("transition probabilities must be finite and >= 0");
                sum += p;
            }
            if (is_terminal(x)) continue;
            if (sum != 0.0 && std::abs(sum - 1.0) > 1e-12)
                throw ValidationError("transition row (" + std::to_string(x) + ", " + std::to_string(a) +
                                      ") does not sum to 1");
        }
    }
}

Policy::Policy(int n_states, int n_actions)
    : n_states_(n_states), n_actions_(n_actions),
      probs_(static_cast<std::size_t>(n_states) * n_actions, 0.0) {
    if (n_states <= 0 || n_actions <= 0) throw ValidationError("Policy: sizes must be positive");
}

Policy Policy::uniform(int n_states, int n_actions) {
    Policy pi(n_states, n_actions);
    std::fill(pi.probs_.begin(), pi.probs_.end(), 1.0 / n_actions);
    return pi;
}

Policy Policy::deterministic(std::span<const int> actions, int n_actions) {
    Policy pi(static_cast<int>(actions.size()), n_actions);
    for (int x = 0; x < pi.n_states_; ++x) {
        if (actions[x] < 0 || actions[x] >= n_actions) throw ValidationError("action index out of range");
        pi(x, actions[x]) = 1.0;
    }
    return pi;
}

void Policy::validate(double tol) const {
    if (probs_.size() != static_cast<std::size_t>(n_states_) * n_actions_)
        throw ValidationError("policy table has wrong size");
    for (int x = 0; x < n_states_; ++x) {
        double sum = 0.0;
        for (double p : row(x)) {
            if (!std::isfinite(p) || p < 0.0) throw ValidationError("policy probabilities must be finite and >= 0");
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol)
            throw ValidationError("policy row " + std::to_string(x) + " does not sum to 1");
    }
}

int greedy_action(std::span<const double> q_row, std::span<const char> allowed) {
    double best = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t a = 0; a < q_row.size(); ++a) {
        if (!allowed.empty() && !allowed[a]) continue;
        any = true;
        best = std::max(best, q_row[a]);
    }
    if (!any) return -1;
    for (std::size_t a = 0; a < q_row.size(); ++a) {
        if (!allowed.empty() && !allowed[a]) continue;
        if (q_row[a] >= best - kTieTolerance) return static_cast<int>(a);
    }
    return -1;
}

ValueIterationResult value_iteration(const FiniteMdp& mdp, double tol, int max_iterations) {
    mdp.validate();
    if (!(tol > 0.0)) throw ValidationError("value_iteration: tol must be positive");
    const SparseRows rows(mdp);
    ValueFunction v(mdp.n_states, 0.0);
    ValueFunction next(mdp.n_states, 0.0);
    int it = 0;
    while (it < max_iterations) {
        ++it;
        double change = 0.0;
        for (int x = 0; x < mdp.n_states; ++x) {
            if (mdp.is_terminal(x)) {
                next[x] = 0.0;
                continue;
            }
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < mdp.n_actions; ++a)
                best = std::max(best, mdp.r(x, a) + mdp.gamma * rows.expect(mdp.pair_index(x, a), v));
            change = std::max(change, std::abs(best - v[x]));
            next[x] = best;
        }
        v.swap(next);
        if (change <= tol) break;
    }
    ValueIterationResult out{v, greedy_policy(q_from_v(mdp, v)), it};
    return out;
}

ValueFunction policy_evaluation_exact(const FiniteMdp& mdp, const Policy& pi) {
    mdp.validate();
    check_policy_shape(mdp, pi);
    pi.validate(1e-9);
    const int n = mdp.n_states;
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (int x = 0; x < n; ++x) {
        if (mdp.is_terminal(x)) continue;
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double w = pi(x, a);
            if (w == 0.0) continue;
            rhs(x) += w * mdp.r(x, a);
            const auto row = mdp.row(x, a);
            for (int y = 0; y < n; ++y) {
                if (row[y] != 0.0 && !mdp.is_terminal(y)) system(x, y) -= mdp.gamma * w * row[y];
            }
        }
    }
    const Eigen::VectorXd sol = system.partialPivLu().solve(rhs);
    ValueFunction v(sol.data(), sol.data() + n);
    for (double value : v)
        if (!std::isfinite(value)) throw InvariantError("policy evaluation produced a non-finite value");
    return v;
}

double performance(const FiniteMdp& mdp, const Policy& pi) {
    return policy_evaluation_exact(mdp, pi)[mdp.initial_state];
}

QFunction q_from_v(const FiniteMdp& mdp, const ValueFunction& v) {
    if (v.size() != static_cast<std::size_t>(mdp.n_states)) throw ValidationError("q_from_v: value vector has wrong size");
    QFunction q{mdp.n_states, mdp.n_actions, std::vector<double>(mdp.reward)};
    for (int x = 0; x < mdp.n_states; ++x) {
        if (mdp.is_terminal(x)) continue;
        for (int a = 0; a < mdp.n_actions; ++a) {
            const auto row = mdp.row(x, a);
            double s = 0.0;
            for (int y = 0; y < mdp.n_states; ++y)
                if (row[y] != 0.0) s += row[y] * v[y];
            q(x, a) += mdp.gamma * s;
        }
    }
    return q;
}

Policy greedy_policy(const QFunction& q) {
    std::vector<int> actions(q.n_states);
    for (int x = 0; x < q.n_states; ++x) actions[x] = greedy_action(q.row(x));
    return Policy::deterministic(actions, q.n_actions);
}

Policy optimal_policy(const FiniteMdp& mdp, double tol) {
    Policy pi = value_iteration(mdp, tol).policy;
    // Policy iteration from a near-optimal start; converges in a step or two.
    for (int it = 0; it < 1000; ++it) {
        Policy next = greedy_policy(q_from_v(mdp, policy_evaluation_exact(mdp, pi)));
        if (next == pi) break;
        pi = std::move(next);
    }
    return pi;
}

} // namespace spibb
