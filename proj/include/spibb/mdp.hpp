#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spibb {

/// Finite discounted MDP with a deterministic initial state.
///
/// Transitions are stored densely as [state][action][next_state]. A row that
/// is entirely zero is a *sink row*: taking that action leaves the MDP into an
/// implicit absorbing zero-reward state. The MLE model uses sink rows for
/// state-action pairs that never appear in the data, so their continuation
/// value is zero. Rows of terminal states are ignored by every solver.
///
/// `entry_reward`, when non-empty, holds the reward paid for entering each
/// state; sampled rewards are then `entry_reward[x']` and `reward(x, a)` is
/// its expectation under the transition row. When empty, the sampled reward
/// is `reward(x, a)` itself.
struct FiniteMdp {
    int n_states = 0;
    int n_actions = 0;
    double gamma = 0.0;
    int initial_state = 0;
    std::vector<int> terminal_states; // sorted, unique
    std::vector<double> transition;   // n_states * n_actions * n_states
    std::vector<double> reward;       // n_states * n_actions
    std::vector<double> entry_reward; // empty or n_states
    double r_max = 1.0;
    double v_max = 1.0;

    FiniteMdp() = default;
    FiniteMdp(int states, int actions, double discount);

    std::size_t pair_index(int x, int a) const {
        return static_cast<std::size_t>(x) * n_actions + a;
    }
    double& p(int x, int a, int next) {
        return transition[pair_index(x, a) * n_states + next];
    }
    double p(int x, int a, int next) const {
        return transition[pair_index(x, a) * n_states + next];
    }
    std::span<double> row(int x, int a) {
        return {transition.data() + pair_index(x, a) * n_states, static_cast<std::size_t>(n_states)};
    }
    std::span<const double> row(int x, int a) const {
        return {transition.data() + pair_index(x, a) * n_states, static_cast<std::size_t>(n_states)};
    }
    double& r(int x, int a) { return reward[pair_index(x, a)]; }
    double r(int x, int a) const { return reward[pair_index(x, a)]; }

    bool is_terminal(int x) const;
    void set_terminal(std::vector<int> states);

    /// True for an all-zero transition row on a non-terminal state.
    bool is_sink_row(int x, int a) const;

    /// Throws ValidationError unless every documented invariant holds.
    void validate() const;
};

/// Stochastic policy: one probability vector over actions per state.
class Policy {
public:
    Policy() = default;
    Policy(int n_states, int n_actions);

    static Policy uniform(int n_states, int n_actions);
    static Policy deterministic(std::span<const int> actions, int n_actions);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }

    double operator()(int x, int a) const { return probs_[index(x, a)]; }
    double& operator()(int x, int a) { return probs_[index(x, a)]; }

    std::span<const double> row(int x) const {
        return {probs_.data() + index(x, 0), static_cast<std::size_t>(n_actions_)};
    }
    std::span<double> row(int x) {
        return {probs_.data() + index(x, 0), static_cast<std::size_t>(n_actions_)};
    }
    const std::vector<double>& probs() const { return probs_; }

    /// Throws ValidationError unless rows are non-negative and sum to 1 within `tol`.
    void validate(double tol = 1e-12) const;

    bool operator==(const Policy&) const = default;

private:
    std::size_t index(int x, int a) const { return static_cast<std::size_t>(x) * n_actions_ + a; }

    int n_states_ = 0;
    int n_actions_ = 0;
    std::vector<double> probs_;
};

using ValueFunction = std::vector<double>;

/// Action values, [state][action].
struct QFunction {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> q;

    double operator()(int x, int a) const { return q[static_cast<std::size_t>(x) * n_actions + a]; }
    double& operator()(int x, int a) { return q[static_cast<std::size_t>(x) * n_actions + a]; }
    std::span<const double> row(int x) const {
        return {q.data() + static_cast<std::size_t>(x) * n_actions, static_cast<std::size_t>(n_actions)};
    }
};

struct ValueIterationResult {
    ValueFunction v;
    Policy policy;
    int iterations = 0;
};

/// Absolute gap under which two action values count as tied. Ties resolve
/// to the lowest action index.
inline constexpr double kTieTolerance = 1e-10;

/// Lowest action index whose value is within kTieTolerance of the row maximum.
/// Actions with `allowed[a] == 0` are skipped; returns -1 if none is allowed.
int greedy_action(std::span<const double> q_row, std::span<const char> allowed = {});

/// Optimal values by synchronous value iteration, stopping when the sup-norm
/// change falls to `tol`; returns the greedy policy of the final values.
ValueIterationResult value_iteration(const FiniteMdp& mdp, double tol = 1e-9,
                                     int max_iterations = 1'000'000);

/// Exact values of `pi`: dense solve of (I - gamma P_pi) V = R_pi.
ValueFunction policy_evaluation_exact(const FiniteMdp& mdp, const Policy& pi);

/// rho(pi, M): the exact value at the initial state.
double performance(const FiniteMdp& mdp, const Policy& pi);

/// Q(x, a) = R(x, a) + gamma * sum_x' P(x'|x, a) V(x'); terminal rows are Q = R.
QFunction q_from_v(const FiniteMdp& mdp, const ValueFunction& v);

/// Greedy policy of `q`, one-hot, lowest index on ties.
Policy greedy_policy(const QFunction& q);

/// Optimal deterministic policy: value iteration, then exact greedy
/// refinement until the greedy policy is a fixed point of its own exact
/// action values. The result does not depend on VI round-off in near-ties.
Policy optimal_policy(const FiniteMdp& mdp, double tol = 1e-9);

} // namespace spibb
