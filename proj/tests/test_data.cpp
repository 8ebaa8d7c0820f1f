#include <doctest.h>

#include <cmath>
#include <vector>

#include "spibb/data.hpp"
#include "spibb/errors.hpp"
#include "test_support.hpp"

using namespace spibb;
using spibb::testing::random_dense_mdp;
using spibb::testing::random_goal_mdp;
using spibb::testing::random_policy;

namespace {

// Three transitions from (x0, a0): two to x1, one to x2.
Dataset small_dataset() {
    Dataset ds;
    ds.transitions = {{0, 0, 1.0, 1, 0}, {0, 0, 1.0, 1, 0}, {0, 0, 0.0, 2, 0}};
    ds.n_trajectories = 3;
    return ds;
}

FiniteMdp deterministic_cycle() {
    FiniteMdp mdp(3, 2, 0.9);
    for (int x = 0; x < 3; ++x) {
        mdp.p(x, 0, (x + 1) % 3) = 1.0;
        mdp.p(x, 1, x) = 1.0;
        mdp.r(x, 0) = 0.5;
    }
    mdp.v_max = 1.0;
    return mdp;
}

} // namespace

TEST_CASE("deterministic MDP and policy give identical trajectories") {
    const FiniteMdp mdp = deterministic_cycle();
    const std::vector<int> actions{0, 0, 0};
    const Dataset ds = collect_dataset(mdp, Policy::deterministic(actions, 2), 5, 7, 1);
    ds.validate();
    REQUIRE(ds.transitions.size() == 35);
    for (int i = 1; i < 5; ++i)
        for (int t = 0; t < 7; ++t) CHECK(ds.transitions[i * 7 + t] == ds.transitions[t]);
}

TEST_CASE("every trajectory starts at the initial state with t = 0") {
    Rng rng(1);
    FiniteMdp mdp = random_goal_mdp(6, 3, 0.95, rng);
    mdp.initial_state = 2;
    const Dataset ds = collect_dataset(mdp, random_policy(6, 3, rng), 200, 1000, 9);
    ds.validate();
    int starts = 0;
    for (std::size_t k = 0; k < ds.transitions.size(); ++k) {
        const bool begins = k == 0 || ds.transitions[k].t == 0;
        if (begins) {
            ++starts;
            CHECK(ds.transitions[k].x == 2);
            CHECK(ds.transitions[k].t == 0);
        }
    }
    CHECK(starts == 200);
    // Trajectories end on entering the terminal goal.
    for (std::size_t k = 0; k < ds.transitions.size(); ++k) {
        const bool last = k + 1 == ds.transitions.size() || ds.transitions[k + 1].t == 0;
        if (!last) CHECK_FALSE(mdp.is_terminal(ds.transitions[k].x_next));
    }
}

TEST_CASE("initial-state action frequencies pass a chi-square test at the 1% level") {
    Rng rng(2);
    const FiniteMdp mdp = random_dense_mdp(4, 4, 0.9, rng);
    Policy pi = Policy::uniform(4, 4);
    const double target[4] = {0.1, 0.2, 0.3, 0.4};
    for (int a = 0; a < 4; ++a) pi(0, a) = target[a];
    const int n = 10000;
    const Dataset ds = collect_dataset(mdp, pi, n, 1, 77);
    std::vector<int> hits(4, 0);
    for (const Transition& tr : ds.transitions) ++hits[tr.a];
    double chi2 = 0.0;
    for (int a = 0; a < 4; ++a) chi2 += (hits[a] - n * target[a]) * (hits[a] - n * target[a]) / (n * target[a]);
    CHECK(chi2 < 11.345); // chi-square(3) critical value at 1%
}

TEST_CASE("collection is deterministic in the seed") {
    Rng rng(3);
    const FiniteMdp mdp = random_goal_mdp(8, 3, 0.95, rng);
    const Policy pi = random_policy(8, 3, rng);
    CHECK(collect_dataset(mdp, pi, 50, 1000, 5) == collect_dataset(mdp, pi, 50, 1000, 5));
    CHECK_FALSE(collect_dataset(mdp, pi, 50, 1000, 5) == collect_dataset(mdp, pi, 50, 1000, 6));
    // Prefixes agree: trajectory i depends only on (seed, i).
    const Dataset small = collect_dataset(mdp, pi, 10, 1000, 5);
    const Dataset large = collect_dataset(mdp, pi, 20, 1000, 5);
    for (std::size_t k = 0; k < small.transitions.size(); ++k) CHECK(small.transitions[k] == large.transitions[k]);
}

TEST_CASE("collection rejects bad inputs") {
    const FiniteMdp mdp = deterministic_cycle();
    const Policy pi = Policy::uniform(3, 2);
    CHECK_THROWS_AS(collect_dataset(mdp, pi, 0, 10, 1), ValidationError);
    CHECK_THROWS_AS(collect_dataset(mdp, pi, 1, 0, 1), ValidationError);
    CHECK_THROWS_AS(collect_dataset(mdp, Policy::uniform(2, 2), 1, 10, 1), ValidationError);
}

TEST_CASE("dataset validation catches broken structure") {
    Dataset ds;
    ds.transitions = {{0, 0, 0.0, 1, 0}, {2, 0, 0.0, 1, 1}};
    ds.n_trajectories = 1;
    CHECK_THROWS_AS(ds.validate(), ValidationError);
    ds.transitions[1].x = 1;
    CHECK_NOTHROW(ds.validate());
    ds.transitions[1].t = 2;
    CHECK_THROWS_AS(ds.validate(), ValidationError);
    ds.transitions[1].t = 1;
    ds.n_trajectories = 2;
    CHECK_THROWS_AS(ds.validate(), ValidationError);
}

TEST_CASE("counts: empty dataset and the (2, 1) example") {
    const CountTables empty = build_counts(Dataset{}, 3, 2);
    for (double v : empty.n_xa) CHECK(v == 0.0);
    for (double v : empty.n_xax) CHECK(v == 0.0);
    for (double v : empty.n_x) CHECK(v == 0.0);

    const CountTables c = build_counts(small_dataset(), 3, 2);
    CHECK(c.count(0, 0) == 3.0);
    CHECK(c.count(0, 0, 1) == 2.0);
    CHECK(c.count(0, 0, 2) == 1.0);
    CHECK(c.count(0) == 3.0);
    CHECK(c.reward_sum[c.pair_index(0, 0)] == 2.0);

    Dataset bad = small_dataset();
    bad.transitions[0].a = 5;
    CHECK_THROWS_AS(build_counts(bad, 3, 2), ValidationError);
    bad.transitions[0].a = 0;
    bad.transitions[0].x_next = 3;
    CHECK_THROWS_AS(build_counts(bad, 3, 2), ValidationError);
}

TEST_CASE("count tables are consistent with an independent recount") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(500 + seed);
        const FiniteMdp mdp = random_goal_mdp(7, 3, 0.9, rng);
        const Dataset ds = collect_dataset(mdp, random_policy(7, 3, rng), 30, 1000, seed);
        const CountTables c = build_counts(ds, 7, 3);
        for (int x = 0; x < 7; ++x) {
            double row_total = 0.0;
            for (int a = 0; a < 3; ++a) {
                double succ_total = 0.0;
                for (int y = 0; y < 7; ++y) succ_total += c.count(x, a, y);
                CHECK(succ_total == c.count(x, a));
                row_total += c.count(x, a);
                int recount = 0;
                for (const Transition& tr : ds.transitions) recount += tr.x == x && tr.a == a;
                CHECK(recount == c.count(x, a));
            }
            CHECK(row_total == c.count(x));
        }
    }
}

TEST_CASE("MLE model: count ratios, mean rewards, sink rows for unseen pairs") {
    FiniteMdp tmpl(3, 2, 0.9);
    tmpl.set_terminal({2});
    const FiniteMdp mle = build_mle_mdp(build_counts(small_dataset(), 3, 2), tmpl);
    CHECK(mle.p(0, 0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(mle.p(0, 0, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(mle.r(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(mle.is_sink_row(0, 1));
    CHECK(mle.r(0, 1) == 0.0);
    CHECK(mle.is_sink_row(1, 0));
    CHECK(mle.terminal_states == tmpl.terminal_states);
    CHECK_NOTHROW(mle.validate());
}

TEST_CASE("MLE rows of visited pairs sum to 1") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(600 + seed);
        const FiniteMdp mdp = random_goal_mdp(9, 3, 0.9, rng);
        const FiniteMdp mle =
            build_mle_mdp(build_counts(collect_dataset(mdp, random_policy(9, 3, rng), 20, 1000, seed), 9, 3), mdp);
        for (int x = 0; x < 9; ++x) {
            for (int a = 0; a < 3; ++a) {
                if (mle.is_terminal(x) || mle.is_sink_row(x, a)) continue;
                double s = 0.0;
                for (double p : mle.row(x, a)) s += p;
                CHECK(std::abs(s - 1.0) <= 1e-12);
            }
        }
    }
}

TEST_CASE("MLE transitions converge to the true ones (1e5 samples)") {
    Rng rng(7);
    const FiniteMdp mdp = random_dense_mdp(3, 2, 0.9, rng);
    const Dataset ds = collect_dataset(mdp, Policy::uniform(3, 2), 1000, 100, 8);
    REQUIRE(ds.transitions.size() == 100000);
    const FiniteMdp mle = build_mle_mdp(build_counts(ds, 3, 2), mdp);
    for (std::size_t i = 0; i < mdp.transition.size(); ++i)
        CHECK(std::abs(mle.transition[i] - mdp.transition[i]) < 1e-2);
}

TEST_CASE("empirical visits: single steps and discounting") {
    Dataset one;
    one.transitions = {{0, 0, 0.0, 1, 0}};
    one.n_trajectories = 1;
    CHECK(empirical_visit_distribution(one, 2, 2, 0.9)(0, 0) == 1.0);

    Dataset two;
    two.transitions = {{0, 1, 0.0, 1, 0}, {1, 0, 0.0, 0, 1}};
    two.n_trajectories = 1;
    const auto d = empirical_visit_distribution(two, 2, 2, 0.9);
    CHECK(d(0, 1) == 1.0);
    CHECK(d(1, 0) == 0.9);
}

TEST_CASE("empirical visit mass matches the trajectory-length identity") {
    Rng rng(8);
    const double gamma = 0.95;
    const FiniteMdp mdp = random_goal_mdp(10, 3, gamma, rng);
    const Dataset ds = collect_dataset(mdp, random_policy(10, 3, rng), 300, 1000, 4);
    double expected = 0.0;
    for (int len : ds.trajectory_lengths()) expected += (1.0 - std::pow(gamma, len)) / (1.0 - gamma);
    expected /= ds.n_trajectories;
    CHECK(std::abs(empirical_visit_distribution(ds, 10, 3, gamma).total() - expected) < 1e-9);
}

TEST_CASE("analytic occupancy: self-loop and the performance identity") {
    FiniteMdp loop(1, 1, 0.95);
    loop.p(0, 0, 0) = 1.0;
    CHECK(analytic_visit_distribution(loop, Policy::uniform(1, 1))(0, 0) == doctest::Approx(20.0).epsilon(1e-12));

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(700 + seed);
        const FiniteMdp mdp = seed % 2 ? random_goal_mdp(6, 3, 0.95, rng) : random_dense_mdp(6, 3, 0.95, rng);
        const Policy pi = random_policy(6, 3, rng);
        const auto d = analytic_visit_distribution(mdp, pi);
        double rho = 0.0;
        for (int x = 0; x < 6; ++x)
            for (int a = 0; a < 3; ++a) rho += d(x, a) * mdp.r(x, a);
        CHECK(std::abs(rho - performance(mdp, pi)) < 1e-9);
    }
}

TEST_CASE("analytic occupancy agrees with long-horizon propagation") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(800 + seed);
        const FiniteMdp mdp = seed % 2 ? random_goal_mdp(5, 2, 0.9, rng) : random_dense_mdp(5, 2, 0.9, rng);
        const Policy pi = random_policy(5, 2, rng);
        const auto d = analytic_visit_distribution(mdp, pi);
        const auto oracle = spibb::testing::propagated_occupancy(mdp, pi);
        for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(std::abs(d.d[i] - oracle[i]) < 1e-5);
    }
}

TEST_CASE("empirical occupancy approaches the analytic one (N = 10,000)") {
    Rng rng(9);
    const double gamma = 0.95;
    const FiniteMdp mdp = random_goal_mdp(6, 3, gamma, rng);
    const Policy pi = random_policy(6, 3, rng);
    const Dataset ds = collect_dataset(mdp, pi, 10000, 1000, 10);
    const double dist = rescaled_l1_distance(analytic_visit_distribution(mdp, pi),
                                             empirical_visit_distribution(ds, 6, 3, gamma), gamma);
    CHECK(dist < 0.05);
}
