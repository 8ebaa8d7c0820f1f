// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Optional argument: scratch directory for CLI runs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "spibb/algorithms.hpp"
#include "spibb/baseline.hpp"
#include "spibb/benchmark.hpp"
#include "spibb/bounds.hpp"
#include "spibb/cli.hpp"
#include "spibb/io.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace spibb;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& criterion) {
    const auto start = Clock::now();
    Outcome o;
    try {
        o = criterion();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = seconds_since(start);
    if (!o.pass) ++failures;
    std::printf("[%s] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), elapsed);
    std::fflush(stdout);
}

std::string fmt(const char* format, double a = 0, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), format, a, b, c, d);
    return buf;
}

/// One feasibility/improvement instance built with the benchmark generators.
struct Instance {
    FiniteMdp mle;
    CountTables counts;
    Policy pi_b;
    Policy pi_hat;
    double n_wedge = 0;
    double epsilon = 0;
};

Instance make_benchmark_instance(std::uint64_t index) {
    static const int sizes[] = {2, 5, 10, 20, 50, 100};
    static const double wedges[] = {1, 3, 7, 15};
    static const double epsilons[] = {0.1, 0.5, 1.0, 2.0};
    Rng rng(derive_seed(2024, index));
    RandomMdpParams params;
    params.n_states = 5 + static_cast<int>(rng.below(26));
    params.n_actions = 2 + static_cast<int>(rng.below(3));
    params.connectivity = std::min(params.n_states, 2 + static_cast<int>(rng.below(3)));
    const FiniteMdp mdp = random_mdp(params, rng);
    Instance inst;
    inst.pi_b = random_baseline(mdp, rng.uniform(), rng);
    const Dataset ds = collect_dataset(mdp, inst.pi_b, sizes[rng.below(6)], 1000, rng.next_u64());
    inst.counts = build_counts(ds, mdp.n_states, mdp.n_actions);
    inst.mle = build_mle_mdp(inst.counts, mdp);
    inst.pi_hat = mle_baseline(inst.counts);
    inst.n_wedge = wedges[rng.below(4)];
    inst.epsilon = epsilons[rng.below(4)];
    return inst;
}

bool is_distribution(const Policy& pi) {
    try {
        pi.validate(1e-12);
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

Outcome degeneracy_suite() {
    const auto start = Clock::now();
    int checks = 0, bad = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto inst = spibb::testing::make_instance(10, 3, 5 + static_cast<int>(seed), 7000 + seed);
        const Policy basic = train_basic_rl(inst.mle);
        const ErrorTable errors = error_table(inst.counts, 0.05);
        for (const Policy* base : {&inst.behaviour, &inst.mle_baseline}) {
            bad += !(train_spibb(inst.mle, inst.counts, *base, SpibbConfig{1e18}) == *base);
            bad += !(train_spibb(inst.mle, inst.counts, *base, SpibbConfig{0.0}) == basic);
            bad += !(train_soft_spibb(inst.mle, errors, *base, SoftSpibbConfig{0.0}) == *base);
            checks += 3;
        }
        bad += !(train_ramdp(inst.mle, inst.counts, RaMdpConfig{0.0}) == basic);
        ++checks;
    }
    const double elapsed = seconds_since(start);
    return {bad == 0 && elapsed < 1.0,
            fmt("%.0f bitwise checks, %.0f mismatches, %.3f s (limit 1 s)", checks, bad, elapsed)};
}

struct SuiteTotals {
    int instances = 0;
    int spibb_infeasible = 0;
    int soft_over_budget = 0;
    int soft_touched_unknown = 0;
    int invalid_distributions = 0;
    int not_improving = 0;
    double worst_budget_excess = -1e300;
    double worst_improvement = 1e300;
    double seconds = 0;
};

const SuiteTotals& run_instance_suite() {
    static SuiteTotals totals;
    static bool done = false;
    if (done) return totals;
    const auto start = Clock::now();
    for (std::uint64_t i = 0; i < 500; ++i) {
        const Instance inst = make_benchmark_instance(i);
        const ErrorTable errors = error_table(inst.counts, 0.05);
        for (const Policy* base : {&inst.pi_b, &inst.pi_hat}) {
            const Policy spibb = train_spibb(inst.mle, inst.counts, *base, SpibbConfig{inst.n_wedge});
            const Policy soft = train_soft_spibb(inst.mle, errors, *base, SoftSpibbConfig{inst.epsilon});
            totals.spibb_infeasible += !satisfies_pi_b(spibb, *base, inst.counts, inst.n_wedge);
            totals.invalid_distributions += !is_distribution(spibb) + !is_distribution(soft);
            for (int x = 0; x < inst.mle.n_states; ++x) {
                const double excess = soft_constraint_cost(soft.row(x), base->row(x), errors.row(x)) - inst.epsilon;
                totals.worst_budget_excess = std::max(totals.worst_budget_excess, excess);
                totals.soft_over_budget += excess > 1e-8;
                for (int a = 0; a < inst.mle.n_actions; ++a)
                    totals.soft_touched_unknown += !std::isfinite(errors(x, a)) && soft(x, a) != (*base)(x, a);
            }
            const double rho_base = performance(inst.mle, *base);
            for (const Policy* out : {&spibb, &soft}) {
                const double gain = performance(inst.mle, *out) - rho_base;
                totals.worst_improvement = std::min(totals.worst_improvement, gain);
                totals.not_improving += gain < -1e-8;
            }
        }
        ++totals.instances;
    }
    totals.seconds = seconds_since(start);
    done = true;
    return totals;
}

Outcome feasibility_suite() {
    const SuiteTotals& t = run_instance_suite();
    const bool pass = t.instances == 500 && t.spibb_infeasible == 0 && t.soft_over_budget == 0 &&
                      t.soft_touched_unknown == 0 && t.invalid_distributions == 0 && t.seconds < 60.0;
    std::ostringstream s;
    s << t.instances << " instances x 2 baselines; Pi_b violations " << t.spibb_infeasible << ", budget violations "
      << t.soft_over_budget << " (worst excess " << t.worst_budget_excess << "), unknown-pair changes "
      << t.soft_touched_unknown << ", invalid rows " << t.invalid_distributions << "; " << fmt("%.1f", t.seconds)
      << " s (limit 60 s)";
    return {pass, s.str()};
}

Outcome mle_improvement() {
    const SuiteTotals& t = run_instance_suite();
    std::ostringstream s;
    s << t.instances << " instances x 2 baselines x 2 trainers; min rho(out) - rho(baseline) = "
      << t.worst_improvement << " (tolerance -1e-8), failures " << t.not_improving;
    return {t.not_improving == 0, s.str()};
}

Outcome oracle_equivalence() {
    static const double wedges[] = {1, 2, 3, 5, 10};
    double worst_spibb = 0.0;
    for (std::uint64_t i = 0; i < 200; ++i) {
        const auto inst = spibb::testing::make_instance(3, 2, 2 + static_cast<int>(i % 7), 9000 + i, i % 4 != 0);
        const double n_wedge = wedges[i % 5];
        const Policy& base = i % 2 ? inst.mle_baseline : inst.behaviour;
        const Policy pi = train_spibb(inst.mle, inst.counts, base, SpibbConfig{n_wedge});
        const double oracle = spibb::testing::spibb_vertex_optimum(inst.mle, inst.counts, base, n_wedge);
        worst_spibb = std::max(worst_spibb, std::abs(performance(inst.mle, pi) - oracle));
    }

    // Soft steps: the hand example, then LP optima on two-action rows and on
    // rows with a common error, where the greedy transfer is exact.
    double worst_soft = 0.0;
    {
        const std::vector<double> q{0.0, 1.0}, e{1.0, 1.0}, b{0.5, 0.5};
        const auto row = soft_spibb_local_step(q, e, b, 0.5);
        worst_soft = std::max(std::abs(row[0] - 0.25), std::abs(row[1] - 0.75));
    }
    Rng rng(31);
    int steps = 0;
    for (int trial = 0; trial < 600; ++trial) {
        const int k = trial % 3 == 0 ? 2 : 3 + trial % 2;
        std::vector<double> q(k), e(k), b(k);
        double total = 0.0;
        const double common = rng.uniform(0.1, 3.0);
        for (int a = 0; a < k; ++a) {
            q[a] = rng.uniform(-1, 1);
            e[a] = k == 2 ? rng.uniform(0.1, 3.0) : common;
            total += b[a] = rng.uniform(0.01, 1.0);
        }
        for (double& p : b) p /= total;
        const double eps = rng.uniform(0.0, 2.5);
        const auto row = soft_spibb_local_step(q, e, b, eps);
        double value = 0.0;
        for (int a = 0; a < k; ++a) value += row[a] * q[a];
        worst_soft = std::max(worst_soft, std::abs(value - spibb::testing::soft_step_lp_optimum(q, e, b, eps)));
        ++steps;
    }
    // Informational: with unequal errors over 3+ actions the greedy transfer
    // is only an approximation of the LP; it must still never exceed it.
    int below = 0, above = 0;
    double max_gap = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
        const int k = 3 + trial % 2;
        std::vector<double> q(k), e(k), b(k);
        double total = 0.0;
        for (int a = 0; a < k; ++a) {
            q[a] = rng.uniform(-1, 1);
            e[a] = rng.uniform(0.1, 3.0);
            total += b[a] = rng.uniform(0.01, 1.0);
        }
        for (double& p : b) p /= total;
        const double eps = rng.uniform(0.0, 2.5);
        const auto row = soft_spibb_local_step(q, e, b, eps);
        double value = 0.0;
        for (int a = 0; a < k; ++a) value += row[a] * q[a];
        const double gap = spibb::testing::soft_step_lp_optimum(q, e, b, eps) - value;
        below += gap > 1e-8;
        above += gap < -1e-9;
        max_gap = std::max(max_gap, gap);
    }
    std::ostringstream s;
    s << "200 SPIBB instances, max |rho - vertex optimum| = " << worst_spibb << "; hand example + " << steps
      << " soft steps (2 actions or common error), max |value - LP| = " << worst_soft
      << " (tolerance 1e-8); info: unequal errors, greedy below LP on " << below << "/300 steps (max gap " << max_gap
      << "), above LP on " << above;
    return {worst_spibb <= 1e-8 && worst_soft <= 1e-8 && above == 0, s.str()};
}

Outcome lemma1_monte_carlo() {
    FiniteMdp mdp(2, 2, 0.6);
    mdp.p(0, 0, 0) = 0.7;
    mdp.p(0, 0, 1) = 0.3;
    mdp.p(0, 1, 1) = 1.0;
    mdp.p(1, 0, 0) = 0.5;
    mdp.p(1, 0, 1) = 0.5;
    mdp.p(1, 1, 0) = 1.0;
    mdp.r(0, 1) = 1.0;
    mdp.v_max = 2.5;
    Policy pi(2, 2);
    pi(0, 0) = 0.6;
    pi(0, 1) = 0.4;
    pi(1, 0) = 0.3;
    pi(1, 1) = 0.7;
    const int max_len = 60; // 0.6^60 < 1e-13
    const auto start = Clock::now();
    int points = 0, violations = 0;
    double worst_ratio = 0.0;
    std::ostringstream s;
    for (int n : {20, 50, 100, 200}) {
        for (double eps : {0.3, 0.5, 0.8}) {
            if (lemma1_bound(2, 2, n, eps) >= 1.0) continue;
            const Lemma1Check c = lemma1_monte_carlo_check(mdp, pi, n, eps, 10000, derive_seed(77, n, points), max_len);
            ++points;
            violations += c.empirical_prob > c.bound;
            worst_ratio = std::max(worst_ratio, c.empirical_prob / c.bound);
            s << " N=" << n << ",eps=" << eps << ":" << c.empirical_prob << "<=" << c.bound;
        }
    }
    const double elapsed = seconds_since(start);
    std::ostringstream d;
    d << points << " grid points, 10000 resamples each, violations " << violations << ", " << fmt("%.1f", elapsed)
      << " s (limit 120 s);" << s.str();
    return {points > 0 && violations == 0 && elapsed < 120.0, d.str()};
}

Outcome theorem2_scaling() {
    const double p1000 = baseline_estimation_penalty(1.0, 0.95, 50, 4, 1000, 0.05);
    const double p4000 = baseline_estimation_penalty(1.0, 0.95, 50, 4, 4000, 0.05);
    const double oracle = 22.126598095400313; // 40 sqrt((600 + 4 ln 20) / 2000), extended precision
    std::ostringstream s;
    s.precision(17);
    s << "penalty(1000) = " << p1000 << ", |penalty(4000) - penalty(1000)/2| = " << std::abs(p4000 - p1000 / 2)
      << " (tol 1e-12), |penalty(1000) - oracle| = " << std::abs(p1000 - oracle) << " (tol 1e-6)";
    return {std::abs(p4000 - p1000 / 2) <= 1e-12 && std::abs(p1000 - oracle) <= 1e-6, s.str()};
}

BenchmarkConfig figure1_config() {
    BenchmarkConfig cfg;
    cfg.eta = 0.9;
    cfg.dataset_sizes = {10, 50, 200, 1000};
    cfg.n_seeds = 2000;
    cfg.master_seed = 1;
    cfg.algorithms = {
        AlgorithmSpec{"baseline", "baseline", {}, {}, {}},
        AlgorithmSpec{"basic_rl", "basic_rl", {}, {}, {}},
        AlgorithmSpec{"ramdp", "ramdp", {}, {}, 0.003},
        AlgorithmSpec{"spibb", "spibb", 7.0, {}, {}},
        AlgorithmSpec{"soft_spibb", "soft_spibb", {}, 0.5, {}},
    };
    return cfg;
}

Outcome figure1() {
    const BenchmarkConfig cfg = figure1_config();
    const BenchmarkResult result = run_benchmark(cfg, 1);
    std::map<std::tuple<std::string, std::string, int>, SummaryRow> table;
    for (const auto& row : aggregate(result.records)) table[{row.algorithm, row.baseline_mode, row.dataset_size}] = row;
    auto at = [&](const std::string& alg, const std::string& mode, int size) -> const SummaryRow& {
        return table.at({alg, mode, size});
    };

    std::ostringstream s;
    s.precision(4);
    const double basic_q01 = at("basic_rl", kModeEstimated, 10).quantile_01;
    const double spibb_q01 = at("spibb", kModeEstimated, 10).quantile_01;
    const double base_q01 = at("baseline", kModeEstimated, 10).quantile_01;
    const bool a = basic_q01 < -0.2 && std::abs(spibb_q01 - base_q01) <= 0.1;
    s << "seeds " << cfg.n_seeds - result.skipped_seeds - result.degenerate_seeds << " used (" << result.skipped_seeds
      << " skipped, " << result.degenerate_seeds << " degenerate); (a) size 10 q01: basic_rl " << basic_q01
      << ", spibb(est) " << spibb_q01 << ", baseline(est) " << base_q01 << (a ? " ok" : " FAIL");

    bool b = true, c = true;
    for (const char* alg : {"spibb", "soft_spibb"}) {
        for (const char* mode : {kModeTrue, kModeEstimated}) {
            s << "; " << alg << "/" << mode << " means";
            double prev = -1e300;
            for (int size : cfg.dataset_sizes) {
                const double mean = at(alg, mode, size).mean;
                s << " " << mean;
                if (mean < prev - 0.05) b = false;
                prev = mean;
            }
            if (!(at(alg, mode, 1000).mean > 0.0)) c = false;
        }
    }
    s << "; basic_rl means";
    for (int size : cfg.dataset_sizes) s << " " << at("basic_rl", kModeEstimated, size).mean;
    s << "; (b) " << (b ? "ok" : "FAIL") << "; (c) " << (c ? "ok" : "FAIL");
    return {a && b && c, s.str()};
}

Outcome determinism(const fs::path& scratch) {
    fs::create_directories(scratch);
    const io::json cfg = {{"eta", 0.9},
                          {"dataset_sizes", {10, 50}},
                          {"n_seeds", 24},
                          {"master_seed", 3},
                          {"algorithms",
                           {{{"type", "baseline"}},
                            {{"type", "basic_rl"}},
                            {{"type", "ramdp"}, {"kappa", 0.003}},
                            {{"type", "spibb"}, {"n_wedge", 7}},
                            {{"type", "soft_spibb"}, {"epsilon", 0.5}}}}};
    const fs::path config = scratch / "determinism.json";
    io::write_json_file(config, cfg);
    auto run = [&](const char* workers, const fs::path& out) {
        const std::string c = config.string(), o = out.string();
        const char* argv[] = {"spibb", "benchmark", "--config", c.c_str(), "--workers", workers, "--out", o.c_str()};
        std::ostringstream sink_out, sink_err;
        return cli::run(8, argv, sink_out, sink_err);
    };
    const int rc1 = run("1", scratch / "k1");
    const int rc8 = run("8", scratch / "k8");
    const std::string r1 = io::read_text_file(scratch / "k1" / "records.csv");
    const std::string r8 = io::read_text_file(scratch / "k8" / "records.csv");
    const std::string s1 = io::read_text_file(scratch / "k1" / "summary.csv");
    const std::string s8 = io::read_text_file(scratch / "k8" / "summary.csv");
    const bool same = rc1 == 0 && rc8 == 0 && r1 == r8 && s1 == s8;
    std::ostringstream s;
    s << "workers 1 vs 8: records.csv " << r1.size() << " bytes " << (r1 == r8 ? "identical" : "DIFFERENT")
      << " (sha256 " << io::sha256_hex(r1).substr(0, 12) << "), summary.csv " << (s1 == s8 ? "identical" : "DIFFERENT");
    return {same, s.str()};
}

} // namespace

int main(int argc, char** argv) {
    const fs::path scratch = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "spibb_acceptance";
    report("Degeneracy suite", degeneracy_suite);
    report("Feasibility suite", feasibility_suite);
    report("MLE-MDP improvement", mle_improvement);
    report("Oracle equivalence", oracle_equivalence);
    report("Lemma 1 Monte Carlo", lemma1_monte_carlo);
    report("Theorem 2 scaling", theorem2_scaling);
    report("Qualitative Figure-1 reproduction", figure1);
    report("Determinism", [&] { return determinism(scratch); });
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
