#include "spibb/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "spibb/algorithms.hpp"
#include "spibb/baseline.hpp"
#include "spibb/data.hpp"
#include "spibb/errors.hpp"
#include "spibb/parallel.hpp"

namespace spibb {

namespace {

// Stream identifiers for derive_seed.
constexpr std::uint64_t kGenerationStream = 1;
constexpr std::uint64_t kDatasetStream = 2;

constexpr int kMaxMdpAttempts = 100;
constexpr int kMaxNoiseAttempts = 100;
constexpr int kMaxBisection = 200;
constexpr double kMinTemperature = 1e-4;
constexpr double kMaxTemperature = 1e4;

/// Reach-the-goal value of `g` from the initial state.
double reach_value(const FiniteMdp& base, int goal) {
    FiniteMdp m = base;
    m.set_terminal({goal});
    for (int x = 0; x < m.n_states; ++x)
        for (int a = 0; a < m.n_actions; ++a) m.r(x, a) = m.p(x, a, goal);
    return value_iteration(m).v[m.initial_state];
}

Policy softmax_policy(const QFunction& q, const std::vector<double>& noise, double temperature) {
    Policy pi(q.n_states, q.n_actions);
    std::vector<double> logits(q.n_actions);
    for (int x = 0; x < q.n_states; ++x) {
        double top = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < q.n_actions; ++a) {
            logits[a] = q(x, a) / temperature + noise[static_cast<std::size_t>(x) * q.n_actions + a];
            top = std::max(top, logits[a]);
        }
        double total = 0.0;
        for (int a = 0; a < q.n_actions; ++a) {
            logits[a] = std::exp(logits[a] - top);
            total += logits[a];
        }
        for (int a = 0; a < q.n_actions; ++a) pi(x, a) = logits[a] / total;
    }
    return pi;
}

} // namespace

void AlgorithmSpec::validate() const {
    auto need = [&](const std::optional<double>& v, const char* flag) {
        if (!v) throw ValidationError("algorithm '" + type + "' requires " + flag);
        if (!(*v >= 0.0)) throw ValidationError(std::string(flag) + " must be >= 0");
    };
    if (type == "spibb") {
        need(n_wedge, "n_wedge");
    } else if (type == "soft_spibb") {
        need(epsilon, "epsilon");
    } else if (type == "ramdp") {
        need(kappa, "kappa");
    } else if (type != "basic_rl" && type != "baseline") {
        throw ValidationError("unknown algorithm type '" + type + "'");
    }
    if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
    if (!(delta_prime > 0.0 && delta_prime < 1.0)) throw ValidationError("delta_prime must lie in (0, 1)");
}

bool AlgorithmSpec::uses_baseline() const {
    return type == "spibb" || type == "soft_spibb" || type == "baseline";
}

void BenchmarkConfig::validate() const {
    if (mdp.n_states < 2 || mdp.n_actions < 1) throw ValidationError("need at least 2 states and 1 action");
    if (mdp.connectivity < 1 || mdp.connectivity > mdp.n_states)
        throw ValidationError("connectivity must lie in [1, n_states]");
    if (!(mdp.gamma >= 0.0 && mdp.gamma < 1.0)) throw ValidationError("gamma must lie in [0, 1)");
    if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("eta must lie in [0, 1]");
    if (dataset_sizes.empty()) throw ValidationError("dataset_sizes must not be empty");
    for (std::size_t i = 0; i < dataset_sizes.size(); ++i) {
        if (dataset_sizes[i] < 1) throw ValidationError("dataset sizes must be >= 1");
        if (i > 0 && dataset_sizes[i] <= dataset_sizes[i - 1])
            throw ValidationError("dataset_sizes must be strictly ascending");
    }
    if (n_seeds < 1) throw ValidationError("n_seeds must be >= 1");
    if (max_trajectory_length < 1) throw ValidationError("max_trajectory_length must be >= 1");
    if (!(baseline_tolerance > 0.0)) throw ValidationError("baseline_tolerance must be positive");
    std::vector<std::string> names;
    for (const auto& alg : algorithms) {
        alg.validate();
        const std::string& label = alg.name.empty() ? alg.type : alg.name;
        if (label == kOptimalRow || label == kTrueBaselineRow)
            throw ValidationError("algorithm name '" + label + "' is reserved for reference rows");
        if (std::find(names.begin(), names.end(), label) != names.end())
            throw ValidationError("duplicate algorithm name '" + label + "'");
        names.push_back(label);
    }
}

std::vector<std::string> BenchmarkConfig::modes() const {
    switch (baseline_mode) {
    case BaselineModes::true_only: return {kModeTrue};
    case BaselineModes::estimated_only: return {kModeEstimated};
    case BaselineModes::both: break;
    }
    return {kModeTrue, kModeEstimated};
}

FiniteMdp random_mdp(const RandomMdpParams& params, Rng& rng) {
    const int n = params.n_states;
    if (n < 2 || params.n_actions < 1 || params.connectivity < 1 || params.connectivity > n)
        throw ValidationError("random_mdp: invalid parameters");

    std::vector<int> perm(n);
    std::vector<double> weights(params.connectivity);
    for (int attempt = 0; attempt < kMaxMdpAttempts; ++attempt) {
        FiniteMdp mdp(n, params.n_actions, params.gamma);
        mdp.initial_state = 0;
        for (int x = 0; x < n; ++x) {
            for (int a = 0; a < params.n_actions; ++a) {
                std::iota(perm.begin(), perm.end(), 0);
                for (int k = 0; k < params.connectivity; ++k) {
                    const auto j = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - k)));
                    std::swap(perm[k], perm[j]);
                }
                double total = 0.0;
                for (double& w : weights) {
                    w = rng.exponential();
                    total += w;
                }
                for (int k = 0; k < params.connectivity; ++k) mdp.p(x, a, perm[k]) += weights[k] / total;
            }
        }

        int goal = -1;
        double hardest = std::numeric_limits<double>::infinity();
        for (int g = 0; g < n; ++g) {
            if (g == mdp.initial_state) continue;
            const double value = reach_value(mdp, g);
            if (value < hardest) {
                hardest = value;
                goal = g;
            }
        }
        if (!(hardest > 0.0)) continue; // some state is unreachable; redraw

        mdp.set_terminal({goal});
        mdp.entry_reward.assign(n, 0.0);
        mdp.entry_reward[goal] = 1.0;
        for (int x = 0; x < n; ++x)
            for (int a = 0; a < params.n_actions; ++a) mdp.r(x, a) = mdp.p(x, a, goal);
        mdp.r_max = 1.0;
        mdp.v_max = 1.0; // one goal reward per episode
        mdp.validate();
        return mdp;
    }
    throw GenerationError("random_mdp: no MDP with a reachable goal after 100 attempts");
}

Policy random_baseline(const FiniteMdp& mdp, double eta, Rng& rng, double tol, BaselineCalibration* calibration) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("eta must lie in [0, 1]");
    if (!(tol > 0.0)) throw ValidationError("tol must be positive");

    const Policy optimal = optimal_policy(mdp);
    const ValueFunction v_star = policy_evaluation_exact(mdp, optimal);
    const QFunction q_star = q_from_v(mdp, v_star);
    BaselineCalibration cal;
    cal.optimal = v_star[mdp.initial_state];
    cal.uniform = performance(mdp, Policy::uniform(mdp.n_states, mdp.n_actions));
    cal.target = eta * cal.optimal + (1.0 - eta) * cal.uniform;

    std::vector<double> noise(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
    for (int attempt = 1; attempt <= kMaxNoiseAttempts; ++attempt) {
        for (double& u : noise) u = rng.uniform(-0.5, 0.5);
        auto gap_at = [&](double log_temperature, Policy& out) {
            out = softmax_policy(q_star, noise, std::exp(log_temperature));
            return performance(mdp, out) - cal.target;
        };
        auto accept = [&](const Policy& pi, double log_temperature, double gap) {
            cal.achieved = cal.target + gap;
            cal.temperature = std::exp(log_temperature);
            cal.attempts = attempt;
            if (calibration) *calibration = cal;
            return pi;
        };

        double lo = std::log(kMinTemperature); // sharp: near-optimal
        double hi = std::log(kMaxTemperature); // flat: near the noise policy
        Policy pi;
        const double gap_lo = gap_at(lo, pi);
        if (std::abs(gap_lo) <= tol) return accept(pi, lo, gap_lo);
        const double gap_hi = gap_at(hi, pi);
        if (std::abs(gap_hi) <= tol) return accept(pi, hi, gap_hi);
        if (gap_lo < 0.0 || gap_hi > 0.0) continue; // no bracket with this noise

        for (int it = 0; it < kMaxBisection; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double gap = gap_at(mid, pi);
            if (std::abs(gap) <= tol) return accept(pi, mid, gap);
            (gap > 0.0 ? lo : hi) = mid;
        }
    }
    throw GenerationError("random_baseline: could not calibrate a baseline to the eta target");
}

std::optional<double> normalized_performance(double raw, double baseline_perf, double optimal_perf) {
    const double gap = optimal_perf - baseline_perf;
    if (gap < 1e-9) return std::nullopt;
    return (raw - baseline_perf) / gap;
}

SeedOutcome run_seed(const BenchmarkConfig& cfg, int seed_index) {
    SeedOutcome out;
    out.seed = seed_index;
    Rng rng(derive_seed(cfg.master_seed, kGenerationStream, static_cast<std::uint64_t>(seed_index)));

    FiniteMdp mdp;
    Policy pi_b;
    try {
        mdp = random_mdp(cfg.mdp, rng);
        pi_b = random_baseline(mdp, cfg.eta, rng, cfg.baseline_tolerance);
    } catch (const GenerationError& e) {
        out.skipped = true;
        out.reason = e.what();
        return out;
    }
    const Policy pi_star = optimal_policy(mdp);
    const double optimal_perf = performance(mdp, pi_star);
    const double baseline_perf = performance(mdp, pi_b);
    if (!normalized_performance(optimal_perf, baseline_perf, optimal_perf)) {
        out.degenerate = true;
        out.reason = "baseline performance equals optimal performance";
        return out;
    }

    auto emit = [&](int size, const std::string& algorithm, const std::string& mode, double raw,
                    std::optional<BoundReport> bounds) {
        ExperimentRecord rec;
        rec.seed = seed_index;
        rec.dataset_size = size;
        rec.algorithm = algorithm;
        rec.baseline_mode = mode;
        rec.raw_perf = raw;
        rec.baseline_perf = baseline_perf;
        rec.optimal_perf = optimal_perf;
        rec.normalized_perf = *normalized_performance(raw, baseline_perf, optimal_perf);
        rec.bounds = bounds;
        out.records.push_back(std::move(rec));
    };

    const auto modes = cfg.modes();
    for (std::size_t j = 0; j < cfg.dataset_sizes.size(); ++j) {
        const int size = cfg.dataset_sizes[j];
        const Dataset ds = collect_dataset(
            mdp, pi_b, size, cfg.max_trajectory_length,
            derive_seed(cfg.master_seed, kDatasetStream, static_cast<std::uint64_t>(seed_index), j));
        const CountTables counts = build_counts(ds, mdp.n_states, mdp.n_actions);
        const FiniteMdp mle = build_mle_mdp(counts, mdp);
        const Policy pi_hat = mle_baseline(counts);

        emit(size, kOptimalRow, kModeReference, optimal_perf, std::nullopt);
        emit(size, kTrueBaselineRow, kModeReference, baseline_perf, std::nullopt);

        // Baseline-free trainers give the same policy in every mode.
        std::map<std::string, double> shared_perf;
        for (const auto& mode : modes) {
            const bool true_mode = mode == kModeTrue;
            const Policy& baseline = true_mode ? pi_b : pi_hat;
            for (const auto& alg : cfg.algorithms) {
                const std::string label = alg.name.empty() ? alg.type : alg.name;
                std::optional<BoundReport> bounds;
                double raw = 0.0;
                if (!alg.uses_baseline()) {
                    auto it = shared_perf.find(label);
                    if (it == shared_perf.end()) {
                        const Policy pi = alg.type == "ramdp" ? train_ramdp(mle, counts, {*alg.kappa})
                                                              : train_basic_rl(mle);
                        it = shared_perf.emplace(label, performance(mdp, pi)).first;
                    }
                    raw = it->second;
                } else if (alg.type == "baseline") {
                    raw = performance(mdp, baseline);
                } else if (alg.type == "spibb") {
                    const Policy pi = train_spibb(mle, counts, baseline, {*alg.n_wedge});
                    raw = performance(mdp, pi);
                    const double zeta = theorem1_zeta(*alg.n_wedge, mdp.n_states, mdp.n_actions, mdp.gamma,
                                                      mdp.v_max, alg.delta, performance(mle, pi),
                                                      performance(mle, baseline));
                    if (true_mode) {
                        bounds = BoundReport{zeta, zeta, alg.delta, 0.0, alg.delta, 0.0};
                    } else {
                        bounds = theorem2_zeta_hat(zeta, alg.delta, mdp.r_max, mdp.gamma, mdp.n_states,
                                                   mdp.n_actions, size, alg.delta_prime);
                    }
                } else {
                    const ErrorTable errors = error_table(counts, alg.delta);
                    const Policy pi = train_soft_spibb(mle, errors, baseline, {*alg.epsilon, alg.delta});
                    raw = performance(mdp, pi);
                }
                emit(size, label, mode, raw, bounds);
            }
        }
    }
    return out;
}

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, int workers) {
    cfg.validate();
    std::vector<SeedOutcome> outcomes(cfg.n_seeds);
    parallel_for(static_cast<std::size_t>(cfg.n_seeds), workers,
                 [&](std::size_t i) { outcomes[i] = run_seed(cfg, static_cast<int>(i)); });
    BenchmarkResult result;
    for (auto& o : outcomes) {
        result.skipped_seeds += o.skipped ? 1 : 0;
        result.degenerate_seeds += o.degenerate ? 1 : 0;
        for (auto& rec : o.records) result.records.push_back(std::move(rec));
    }
    return result;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw ValidationError("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

std::vector<SummaryRow> aggregate(const std::vector<ExperimentRecord>& records) {
    // Group keys in first-appearance order of (algorithm, mode), then by size.
    std::vector<std::pair<std::string, std::string>> key_order;
    std::map<std::tuple<std::string, std::string, int>, std::vector<double>> groups;
    for (const auto& rec : records) {
        const auto key = std::make_pair(rec.algorithm, rec.baseline_mode);
        if (std::find(key_order.begin(), key_order.end(), key) == key_order.end()) key_order.push_back(key);
        groups[{rec.algorithm, rec.baseline_mode, rec.dataset_size}].push_back(rec.normalized_perf);
    }
    std::vector<SummaryRow> rows;
    for (const auto& [algorithm, mode] : key_order) {
        for (auto it = groups.lower_bound({algorithm, mode, std::numeric_limits<int>::min()});
             it != groups.end() && std::get<0>(it->first) == algorithm && std::get<1>(it->first) == mode; ++it) {
            const auto& values = it->second;
            if (values.empty()) continue;
            SummaryRow row;
            row.algorithm = algorithm;
            row.baseline_mode = mode;
            row.dataset_size = std::get<2>(it->first);
            row.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
            row.quantile_01 = nearest_rank_quantile(values, 0.01);
            row.quantile_10 = nearest_rank_quantile(values, 0.10);
            row.n = static_cast<int>(values.size());
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

} // namespace spibb
