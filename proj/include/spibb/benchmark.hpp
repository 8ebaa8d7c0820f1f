#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spibb/bounds.hpp"
#include "spibb/mdp.hpp"
#include "spibb/rng.hpp"

namespace spibb {

enum class BaselineModes { true_only, estimated_only, both };

/// One trainer in the experiment grid. `type` is one of baseline, basic_rl,
/// ramdp, spibb, soft_spibb; `name` labels its rows (defaults to `type`).
struct AlgorithmSpec {
    std::string type;
    std::string name;
    std::optional<double> n_wedge;
    std::optional<double> epsilon;
    std::optional<double> kappa;
    double delta = 0.05;
    double delta_prime = 0.05;

    /// Throws ValidationError if the type is unknown or a required hyper-parameter is missing.
    void validate() const;
    /// True for trainers whose output depends on the baseline they are given.
    bool uses_baseline() const;
};

struct RandomMdpParams {
    int n_states = 50;
    int n_actions = 4;
    int connectivity = 4;
    double gamma = 0.95;
};

struct BenchmarkConfig {
    RandomMdpParams mdp;
    double eta = 0.9;
    std::vector<int> dataset_sizes{10, 20, 50, 100, 200, 500, 1000, 2000}; // trajectories
    int n_seeds = 2000;
    std::vector<AlgorithmSpec> algorithms;
    BaselineModes baseline_mode = BaselineModes::both;
    std::uint64_t master_seed = 0;
    int max_trajectory_length = 1000;
    double baseline_tolerance = 1e-3;

    void validate() const;
    std::vector<std::string> modes() const;
};

inline constexpr const char* kModeTrue = "true";
inline constexpr const char* kModeEstimated = "estimated";
inline constexpr const char* kModeReference = "reference";
inline constexpr const char* kOptimalRow = "optimal";
inline constexpr const char* kTrueBaselineRow = "pi_b";

struct ExperimentRecord {
    int seed = 0;
    int dataset_size = 0;
    std::string algorithm;
    std::string baseline_mode;
    double raw_perf = 0.0;
    double baseline_perf = 0.0;
    double optimal_perf = 0.0;
    double normalized_perf = 0.0;
    std::optional<BoundReport> bounds;
};

/// Random goal-reaching MDP: every pair moves to at most `connectivity`
/// distinct successors with flat-Dirichlet probabilities; state 0 is initial;
/// the goal is the state with the lowest optimal value of reaching it, and
/// entering it pays 1 and ends the episode. Regenerates (up to 100 times)
/// when the chosen goal is unreachable.
FiniteMdp random_mdp(const RandomMdpParams& params, Rng& rng);

struct BaselineCalibration {
    double target = 0.0;
    double achieved = 0.0;
    double optimal = 0.0;
    double uniform = 0.0;
    double temperature = 0.0;
    int attempts = 0;
};

/// Stochastic baseline with rho(pi_b) within `tol` of
/// eta * rho(pi*) + (1 - eta) * rho(uniform). Built as a noisy softmax of the
/// optimal action values whose temperature is bisected; fresh noise is drawn
/// when bisection cannot bracket the target.
Policy random_baseline(const FiniteMdp& mdp, double eta, Rng& rng, double tol = 1e-3,
                       BaselineCalibration* calibration = nullptr);

/// (raw - baseline) / (optimal - baseline); empty when the gap is below 1e-9.
std::optional<double> normalized_performance(double raw, double baseline_perf, double optimal_perf);

struct SeedOutcome {
    int seed = 0;
    std::vector<ExperimentRecord> records;
    bool skipped = false; // generation rejected the seed
    bool degenerate = false; // baseline already optimal; records dropped
    std::string reason;
};

/// Full protocol for one seed. Deterministic in (cfg, seed_index).
SeedOutcome run_seed(const BenchmarkConfig& cfg, int seed_index);

struct BenchmarkResult {
    std::vector<ExperimentRecord> records; // ordered by seed, then emission order
    int skipped_seeds = 0;
    int degenerate_seeds = 0;
};

/// Runs every seed on `workers` threads; the result does not depend on `workers`.
BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, int workers);

struct SummaryRow {
    std::string algorithm;
    std::string baseline_mode;
    int dataset_size = 0;
    double mean = 0.0;
    double quantile_01 = 0.0;
    double quantile_10 = 0.0;
    int n = 0;
};

/// Nearest-rank quantile: element ceil(q n) (1-based) of the ascending sort.
double nearest_rank_quantile(std::vector<double> values, double q);

/// Groups normalized performance by (algorithm, baseline_mode, dataset_size).
/// Rows are ordered by algorithm and mode in first-appearance order, then size.
std::vector<SummaryRow> aggregate(const std::vector<ExperimentRecord>& records);

} // namespace spibb
