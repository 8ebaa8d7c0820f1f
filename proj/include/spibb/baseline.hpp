#pragma once

#include <span>
#include <vector>

#include "spibb/data.hpp"
#include "spibb/mdp.hpp"

namespace spibb {

/// Empirical action frequencies per state; uniform where the state was never visited.
Policy mle_baseline(const CountTables& counts);

struct PseudoCountConfig {
    double d0 = 1.0; // similarity radius; entries at distance >= d0 contribute nothing
};

/// Logged (state vector, action) pairs for continuous-state behavioural cloning.
struct VectorDataset {
    struct Entry {
        std::vector<double> x;
        int a = 0;
    };
    std::vector<Entry> entries;
    int n_actions = 0;

    int dimension() const { return entries.empty() ? 0 : static_cast<int>(entries.front().x.size()); }
    void validate() const;
};

/// Hinge-kernel pseudo-count: sum over entries with action `a` of max(0, 1 - ||x - x_j|| / d0).
double pseudo_count(const VectorDataset& ds, std::span<const double> x, int a, const PseudoCountConfig& cfg);

/// Pseudo-count behavioural-cloning estimate at `x`; uniform when no entry is within d0.
std::vector<double> pseudo_count_baseline(const VectorDataset& ds, std::span<const double> x,
                                          const PseudoCountConfig& cfg);

} // namespace spibb
