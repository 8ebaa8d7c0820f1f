#include "spibb/baseline.hpp"

#include <cmath>

#include "spibb/errors.hpp"

namespace spibb {

Policy mle_baseline(const CountTables& counts) {
    Policy pi(counts.n_states, counts.n_actions);
    for (int x = 0; x < counts.n_states; ++x) {
        const double visits = counts.count(x);
        for (int a = 0; a < counts.n_actions; ++a)
            pi(x, a) = visits > 0.0 ? counts.count(x, a) / visits : 1.0 / counts.n_actions;
    }
    return pi;
}

void VectorDataset::validate() const {
    if (n_actions <= 0) throw ValidationError("VectorDataset: n_actions must be positive");
    const int dim = dimension();
    for (const Entry& e : entries) {
        if (static_cast<int>(e.x.size()) != dim) throw ValidationError("VectorDataset: inconsistent state dimension");
        if (e.a < 0 || e.a >= n_actions) throw ValidationError("VectorDataset: action index out of range");
        for (double v : e.x)
            if (!std::isfinite(v)) throw ValidationError("VectorDataset: non-finite state coordinate");
    }
}

namespace {

double hinge_weight(std::span<const double> x, const std::vector<double>& xj, double d0) {
    double sq = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double diff = x[k] - xj[k];
        sq += diff * diff;
    }
    return std::max(0.0, 1.0 - std::sqrt(sq) / d0);
}

void check_query(const VectorDataset& ds, std::span<const double> x, const PseudoCountConfig& cfg) {
    if (!(cfg.d0 > 0.0)) throw ValidationError("pseudo-count: d0 must be positive");
    ds.validate();
    if (!ds.entries.empty() && static_cast<int>(x.size()) != ds.dimension())
        throw ValidationError("pseudo-count: query dimension does not match dataset");
}

} // namespace

double pseudo_count(const VectorDataset& ds, std::span<const double> x, int a, const PseudoCountConfig& cfg) {
    check_query(ds, x, cfg);
    if (a < 0 || a >= ds.n_actions) throw ValidationError("pseudo-count: action index out of range");
    double total = 0.0;
    for (const auto& e : ds.entries)
        if (e.a == a) total += hinge_weight(x, e.x, cfg.d0);
    return total;
}

std::vector<double> pseudo_count_baseline(const VectorDataset& ds, std::span<const double> x,
                                          const PseudoCountConfig& cfg) {
    check_query(ds, x, cfg);
    if (ds.n_actions <= 0) throw ValidationError("pseudo-count: n_actions must be positive");
    // One pass over the data accumulates every action's pseudo-count.
    std::vector<double> counts(ds.n_actions, 0.0);
    for (const auto& e : ds.entries) counts[e.a] += hinge_weight(x, e.x, cfg.d0);
    double state_count = 0.0;
    for (double c : counts) state_count += c;
    if (state_count <= 0.0) return std::vector<double>(ds.n_actions, 1.0 / ds.n_actions);
    for (double& c : counts) c /= state_count;
    return counts;
}

} // namespace spibb
