#include "spibb/rng.hpp"

#include <cmath>
#include <limits>

#include "spibb/errors.hpp"

namespace spibb {

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw ValidationError("Rng::below: empty range");
    // Rejection on the largest multiple of n keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t draw = engine_();
    while (draw >= limit) draw = engine_();
    return draw % n;
}

double Rng::exponential() {
    // 1 - U lies in (0, 1], so the log is finite.
    return -std::log1p(-uniform());
}

int Rng::categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw ValidationError("Rng::categorical: weights have no mass");
    const double target = uniform() * total;
    double acc = 0.0;
    int last_positive = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        acc += weights[i];
        last_positive = static_cast<int>(i);
        if (target < acc) return last_positive;
    }
    return last_positive;
}

} // namespace spibb
