#include "cmdp/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace cmdp {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ULL;
} // namespace

std::uint64_t Rng::mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(mix64(seed ^ mix64(index ^ kStreamSalt)));
}

std::uint64_t Rng::next_u64() {
    state_ += kGolden;
    return mix64(state_);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::size_t Rng::categorical(std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("categorical: empty distribution");
    const double u = uniform();
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        cumulative += probs[i];
        last_positive = i;
        if (u < cumulative) return i;
    }
    // u landed in the rounding gap above the accumulated sum
    return last_positive;
}

std::size_t Rng::below(std::size_t n) {
    if (n == 0) throw std::invalid_argument("below: n must be positive");
    // Lemire's multiply-shift with rejection keeps the draw unbiased
    const unsigned __int128 product = static_cast<unsigned __int128>(next_u64()) * n;
    std::uint64_t low = static_cast<std::uint64_t>(product);
    if (low < n) {
        const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
        unsigned __int128 p = product;
        while (low < threshold) {
            p = static_cast<unsigned __int128>(next_u64()) * n;
            low = static_cast<std::uint64_t>(p);
        }
        return static_cast<std::size_t>(p >> 64);
    }
    return static_cast<std::size_t>(product >> 64);
}

double Rng::standard_normal() {
    // Box-Muller, one output per call; 1 - u keeps the log argument positive
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
    if (shape < 1.0) {
        // boost: G(a) = G(a + 1) * U^(1/a)
        const double u = 1.0 - uniform();
        return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0;
        double v = 0.0;
        do {
            x = standard_normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = 1.0 - uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

} // namespace cmdp
