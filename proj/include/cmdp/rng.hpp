#pragma once

#include <cstdint>
#include <span>

namespace cmdp {

/// SplitMix64 generator with explicit stream splitting.
///
/// The state advances by the golden-ratio increment 0x9E3779B97F4A7C15 and
/// each output is the Stafford "mix13" finalizer of the state. A stream is
/// identified by (seed, index); its initial state is
///
///     mix64(seed ^ mix64(index ^ 0xD1B54A32D192ED03))
///
/// so episode k of a run always draws from the same sequence regardless of
/// how many draws earlier episodes consumed. Doubles are the top 53 bits of
/// an output scaled by 2^-53. Everything here is integer arithmetic, so the
/// streams are identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t state) : state_(state) {}

    /// Stream `index` derived from a user seed.
    static Rng stream(std::uint64_t seed, std::uint64_t index);

    static std::uint64_t mix64(std::uint64_t z);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1).
    double uniform();

    /// Inverse-CDF draw from a probability vector, accumulating in ascending
    /// index order. Zero-probability entries are never returned.
    std::size_t categorical(std::span<const double> probs);

    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n);

    double standard_normal();

    /// Gamma(shape, 1) variate (Marsaglia-Tsang).
    double gamma(double shape);

private:
    std::uint64_t state_;
};

} // namespace cmdp
