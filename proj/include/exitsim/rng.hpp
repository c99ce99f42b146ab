#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <limits>
#include <optional>

#include <boost/random/normal_distribution.hpp>

#include "exitsim/types.hpp"

namespace exitsim {

/// Philox4x32-10 block function (Salmon et al., SC'11).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;
};

/// SplitMix64 finalizer; used to derive independent seeds for sub-experiments.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Per-path random stream. The output sequence is a pure function of
/// (seed, path_index): the seed is the Philox key, the path index occupies
/// the high half of the counter and the draw number the low half.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t path_index)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          path_index_(path_index) {}

    std::uint64_t seed() const { return (std::uint64_t{key_[1]} << 32) | key_[0]; }
    std::uint64_t path_index() const { return path_index_; }
    std::uint64_t blocks_used() const { return block_; }

    /// Two independent uniforms in (0, 1].
    std::array<double, 2> uniform_pair() {
        const auto out = next_block();
        return {to_unit(join(out[0], out[1])), to_unit(join(out[2], out[3]))};
    }

    double uniform() { return uniform_pair()[0]; }

    /// Standard normal (ziggurat, driven by this stream's 64-bit words).
    double normal() { return normal_(*this); }

    // UniformRandomBitGenerator interface; each Philox block yields two words.
    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() {
        if (have_word_) {
            have_word_ = false;
            return word_;
        }
        const auto out = next_block();
        word_ = join(out[2], out[3]);
        have_word_ = true;
        return join(out[0], out[1]);
    }

private:
    Philox4x32::Counter next_block() {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                      static_cast<std::uint32_t>(path_index_),
                                      static_cast<std::uint32_t>(path_index_ >> 32)};
        ++block_;
        return Philox4x32::generate(ctr, key_);
    }
    static std::uint64_t join(std::uint32_t lo, std::uint32_t hi) { return (std::uint64_t{hi} << 32) | lo; }
    static double to_unit(std::uint64_t bits) { return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53; }

    Philox4x32::Key key_;
    std::uint64_t path_index_;
    std::uint64_t block_ = 0;
    std::uint64_t word_ = 0;
    bool have_word_ = false;
    boost::random::normal_distribution<double> normal_;
};

/// Driving noise over one step of length dt. dz holds the iterated integrals
/// dZ^i = int_s^t (W^i(u) - W^i(s)) du and is present only when requested.
template <std::size_t M>
struct NoiseIncrement {
    Vec<M> dw{};
    std::optional<Vec<M>> dz;
    double dt = 0.0;
};

/// dW = U1 sqrt(dt), dZ = dt^{3/2} (U1 + U2 / sqrt(3)) / 2 with U1, U2 i.i.d. N(0,1),
/// giving Var dZ = dt^3/3 and Cov(dW, dZ) = dt^2/2.
template <std::size_t M>
NoiseIncrement<M> sample_increment(RngStream& rng, double dt, SchemeOrder order) {
    NoiseIncrement<M> inc;
    inc.dt = dt;
    const double sdt = std::sqrt(dt);
    if (order == SchemeOrder::order1) {
        for (std::size_t j = 0; j < M; ++j) inc.dw[j] = sdt * rng.normal();
        return inc;
    }
    Vec<M> dz{};
    const double scale = 0.5 * dt * sdt;
    for (std::size_t j = 0; j < M; ++j) {
        const double u1 = rng.normal();
        const double u2 = rng.normal();
        inc.dw[j] = sdt * u1;
        dz[j] = scale * (u1 + u2 * (1.0 / std::numbers::sqrt3));
    }
    inc.dz = dz;
    return inc;
}

}  // namespace exitsim
