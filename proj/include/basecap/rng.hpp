#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace basecap {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A stream is
/// addressed by (key, counter), so path p can be generated on any thread.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit Philox4x32(std::uint64_t seed, std::uint32_t stream_tag = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {
        // Mix the tag into the key so independent purposes never share a stream.
        key_[0] ^= stream_tag * 0x9E3779B9u;
        key_[1] ^= stream_tag * 0x85EBCA6Bu;
    }

    Counter operator()(Counter ctr) const {
        Key k = key_;
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, k);
            k[0] += kWeyl0;
            k[1] += kWeyl1;
        }
        return ctr;
    }

    /// Two uniforms in (0,1) with 53 random bits each, from counter (a, b, c, 0).
    std::array<double, 2> uniforms(std::uint32_t a, std::uint32_t b, std::uint32_t c) const {
        const Counter out = (*this)(Counter{a, b, c, 0});
        return {to_open_unit(out[0], out[1]), to_open_unit(out[2], out[3])};
    }

    /// One standard normal by Box-Muller on counter (a, b, c).
    double normal(std::uint32_t a, std::uint32_t b, std::uint32_t c) const {
        const auto u = uniforms(a, b, c);
        return std::sqrt(-2.0 * std::log(u[0])) * std::cos(2.0 * std::numbers::pi * u[1]);
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static Counter single_round(const Counter& c, const Key& k) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    }

    static double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
        const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    Key key_;
};

}  // namespace basecap
