#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace harmokit {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Every draw is a pure function of (key, counter), so a voxel's random value
/// depends only on the seed, the stream id and the voxel index. Results are
/// identical across platforms, thread counts and iteration orders.
class Philox {
public:
    using Block = std::array<std::uint32_t, 4>;

    // `stream` separates independent uses of one seed (e.g. texture vs field).
    constexpr Philox(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_lo_(static_cast<std::uint32_t>(stream)),
          stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

    constexpr Block block(std::uint64_t counter) const noexcept {
        Block ctr{static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32), stream_lo_,
                  stream_hi_};
        std::array<std::uint32_t, 2> key = key_;
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }

    // Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform(std::uint64_t counter) const noexcept {
        const Block b = block(counter);
        return to_open_unit(b[0], b[1]);
    }

    // Standard normal via Box-Muller on the first two 64-bit halves of a block.
    double normal(std::uint64_t counter) const noexcept {
        const Block b = block(counter);
        const double u1 = to_open_unit(b[0], b[1]);
        const double u2 = to_open_unit(b[2], b[3]);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static constexpr Block single_round(const Block& c, const std::array<std::uint32_t, 2>& k) noexcept {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    }

    static double to_open_unit(std::uint32_t lo, std::uint32_t hi) noexcept {
        const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t stream_lo_;
    std::uint32_t stream_hi_;
};

// Stream ids used across the library; kept in one place so two subsystems
// never draw from the same sequence for one seed.
namespace rng_stream {
inline constexpr std::uint64_t kPhantomShape = 1;
inline constexpr std::uint64_t kPhantomTexture = 2;
inline constexpr std::uint64_t kScannerField = 3;
inline constexpr std::uint64_t kArtifactNoise = 10;
inline constexpr std::uint64_t kArtifactBias = 11;
inline constexpr std::uint64_t kTriplet = 12;
inline constexpr std::uint64_t kHarness = 20;
}  // namespace rng_stream

}  // namespace harmokit
