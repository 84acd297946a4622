#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "harmokit/volume.hpp"

namespace harmokit {

enum class ArtifactKind { Noise, Ghosting, BiasField, Anisotropy };

inline constexpr ArtifactKind kArtifactKinds[] = {ArtifactKind::Noise, ArtifactKind::Ghosting, ArtifactKind::BiasField,
                                                  ArtifactKind::Anisotropy};

ArtifactKind parse_artifact_kind(std::string_view name);
std::string_view to_string(ArtifactKind k) noexcept;

struct ArtifactSpec {
    ArtifactKind kind = ArtifactKind::Noise;
    double severity = 0.0;  // in [0, 1]; 0 is the identity
    std::uint64_t seed = 0;
    int axis = 1;           // 0 = x, 1 = y, 2 = z; used by Ghosting and Anisotropy
};

struct SeverityScore {
    double value = 0.0;
};

// Severity-to-parameter maps. Each is linear in s from the identity at s = 0
// to a declared maximum at s = 1.
namespace artifact_range {
inline constexpr double kMaxNoiseSigma = 0.15;      // fraction of dynamic range
inline constexpr int kMaxExtraGhosts = 9;           // n_ghosts = round(1 + 9 s)
inline constexpr double kMaxGhostIntensity = 0.6;
inline constexpr double kMaxBiasCoefficient = 0.5;  // order-3 polynomial in log space
inline constexpr int kBiasOrder = 3;
inline constexpr double kMaxExtraDownsample = 3.0;  // d = 1 + 3 s
}  // namespace artifact_range

struct ArtifactParams {
    double noise_sigma_fraction = 0.0;
    int ghost_count = 1;
    double ghost_intensity = 0.0;
    double bias_coefficient_scale = 0.0;
    double downsample_factor = 1.0;
};

ArtifactParams severity_to_params(ArtifactKind kind, double severity);

// Multiplicative bias field exp(P) rescaled to unit mean, P an order-3
// polynomial with coefficients uniform in [-scale, scale].
std::vector<double> bias_field(const Dims& dims, double coefficient_scale, std::uint64_t seed);

/// Applies one artifact. Noise adds Gaussian noise; Ghosting attenuates every
/// n-th k-space line of the 1D DFT along `axis` (DC kept), giving n ghosts;
/// BiasField multiplies by `bias_field`; Anisotropy box-averages by factor d
/// along `axis` then linearly re-interpolates. Severity 0 returns `vol`
/// unchanged and the returned score equals the severity.
std::pair<Volume3D, SeverityScore> apply_artifact(const Volume3D& vol, const ArtifactSpec& spec);

// Severity of the positive sample in a triplet.
inline constexpr double kPositiveSeverity = 0.02;

struct Triplet {
    Volume3D anchor;
    Volume3D positive;
    Volume3D negative;
    double anchor_severity = 0.0;
    double positive_severity = kPositiveSeverity;
    double negative_severity = 0.0;
};

// Anchor = clean input, positive = clean + Noise at s = 0.02, negative =
// `kind` at s_neg. Ghosting/anisotropy use `axis`.
Triplet make_triplet(const Volume3D& vol, ArtifactKind kind, double negative_severity, std::uint64_t seed, int axis = 1);

}  // namespace harmokit
