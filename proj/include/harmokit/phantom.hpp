#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "harmokit/volume.hpp"

namespace harmokit {

enum class Contrast { T1w, T2w, FLAIR, PD };

Contrast parse_contrast(std::string_view name);
std::string_view to_string(Contrast c) noexcept;

enum class Tissue : std::uint8_t { Background = 0, CSF = 1, GrayMatter = 2, WhiteMatter = 3, DeepGray = 4 };

inline constexpr std::array<Tissue, 4> kTissueClasses = {Tissue::CSF, Tissue::GrayMatter, Tissue::WhiteMatter,
                                                         Tissue::DeepGray};

std::string_view to_string(Tissue t) noexcept;

// SYNTHETIC intensity table: per-contrast tissue means on a [0, 1] scale. These
// are design constants that fix tissue orderings, not measured MR values.
double tissue_intensity(Contrast c, Tissue t) noexcept;

// Texture standard deviation as a fraction of the contrast's dynamic range.
inline constexpr double kTextureFraction = 0.02;

struct PhantomSpec {
    Dims dims{64, 64, 64};
    Spacing spacing{1.0, 1.0, 1.0};
    std::uint64_t seed = 0;
    double subject_jitter = 0.05;  // in [0, 0.1]
    std::vector<Contrast> contrasts{Contrast::T1w, Contrast::T2w, Contrast::FLAIR};
};

struct PhantomOutput {
    std::vector<Contrast> contrasts;
    std::vector<Volume3D> images;  // parallel to `contrasts`
    LabelMap labels;
    Mask3D mask;

    const Volume3D& image(Contrast c) const;
};

// Nested ellipsoids: brain envelope (gray matter rim) around a white matter
// core that holds two deep gray nuclei and two ventricles.
PhantomOutput generate_phantom(const PhantomSpec& spec);

struct ScannerProfile {
    double gain = 1.0;
    double gamma = 1.0;            // in [0.5, 2]
    double field_strength = 0.0;   // peak log-amplitude of the smooth field; 0 disables it
    std::uint64_t seed = 0;
};

/// Emulates an acquisition on another scanner:
/// v' = gain * normalize(v)^gamma * exp(field_strength * P(x)),
/// with normalize the min-max map to [0, 1] and P a seeded quadratic
/// polynomial scaled to max |P| = 1 over the grid.
Volume3D scanner_transform(const Volume3D& vol, const ScannerProfile& profile);

}  // namespace harmokit
