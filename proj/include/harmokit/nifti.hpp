#pragma once

#include <cstdint>
#include <filesystem>

#include "harmokit/volume.hpp"

namespace harmokit::nifti {

inline constexpr int kHeaderSize = 348;
inline constexpr int kVoxOffset = 352;

enum class Datatype : std::int16_t {
    UInt8 = 2,
    Int16 = 4,
    Int32 = 8,
    Float32 = 16,
    Float64 = 64,
};

// Reads a single-file NIfTI-1 volume. Accepts both byte orders; integer
// payloads are converted to float and scl_slope/scl_inter applied when the
// slope is non-zero.
Volume3D load(const std::filesystem::path& path);

// Little-endian NIfTI-1, magic "n+1", vox_offset 352, float32 payload.
void save(const Volume3D& vol, const std::filesystem::path& path);

// Same layout with a uint8 payload; used for label maps.
void save_labels(const LabelMap& labels, const std::filesystem::path& path);

}  // namespace harmokit::nifti
