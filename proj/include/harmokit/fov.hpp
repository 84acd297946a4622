#pragma once

#include <string_view>

#include "harmokit/volume.hpp"

namespace harmokit {

enum class FovCropKind { Anterior, Lateral };
enum class Side { None, Left, Right };

FovCropKind parse_fov_kind(std::string_view name);
Side parse_side(std::string_view name);
std::string_view to_string(FovCropKind k) noexcept;
std::string_view to_string(Side s) noexcept;

struct FovCropSpec {
    FovCropKind kind = FovCropKind::Anterior;
    double fraction = 0.0;  // in [0, 0.5]
    Side side = Side::None; // required iff Lateral
};

void validate(const FovCropSpec& spec);

struct FovCropResult {
    Volume3D image;
    Mask3D mask;
    Mask3D cropped_region;
};

// Number of zeroed slabs: floor(fraction * axis length).
int cropped_slab_count(const FovCropSpec& spec, const Dims& dims);

/// Zeroes a slab in both image and mask. Under RAS, Anterior removes the
/// highest y indices, Lateral/Left the lowest x and Lateral/Right the highest
/// x. The cropped-region mask marks the whole slab.
FovCropResult crop_fov(const Volume3D& vol, const Mask3D& mask, const FovCropSpec& spec);

}  // namespace harmokit
