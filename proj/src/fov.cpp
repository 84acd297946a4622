#include "harmokit/fov.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace harmokit {

FovCropKind parse_fov_kind(std::string_view name) {
    if (name == "anterior") return FovCropKind::Anterior;
    if (name == "lateral") return FovCropKind::Lateral;
    throw std::invalid_argument("unknown FOV crop kind '" + std::string(name) + "'");
}

Side parse_side(std::string_view name) {
    if (name == "left") return Side::Left;
    if (name == "right") return Side::Right;
    if (name.empty() || name == "none") return Side::None;
    throw std::invalid_argument("unknown side '" + std::string(name) + "'");
}

std::string_view to_string(FovCropKind k) noexcept {
    return k == FovCropKind::Anterior ? "anterior" : "lateral";
}

std::string_view to_string(Side s) noexcept {
    switch (s) {
        case Side::None: return "none";
        case Side::Left: return "left";
        case Side::Right: return "right";
    }
    return "?";
}

void validate(const FovCropSpec& spec) {
    if (!(spec.fraction >= 0.0 && spec.fraction <= 0.5)) throw std::invalid_argument("crop fraction must be in [0, 0.5]");
    if (spec.kind == FovCropKind::Lateral && spec.side == Side::None) {
        throw std::invalid_argument("lateral crop requires side left or right");
    }
    if (spec.kind == FovCropKind::Anterior && spec.side != Side::None) {
        throw std::invalid_argument("anterior crop takes no side");
    }
}

int cropped_slab_count(const FovCropSpec& spec, const Dims& dims) {
    validate(spec);
    const int len = spec.kind == FovCropKind::Anterior ? dims.ny : dims.nx;
    return static_cast<int>(std::floor(spec.fraction * len));
}

FovCropResult crop_fov(const Volume3D& vol, const Mask3D& mask, const FovCropSpec& spec) {
    if (!(vol.dims() == mask.dims())) throw std::invalid_argument("crop_fov: volume and mask dims differ");
    const Dims d = vol.dims();
    const int slabs = cropped_slab_count(spec, d);

    auto in_region = [&](int x, int y) {
        if (spec.kind == FovCropKind::Anterior) return y >= d.ny - slabs;
        if (spec.side == Side::Left) return x < slabs;
        return x >= d.nx - slabs;
    };

    std::vector<float> img(vol.data().begin(), vol.data().end());
    std::vector<std::uint8_t> m(mask.data().begin(), mask.data().end());
    std::vector<std::uint8_t> region(m.size(), 0);
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                if (!in_region(x, y)) continue;
                const std::size_t i = linear_index(d, x, y, z);
                img[i] = 0.0f;
                m[i] = 0;
                region[i] = 1;
            }
        }
    }
    return {Volume3D(d, vol.spacing(), std::move(img)), Mask3D(d, std::move(m)), Mask3D(d, std::move(region))};
}

}  // namespace harmokit
