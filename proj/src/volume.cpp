#include "harmokit/volume.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

namespace harmokit {

namespace {

void check_dims(const Dims& d) {
    if (d.nx < 1 || d.ny < 1 || d.nz < 1) {
        throw std::invalid_argument("volume dims must be >= 1, got " + std::to_string(d.nx) + "x" +
                                    std::to_string(d.ny) + "x" + std::to_string(d.nz));
    }
}

// Plane dimensions for an orientation: (width, height).
std::pair<int, int> plane_shape(const Dims& d, Orientation o) {
    switch (o) {
        case Orientation::Axial: return {d.nx, d.ny};
        case Orientation::Coronal: return {d.nx, d.nz};
        case Orientation::Sagittal: return {d.ny, d.nz};
    }
    return {0, 0};
}

void check_slice_index(const Dims& d, Orientation o, int index) {
    const int len = d[slice_axis(o)];
    if (index < 0 || index >= len) {
        throw std::out_of_range(std::string(to_string(o)) + " slice index " + std::to_string(index) +
                                " outside [0, " + std::to_string(len) + ")");
    }
}

// Maps plane coordinate (i, j) at `index` to the volume linear index.
inline std::size_t plane_to_linear(const Dims& d, Orientation o, int index, int i, int j) {
    switch (o) {
        case Orientation::Axial: return linear_index(d, i, j, index);
        case Orientation::Coronal: return linear_index(d, i, index, j);
        case Orientation::Sagittal: return linear_index(d, index, i, j);
    }
    return 0;
}

}  // namespace

Volume3D::Volume3D(Dims dims, Spacing spacing, std::vector<float> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    check_dims(dims_);
    if (data_.size() != dims_.voxel_count()) {
        throw std::invalid_argument("volume data length " + std::to_string(data_.size()) + " != voxel count " +
                                    std::to_string(dims_.voxel_count()));
    }
    for (double s : spacing_) {
        if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("voxel spacing must be finite and positive");
    }
    if (!std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); })) {
        throw std::invalid_argument("volume contains non-finite voxels");
    }
}

Volume3D::Volume3D(Dims dims, Spacing spacing, float fill)
    : Volume3D(dims, spacing, std::vector<float>((check_dims(dims), dims.voxel_count()), fill)) {}

Mask3D::Mask3D(Dims dims, std::vector<std::uint8_t> data) : dims_(dims), data_(std::move(data)) {
    check_dims(dims_);
    if (data_.size() != dims_.voxel_count()) throw std::invalid_argument("mask data length does not match dims");
    if (!std::all_of(data_.begin(), data_.end(), [](std::uint8_t v) { return v <= 1; })) {
        throw std::invalid_argument("mask values must be 0 or 1");
    }
}

Mask3D::Mask3D(Dims dims, std::uint8_t fill)
    : Mask3D(dims, std::vector<std::uint8_t>((check_dims(dims), dims.voxel_count()), fill)) {}

std::size_t Mask3D::count() const noexcept {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

LabelMap labels_from_volume(const Volume3D& vol) {
    LabelMap out{vol.dims(), vol.spacing(), std::vector<std::uint8_t>(vol.size())};
    for (std::size_t i = 0; i < vol.size(); ++i) {
        const float v = vol[i];
        if (v < 0.0f || v > 255.0f || std::nearbyint(v) != v) {
            throw std::invalid_argument("label volume voxel " + std::to_string(i) + " is not an integer in [0, 255]");
        }
        out.data[i] = static_cast<std::uint8_t>(v);
    }
    return out;
}

Volume3D volume_from_labels(const LabelMap& labels) {
    std::vector<float> data(labels.data.begin(), labels.data.end());
    return Volume3D(labels.dims, labels.spacing, std::move(data));
}

Orientation parse_orientation(std::string_view name) {
    if (name == "axial") return Orientation::Axial;
    if (name == "coronal") return Orientation::Coronal;
    if (name == "sagittal") return Orientation::Sagittal;
    throw std::invalid_argument("unknown orientation '" + std::string(name) + "'");
}

std::string_view to_string(Orientation o) noexcept {
    switch (o) {
        case Orientation::Axial: return "axial";
        case Orientation::Coronal: return "coronal";
        case Orientation::Sagittal: return "sagittal";
    }
    return "?";
}

int slice_axis(Orientation o) noexcept {
    switch (o) {
        case Orientation::Axial: return 2;
        case Orientation::Coronal: return 1;
        case Orientation::Sagittal: return 0;
    }
    return 2;
}

SliceView extract_slice(const Volume3D& vol, Orientation orientation, int index) {
    check_slice_index(vol.dims(), orientation, index);
    const auto [w, h] = plane_shape(vol.dims(), orientation);
    SliceView view{orientation, index, Image2D(w, h)};
    const auto src = vol.data();
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) view.image.at(i, j) = src[plane_to_linear(vol.dims(), orientation, index, i, j)];
    }
    return view;
}

Mask2D extract_mask_slice(const Mask3D& mask, Orientation orientation, int index) {
    check_slice_index(mask.dims(), orientation, index);
    const auto [w, h] = plane_shape(mask.dims(), orientation);
    Mask2D out(w, h);
    const auto src = mask.data();
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) out.at(i, j) = src[plane_to_linear(mask.dims(), orientation, index, i, j)];
    }
    return out;
}

void insert_slice(std::span<float> dst, const Dims& dims, Orientation orientation, int index, const Image2D& plane) {
    check_slice_index(dims, orientation, index);
    const auto [w, h] = plane_shape(dims, orientation);
    if (plane.width != w || plane.height != h || dst.size() != dims.voxel_count()) {
        throw std::invalid_argument("insert_slice: plane shape does not match volume");
    }
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) dst[plane_to_linear(dims, orientation, index, i, j)] = plane.at(i, j);
    }
}

std::vector<int> middle_slices(int axis_len, int count) {
    if (count < 1 || count > axis_len) {
        throw std::invalid_argument("middle_slices: count must be in [1, " + std::to_string(axis_len) + "]");
    }
    const int start = (axis_len - count) / 2;
    std::vector<int> idx(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) idx[static_cast<std::size_t>(k)] = start + k;
    return idx;
}

double percentile(std::span<const float> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile of empty range");
    if (q < 0.0 || q > 100.0) throw std::invalid_argument("percentile q must be in [0, 100]");
    std::vector<float> v(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    const double a = v[lo];
    if (hi == lo) return a;
    const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
    return a + (pos - static_cast<double>(lo)) * (b - a);
}

Mask3D threshold_mask(const Volume3D& vol, double threshold_fraction) {
    if (!(threshold_fraction >= 0.0 && threshold_fraction < 1.0)) {
        throw std::invalid_argument("threshold_fraction must be in [0, 1)");
    }
    const double robust_max = percentile(vol.data(), 99.0);
    const double cut = threshold_fraction * robust_max;
    std::vector<std::uint8_t> m(vol.size());
    const auto d = vol.data();
    for (std::size_t i = 0; i < d.size(); ++i) m[i] = static_cast<double>(d[i]) > cut ? 1 : 0;
    // A non-positive robust max means no meaningful foreground.
    if (!(robust_max > 0.0)) std::fill(m.begin(), m.end(), std::uint8_t{0});
    return Mask3D(vol.dims(), std::move(m));
}

Mask3D largest_component(const Mask3D& mask) {
    const Dims d = mask.dims();
    const auto in = mask.data();
    std::vector<std::int32_t> comp(in.size(), -1);
    std::int32_t best_id = -1;
    std::size_t best_size = 0;
    std::int32_t next_id = 0;
    std::deque<std::size_t> queue;

    const std::size_t sx = 1;
    const std::size_t sy = static_cast<std::size_t>(d.nx);
    const std::size_t sz = static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.ny);

    for (std::size_t seed = 0; seed < in.size(); ++seed) {
        if (!in[seed] || comp[seed] >= 0) continue;
        const std::int32_t id = next_id++;
        std::size_t size = 0;
        comp[seed] = id;
        queue.push_back(seed);
        while (!queue.empty()) {
            const std::size_t p = queue.front();
            queue.pop_front();
            ++size;
            const int x = static_cast<int>(p % sy);
            const int y = static_cast<int>((p / sy) % static_cast<std::size_t>(d.ny));
            const int z = static_cast<int>(p / sz);
            auto visit = [&](std::size_t q) {
                if (in[q] && comp[q] < 0) {
                    comp[q] = id;
                    queue.push_back(q);
                }
            };
            if (x > 0) visit(p - sx);
            if (x + 1 < d.nx) visit(p + sx);
            if (y > 0) visit(p - sy);
            if (y + 1 < d.ny) visit(p + sy);
            if (z > 0) visit(p - sz);
            if (z + 1 < d.nz) visit(p + sz);
        }
        if (size > best_size) {
            best_size = size;
            best_id = id;
        }
    }

    std::vector<std::uint8_t> out(in.size(), 0);
    if (best_id >= 0) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = comp[i] == best_id ? 1 : 0;
    }
    return Mask3D(d, std::move(out));
}

Mask3D foreground_mask(const Volume3D& vol, double threshold_fraction) {
    return largest_component(threshold_mask(vol, threshold_fraction));
}

std::size_t RegionPartition::count(RegionLabel l) const noexcept {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
}

std::vector<RegionLabel> partition_labels(std::span<const std::span<const std::uint8_t>> masks) {
    if (masks.empty()) throw std::invalid_argument("partition needs at least one mask");
    const std::size_t n = masks.front().size();
    for (const auto& m : masks) {
        if (m.size() != n) throw std::invalid_argument("partition masks have mismatched sizes");
    }
    const std::size_t k = masks.size();
    std::vector<RegionLabel> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t fg = 0;
        for (const auto& m : masks) fg += m[i] ? 1 : 0;
        out[i] = fg == 0 ? RegionLabel::AllBackground : (fg == k ? RegionLabel::AllForeground : RegionLabel::Mixed);
    }
    return out;
}

RegionPartition mask_union_partition(std::span<const Mask3D> masks) {
    if (masks.empty()) throw std::invalid_argument("mask_union_partition needs at least one mask");
    std::vector<std::span<const std::uint8_t>> views;
    views.reserve(masks.size());
    for (const auto& m : masks) {
        if (!(m.dims() == masks.front().dims())) throw std::invalid_argument("mask_union_partition: dims mismatch");
        views.push_back(m.data());
    }
    return RegionPartition{masks.front().dims(), partition_labels(views)};
}

}  // namespace harmokit
