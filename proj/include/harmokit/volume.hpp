#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace harmokit {

struct Dims {
    int nx = 1;
    int ny = 1;
    int nz = 1;

    std::size_t voxel_count() const noexcept {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    int operator[](int axis) const noexcept { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
    friend bool operator==(const Dims&, const Dims&) = default;
};

// Millimetres per voxel along x, y, z.
using Spacing = std::array<double, 3>;

// Linear index with x fastest, matching the NIfTI on-disk order.
inline std::size_t linear_index(const Dims& d, int x, int y, int z) noexcept {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(d.nx) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(d.ny) * static_cast<std::size_t>(z));
}

/// Dense scalar 3D image in RAS orientation (x right, y anterior, z superior).
///
/// Immutable after construction; every voxel is finite.
class Volume3D {
public:
    Volume3D() = default;
    Volume3D(Dims dims, Spacing spacing, std::vector<float> data);
    Volume3D(Dims dims, Spacing spacing, float fill);

    const Dims& dims() const noexcept { return dims_; }
    const Spacing& spacing() const noexcept { return spacing_; }
    std::span<const float> data() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }

    float operator()(int x, int y, int z) const noexcept { return data_[linear_index(dims_, x, y, z)]; }
    float operator[](std::size_t i) const noexcept { return data_[i]; }

    // Moves the voxel buffer out; the volume is left empty.
    std::vector<float> release() && { return std::move(data_); }

private:
    Dims dims_{};
    Spacing spacing_{1.0, 1.0, 1.0};
    std::vector<float> data_;
};

/// Binary foreground mask (1 = foreground) over a volume grid.
class Mask3D {
public:
    Mask3D() = default;
    Mask3D(Dims dims, std::vector<std::uint8_t> data);
    Mask3D(Dims dims, std::uint8_t fill);

    const Dims& dims() const noexcept { return dims_; }
    std::span<const std::uint8_t> data() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t count() const noexcept;

    std::uint8_t operator()(int x, int y, int z) const noexcept { return data_[linear_index(dims_, x, y, z)]; }
    std::uint8_t operator[](std::size_t i) const noexcept { return data_[i]; }

    friend bool operator==(const Mask3D&, const Mask3D&) = default;

private:
    Dims dims_{};
    std::vector<std::uint8_t> data_;
};

/// Integer tissue label map; 0 is background.
struct LabelMap {
    Dims dims{};
    Spacing spacing{1.0, 1.0, 1.0};
    std::vector<std::uint8_t> data;

    std::uint8_t operator()(int x, int y, int z) const noexcept { return data[linear_index(dims, x, y, z)]; }
};

// Rounds float voxels to labels; throws if any voxel is not an integer in [0, 255].
LabelMap labels_from_volume(const Volume3D& vol);
Volume3D volume_from_labels(const LabelMap& labels);

// Row-major 2D grid: element (i, j) at i + width * j.
struct Image2D {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    Image2D() = default;
    Image2D(int w, int h, float fill = 0.0f) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    float& at(int i, int j) noexcept { return data[static_cast<std::size_t>(i) + static_cast<std::size_t>(width) * j]; }
    float at(int i, int j) const noexcept { return data[static_cast<std::size_t>(i) + static_cast<std::size_t>(width) * j]; }
    std::size_t size() const noexcept { return data.size(); }
};

struct Mask2D {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Mask2D() = default;
    Mask2D(int w, int h, std::uint8_t fill = 0) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t& at(int i, int j) noexcept { return data[static_cast<std::size_t>(i) + static_cast<std::size_t>(width) * j]; }
    std::uint8_t at(int i, int j) const noexcept { return data[static_cast<std::size_t>(i) + static_cast<std::size_t>(width) * j]; }
    std::size_t size() const noexcept { return data.size(); }
};

// Axial slices are (x, y) grids indexed by z, coronal (x, z) by y, sagittal (y, z) by x.
enum class Orientation { Axial, Coronal, Sagittal };

Orientation parse_orientation(std::string_view name);
std::string_view to_string(Orientation o) noexcept;

// Volume axis a slice index runs along.
int slice_axis(Orientation o) noexcept;

struct SliceView {
    Orientation orientation = Orientation::Axial;
    int index = 0;
    Image2D image;
};

SliceView extract_slice(const Volume3D& vol, Orientation orientation, int index);
Mask2D extract_mask_slice(const Mask3D& mask, Orientation orientation, int index);

// Writes a 2D plane back into a flat buffer laid out like `dims`.
void insert_slice(std::span<float> dst, const Dims& dims, Orientation orientation, int index, const Image2D& plane);

// Indices of the `count` centred slices along an axis of length `axis_len`.
std::vector<int> middle_slices(int axis_len, int count);

// Linear-interpolated percentile (q in [0, 100]) over all voxels.
double percentile(std::span<const float> values, double q);

// value > threshold_fraction * (99th percentile), before component filtering.
Mask3D threshold_mask(const Volume3D& vol, double threshold_fraction);

// Keeps the largest 6-connected foreground component; ties go to the component
// containing the lowest linear index.
Mask3D largest_component(const Mask3D& mask);

Mask3D foreground_mask(const Volume3D& vol, double threshold_fraction);

enum class RegionLabel : std::uint8_t { AllBackground = 0, AllForeground = 1, Mixed = 2 };

struct RegionPartition {
    Dims dims{};
    std::vector<RegionLabel> labels;

    std::size_t count(RegionLabel l) const noexcept;
};

// Classifies each element by how many of the masks mark it foreground. All
// spans must have equal length.
std::vector<RegionLabel> partition_labels(std::span<const std::span<const std::uint8_t>> masks);

RegionPartition mask_union_partition(std::span<const Mask3D> masks);

}  // namespace harmokit
