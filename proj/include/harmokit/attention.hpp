#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "harmokit/volume.hpp"

namespace harmokit {

/// K co-registered source slices with their foreground masks and one
/// similarity logit per source (constant over the slice).
struct SourceStack {
    std::vector<Image2D> slices;
    std::vector<Mask2D> masks;
    std::vector<double> logits;

    int width() const noexcept { return slices.empty() ? 0 : slices.front().width; }
    int height() const noexcept { return slices.empty() ? 0 : slices.front().height; }
    std::size_t sources() const noexcept { return slices.size(); }
};

// Throws std::invalid_argument unless K >= 1, every slice and mask share one
// shape, masks are binary and logits are finite.
void validate(const SourceStack& stack);

/// Per-pixel fusion weights, one plane per source.
struct AttentionMap {
    int width = 0;
    int height = 0;
    std::size_t sources = 0;
    std::vector<double> weights;  // plane-major: weights[k * width * height + pixel]

    double at(std::size_t k, std::size_t pixel) const noexcept {
        return weights[k * static_cast<std::size_t>(width) * static_cast<std::size_t>(height) + pixel];
    }
    std::span<const double> plane(std::size_t k) const noexcept {
        const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
        return {weights.data() + k * n, n};
    }
};

// Temperature-1 softmax. Sums run over sorted terms so the result is
// bitwise invariant under permutation of the logits.
std::vector<double> softmax(std::span<const double> logits);

/// Foreground/background-aware attention:
///  - all sources background at a pixel: uniform 1/K;
///  - all sources foreground: softmax(logits);
///  - mixed: softmax restricted to the foreground sources and renormalized,
///    background sources get exactly 0.
AttentionMap enhanced_attention(const SourceStack& stack);

/// Baseline that trusts only the first source's mask: softmax(logits) inside
/// source 0's foreground, all-zero weights elsewhere.
AttentionMap legacy_attention(const SourceStack& stack);

// fused(p) = sum_k w_k(p) * source_k(p).
Image2D fuse(const SourceStack& stack, const AttentionMap& attention);

enum class FusionMode { Enhanced, Legacy };

FusionMode parse_fusion_mode(std::string_view name);
std::string_view to_string(FusionMode m) noexcept;

// Logits for one slice given the stack's source slices.
using LogitProvider = std::function<std::vector<double>(int slice_index, std::span<const Image2D> sources)>;

// Negative mean-squared difference of each source slice to `target`.
std::vector<double> mse_logits(std::span<const Image2D> sources, const Image2D& target);

struct FusedVolume {
    Volume3D image;
    std::vector<Volume3D> weights;  // one per source, filled only when requested
};

/// Slice-wise attention and fusion along `orientation`. Pixels outside every
/// source's foreground are set to 0 (enhanced) and the legacy path zeroes
/// everything outside source 0's mask.
FusedVolume fuse_volume(std::span<const Volume3D> sources, std::span<const Mask3D> masks,
                        const LogitProvider& logits, Orientation orientation, FusionMode mode,
                        bool keep_weights = false);

FusedVolume fuse_volume(std::span<const Volume3D> sources, std::span<const Mask3D> masks,
                        std::span<const double> logits, Orientation orientation, FusionMode mode,
                        bool keep_weights = false);

}  // namespace harmokit
