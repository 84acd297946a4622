#include "harmokit/attention.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace harmokit {

namespace {

double sorted_sum(std::vector<double> terms) {
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
}

std::vector<double> shifted_exp(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> e(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) e[k] = std::exp(logits[k] - mx);
    return e;
}

// Weight vectors keyed by the bit pattern of foreground sources at a pixel.
class PatternWeights {
public:
    explicit PatternWeights(std::span<const double> logits) : exps_(shifted_exp(logits)), k_(logits.size()) {}

    const std::vector<double>& get(std::uint64_t pattern) {
        auto it = cache_.find(pattern);
        if (it != cache_.end()) return it->second;
        std::vector<double> w(k_, 0.0);
        if (pattern == 0) {
            std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(k_));
        } else {
            std::vector<double> terms;
            for (std::size_t k = 0; k < k_; ++k) {
                if (pattern >> k & 1u) terms.push_back(exps_[k]);
            }
            const double z = sorted_sum(std::move(terms));
            for (std::size_t k = 0; k < k_; ++k) {
                if (pattern >> k & 1u) w[k] = exps_[k] / z;
            }
        }
        return cache_.emplace(pattern, std::move(w)).first->second;
    }

private:
    std::vector<double> exps_;
    std::size_t k_;
    std::unordered_map<std::uint64_t, std::vector<double>> cache_;
};

AttentionMap empty_map(const SourceStack& stack) {
    AttentionMap m;
    m.width = stack.width();
    m.height = stack.height();
    m.sources = stack.sources();
    m.weights.assign(m.sources * static_cast<std::size_t>(m.width) * static_cast<std::size_t>(m.height), 0.0);
    return m;
}

void check_volume_inputs(std::span<const Volume3D> sources, std::span<const Mask3D> masks) {
    if (sources.empty()) throw std::invalid_argument("fuse_volume needs at least one source");
    if (sources.size() != masks.size()) throw std::invalid_argument("fuse_volume: one mask per source required");
    for (std::size_t k = 0; k < sources.size(); ++k) {
        if (!(sources[k].dims() == sources.front().dims()) || !(masks[k].dims() == sources.front().dims())) {
            throw std::invalid_argument("fuse_volume: source and mask dims must all match");
        }
    }
}

}  // namespace

void validate(const SourceStack& stack) {
    const std::size_t k = stack.sources();
    if (k == 0) throw std::invalid_argument("source stack is empty");
    if (k > 64) throw std::invalid_argument("source stack supports at most 64 sources");
    if (stack.masks.size() != k || stack.logits.size() != k) {
        throw std::invalid_argument("source stack needs one mask and one logit per source");
    }
    const int w = stack.width(), h = stack.height();
    for (std::size_t i = 0; i < k; ++i) {
        const auto& s = stack.slices[i];
        const auto& m = stack.masks[i];
        if (s.width != w || s.height != h || m.width != w || m.height != h ||
            s.data.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h) || m.data.size() != s.data.size()) {
            throw std::invalid_argument("source stack slices and masks must share one shape");
        }
        if (!std::all_of(m.data.begin(), m.data.end(), [](std::uint8_t v) { return v <= 1; })) {
            throw std::invalid_argument("source masks must be binary");
        }
        if (!std::isfinite(stack.logits[i])) throw std::invalid_argument("source logits must be finite");
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax of empty logits");
    auto e = shifted_exp(logits);
    const double z = sorted_sum(e);
    for (double& v : e) v /= z;
    return e;
}

AttentionMap enhanced_attention(const SourceStack& stack) {
    validate(stack);
    AttentionMap map = empty_map(stack);
    PatternWeights table(stack.logits);
    const std::size_t k = stack.sources();
    const std::size_t n = static_cast<std::size_t>(map.width) * static_cast<std::size_t>(map.height);
    for (std::size_t p = 0; p < n; ++p) {
        std::uint64_t pattern = 0;
        for (std::size_t s = 0; s < k; ++s) pattern |= static_cast<std::uint64_t>(stack.masks[s].data[p]) << s;
        const auto& w = table.get(pattern);
        for (std::size_t s = 0; s < k; ++s) map.weights[s * n + p] = w[s];
    }
    return map;
}

AttentionMap legacy_attention(const SourceStack& stack) {
    validate(stack);
    AttentionMap map = empty_map(stack);
    const auto w = softmax(stack.logits);
    const std::size_t n = static_cast<std::size_t>(map.width) * static_cast<std::size_t>(map.height);
    const auto& first = stack.masks.front().data;
    for (std::size_t p = 0; p < n; ++p) {
        if (!first[p]) continue;
        for (std::size_t s = 0; s < w.size(); ++s) map.weights[s * n + p] = w[s];
    }
    return map;
}

Image2D fuse(const SourceStack& stack, const AttentionMap& attention) {
    validate(stack);
    if (attention.width != stack.width() || attention.height != stack.height() ||
        attention.sources != stack.sources() ||
        attention.weights.size() != attention.sources * stack.slices.front().data.size()) {
        throw std::invalid_argument("fuse: attention map does not match source stack");
    }
    Image2D out(stack.width(), stack.height());
    const std::size_t n = out.size();
    for (std::size_t p = 0; p < n; ++p) {
        double acc = 0.0;
        for (std::size_t s = 0; s < stack.sources(); ++s) acc += attention.weights[s * n + p] * stack.slices[s].data[p];
        out.data[p] = static_cast<float>(acc);
    }
    return out;
}

FusionMode parse_fusion_mode(std::string_view name) {
    if (name == "enhanced") return FusionMode::Enhanced;
    if (name == "legacy") return FusionMode::Legacy;
    throw std::invalid_argument("unknown fusion mode '" + std::string(name) + "'");
}

std::string_view to_string(FusionMode m) noexcept {
    return m == FusionMode::Enhanced ? "enhanced" : "legacy";
}

std::vector<double> mse_logits(std::span<const Image2D> sources, const Image2D& target) {
    std::vector<double> out;
    out.reserve(sources.size());
    for (const auto& s : sources) {
        if (s.data.size() != target.data.size()) throw std::invalid_argument("mse_logits: shape mismatch");
        double acc = 0.0;
        for (std::size_t p = 0; p < s.data.size(); ++p) {
            const double d = static_cast<double>(s.data[p]) - target.data[p];
            acc += d * d;
        }
        out.push_back(s.data.empty() ? 0.0 : -acc / static_cast<double>(s.data.size()));
    }
    return out;
}

FusedVolume fuse_volume(std::span<const Volume3D> sources, std::span<const Mask3D> masks, const LogitProvider& logits,
                        Orientation orientation, FusionMode mode, bool keep_weights) {
    check_volume_inputs(sources, masks);
    const Dims dims = sources.front().dims();
    const std::size_t k = sources.size();
    std::vector<float> out(dims.voxel_count(), 0.0f);
    std::vector<std::vector<float>> weight_bufs(keep_weights ? k : 0, std::vector<float>(dims.voxel_count(), 0.0f));

    const int slices = dims[slice_axis(orientation)];
    for (int idx = 0; idx < slices; ++idx) {
        SourceStack stack;
        for (std::size_t s = 0; s < k; ++s) {
            stack.slices.push_back(extract_slice(sources[s], orientation, idx).image);
            stack.masks.push_back(extract_mask_slice(masks[s], orientation, idx));
        }
        stack.logits = logits(idx, stack.slices);
        const AttentionMap attn = mode == FusionMode::Enhanced ? enhanced_attention(stack) : legacy_attention(stack);
        Image2D plane = fuse(stack, attn);

        if (mode == FusionMode::Enhanced) {
            for (std::size_t p = 0; p < plane.size(); ++p) {
                bool any = false;
                for (std::size_t s = 0; s < k && !any; ++s) any = stack.masks[s].data[p] != 0;
                if (!any) plane.data[p] = 0.0f;
            }
        }
        insert_slice(out, dims, orientation, idx, plane);

        for (std::size_t s = 0; s < weight_bufs.size(); ++s) {
            Image2D wplane(plane.width, plane.height);
            const auto src = attn.plane(s);
            for (std::size_t p = 0; p < wplane.size(); ++p) wplane.data[p] = static_cast<float>(src[p]);
            insert_slice(weight_bufs[s], dims, orientation, idx, wplane);
        }
    }

    FusedVolume result{Volume3D(dims, sources.front().spacing(), std::move(out)), {}};
    for (auto& buf : weight_bufs) result.weights.emplace_back(dims, sources.front().spacing(), std::move(buf));
    return result;
}

FusedVolume fuse_volume(std::span<const Volume3D> sources, std::span<const Mask3D> masks, std::span<const double> logits,
                        Orientation orientation, FusionMode mode, bool keep_weights) {
    if (logits.size() != sources.size()) throw std::invalid_argument("fuse_volume: one logit per source required");
    std::vector<double> fixed(logits.begin(), logits.end());
    return fuse_volume(
        sources, masks, [&fixed](int, std::span<const Image2D>) { return fixed; }, orientation, mode, keep_weights);
}

}  // namespace harmokit
