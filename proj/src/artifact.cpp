#include "harmokit/artifact.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "harmokit/fft.hpp"
#include "harmokit/rng.hpp"
#include "polynomial_field.hpp"

namespace harmokit {

namespace {

void check_severity(double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("artifact severity must be in [0, 1]");
}

void check_axis(int axis) {
    if (axis < 0 || axis > 2) throw std::invalid_argument("artifact axis must be 0 (x), 1 (y) or 2 (z)");
}

std::size_t axis_stride(const Dims& d, int axis) {
    if (axis == 0) return 1;
    if (axis == 1) return static_cast<std::size_t>(d.nx);
    return static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.ny);
}

// Calls fn(start) for the first element of every line along `axis`.
template <typename Fn>
void for_each_line(const Dims& d, int axis, Fn&& fn) {
    const int a1 = axis == 0 ? 1 : 0;
    const int a2 = axis == 2 ? 1 : 2;
    const std::size_t s1 = axis_stride(d, a1);
    const std::size_t s2 = axis_stride(d, a2);
    for (int j = 0; j < d[a2]; ++j) {
        for (int i = 0; i < d[a1]; ++i) fn(static_cast<std::size_t>(i) * s1 + static_cast<std::size_t>(j) * s2);
    }
}

std::vector<float> add_noise(const Volume3D& vol, double sigma_fraction, std::uint64_t seed) {
    const auto src = vol.data();
    const auto [lo, hi] = std::minmax_element(src.begin(), src.end());
    const double sigma = sigma_fraction * (static_cast<double>(*hi) - *lo);
    const Philox rng(seed, rng_stream::kArtifactNoise);
    std::vector<float> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<float>(src[i] + sigma * rng.normal(i));
    return out;
}

std::vector<float> add_ghosts(const Volume3D& vol, int ghosts, double intensity, int axis) {
    const Dims d = vol.dims();
    const int n = d[axis];
    const auto src = vol.data();
    std::vector<std::complex<double>> buf(src.begin(), src.end());
    fft::transform_axis(buf, d.nx, d.ny, d.nz, axis, false);

    // Symmetric selection keeps the spectrum Hermitian, so the result is real.
    std::vector<double> gain(static_cast<std::size_t>(n), 1.0);
    for (int k = 1; k < n; ++k) {
        const int folded = std::min(k, n - k);
        if (folded % ghosts == 0) gain[static_cast<std::size_t>(k)] = 1.0 - intensity;
    }
    const std::size_t stride = axis_stride(d, axis);
    for_each_line(d, axis, [&](std::size_t start) {
        for (int k = 0; k < n; ++k) buf[start + static_cast<std::size_t>(k) * stride] *= gain[static_cast<std::size_t>(k)];
    });

    fft::transform_axis(buf, d.nx, d.ny, d.nz, axis, true);
    std::vector<float> out(src.size());
    const double inv_n = 1.0 / n;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(buf[i].real() * inv_n);
    return out;
}

std::vector<float> apply_bias(const Volume3D& vol, double scale, std::uint64_t seed) {
    const auto field = bias_field(vol.dims(), scale, seed);
    const auto src = vol.data();
    std::vector<float> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<float>(src[i] * field[i]);
    return out;
}

struct Cell {
    std::vector<std::pair<int, double>> taps;  // (voxel, overlap length)
    double centre = 0.0;
};

// Box cells of width `factor` covering [0, n); the last may be partial.
std::vector<Cell> box_cells(int n, double factor) {
    std::vector<Cell> cells;
    for (double lo = 0.0; lo < n - 1e-9; lo += factor) {
        const double hi = std::min(lo + factor, static_cast<double>(n));
        Cell c;
        c.centre = 0.5 * (lo + hi);
        for (int i = static_cast<int>(std::floor(lo)); i < n && i < hi; ++i) {
            const double w = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
            if (w > 0.0) c.taps.emplace_back(i, w);
        }
        cells.push_back(std::move(c));
    }
    return cells;
}

std::vector<float> apply_anisotropy(const Volume3D& vol, double factor, int axis) {
    const Dims d = vol.dims();
    const int n = d[axis];
    const auto cells = box_cells(n, factor);
    const std::size_t stride = axis_stride(d, axis);
    const auto src = vol.data();
    std::vector<float> out(src.size());
    std::vector<double> low(cells.size());

    // Per-voxel interpolation bracket (lower cell, weight of upper cell).
    std::vector<std::pair<std::size_t, double>> bracket(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double c = i + 0.5;
        std::size_t j = 0;
        while (j + 1 < cells.size() && cells[j + 1].centre <= c) ++j;
        double t = 0.0;
        if (j + 1 < cells.size() && c > cells[j].centre) t = (c - cells[j].centre) / (cells[j + 1].centre - cells[j].centre);
        bracket[static_cast<std::size_t>(i)] = {j, t};
    }

    for_each_line(d, axis, [&](std::size_t start) {
        for (std::size_t j = 0; j < cells.size(); ++j) {
            double acc = 0.0, wsum = 0.0;
            for (const auto& [i, w] : cells[j].taps) {
                acc += w * src[start + static_cast<std::size_t>(i) * stride];
                wsum += w;
            }
            low[j] = acc / wsum;
        }
        for (int i = 0; i < n; ++i) {
            const auto [j, t] = bracket[static_cast<std::size_t>(i)];
            const double v = t > 0.0 ? low[j] + t * (low[j + 1] - low[j]) : low[j];
            out[start + static_cast<std::size_t>(i) * stride] = static_cast<float>(v);
        }
    });
    return out;
}

}  // namespace

ArtifactKind parse_artifact_kind(std::string_view name) {
    if (name == "noise") return ArtifactKind::Noise;
    if (name == "ghosting") return ArtifactKind::Ghosting;
    if (name == "bias_field") return ArtifactKind::BiasField;
    if (name == "anisotropy") return ArtifactKind::Anisotropy;
    throw std::invalid_argument("unknown artifact kind '" + std::string(name) + "'");
}

std::string_view to_string(ArtifactKind k) noexcept {
    switch (k) {
        case ArtifactKind::Noise: return "noise";
        case ArtifactKind::Ghosting: return "ghosting";
        case ArtifactKind::BiasField: return "bias_field";
        case ArtifactKind::Anisotropy: return "anisotropy";
    }
    return "?";
}

ArtifactParams severity_to_params(ArtifactKind kind, double s) {
    check_severity(s);
    using namespace artifact_range;
    ArtifactParams p;
    switch (kind) {
        case ArtifactKind::Noise: p.noise_sigma_fraction = s * kMaxNoiseSigma; break;
        case ArtifactKind::Ghosting:
            p.ghost_count = static_cast<int>(std::lround(1.0 + kMaxExtraGhosts * s));
            p.ghost_intensity = kMaxGhostIntensity * s;
            break;
        case ArtifactKind::BiasField: p.bias_coefficient_scale = kMaxBiasCoefficient * s; break;
        case ArtifactKind::Anisotropy: p.downsample_factor = 1.0 + kMaxExtraDownsample * s; break;
    }
    return p;
}

std::vector<double> bias_field(const Dims& dims, double coefficient_scale, std::uint64_t seed) {
    const Philox rng(seed, rng_stream::kArtifactBias);
    const int order = artifact_range::kBiasOrder;
    auto field = detail::evaluate_polynomial(dims, order, detail::random_coefficients(order, coefficient_scale, rng));
    double sum = 0.0;
    for (double& f : field) {
        f = std::exp(f);
        sum += f;
    }
    const double mean = sum / static_cast<double>(field.size());
    for (double& f : field) f /= mean;
    return field;
}

std::pair<Volume3D, SeverityScore> apply_artifact(const Volume3D& vol, const ArtifactSpec& spec) {
    check_severity(spec.severity);
    check_axis(spec.axis);
    if (spec.severity == 0.0) return {vol, SeverityScore{0.0}};

    const ArtifactParams p = severity_to_params(spec.kind, spec.severity);
    std::vector<float> out;
    switch (spec.kind) {
        case ArtifactKind::Noise: out = add_noise(vol, p.noise_sigma_fraction, spec.seed); break;
        case ArtifactKind::Ghosting: out = add_ghosts(vol, p.ghost_count, p.ghost_intensity, spec.axis); break;
        case ArtifactKind::BiasField: out = apply_bias(vol, p.bias_coefficient_scale, spec.seed); break;
        case ArtifactKind::Anisotropy: out = apply_anisotropy(vol, p.downsample_factor, spec.axis); break;
    }
    return {Volume3D(vol.dims(), vol.spacing(), std::move(out)), SeverityScore{spec.severity}};
}

Triplet make_triplet(const Volume3D& vol, ArtifactKind kind, double negative_severity, std::uint64_t seed, int axis) {
    if (!(negative_severity > 0.0 && negative_severity <= 1.0)) {
        throw std::invalid_argument("negative severity must be in (0, 1]");
    }
    const Philox rng(seed, rng_stream::kTriplet);
    const auto b = rng.block(0);
    const std::uint64_t positive_seed = static_cast<std::uint64_t>(b[1]) << 32 | b[0];

    Triplet t;
    t.anchor = vol;
    t.positive = apply_artifact(vol, {ArtifactKind::Noise, kPositiveSeverity, positive_seed, axis}).first;
    t.negative = apply_artifact(vol, {kind, negative_severity, seed, axis}).first;
    t.negative_severity = negative_severity;
    return t;
}

}  // namespace harmokit
