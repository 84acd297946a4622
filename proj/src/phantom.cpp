#include "harmokit/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "harmokit/rng.hpp"
#include "polynomial_field.hpp"

namespace harmokit {

namespace {

// All tables below are SYNTHETIC design constants.
//                                      CSF   GM    WM    DeepGray
constexpr double kT1w[4] = {0.25, 0.55, 0.85, 0.70};
constexpr double kT2w[4] = {0.95, 0.60, 0.40, 0.50};
constexpr double kFlair[4] = {0.15, 0.65, 0.45, 0.55};
constexpr double kPd[4] = {0.80, 0.70, 0.55, 0.62};

struct Ellipsoid {
    std::array<double, 3> centre;  // normalized coordinates in [-1, 1]
    std::array<double, 3> radii;
};

// Nominal geometry in normalized coordinates (half-extent = 1).
constexpr Ellipsoid kBrain{{0.0, 0.0, 0.0}, {0.80, 0.88, 0.75}};
constexpr Ellipsoid kWhite{{0.0, 0.0, 0.0}, {0.62, 0.70, 0.56}};
constexpr Ellipsoid kDeepGray[2] = {{{-0.28, 0.05, 0.0}, {0.10, 0.16, 0.14}},
                                    {{0.28, 0.05, 0.0}, {0.10, 0.16, 0.14}}};
constexpr Ellipsoid kVentricle[2] = {{{-0.09, 0.0, 0.08}, {0.06, 0.25, 0.13}},
                                     {{0.09, 0.0, 0.08}, {0.06, 0.25, 0.13}}};

// Per-subject deformation: radii scaled by 1 + jitter * u, inner structures
// shifted by up to 0.2 * jitter, u uniform in [-1, 1].
Ellipsoid jittered(const Ellipsoid& e, double jitter, bool may_shift, const Philox& rng, std::uint64_t slot) {
    Ellipsoid out = e;
    for (std::size_t a = 0; a < 3; ++a) {
        const double u = 2.0 * rng.uniform(slot * 8 + a) - 1.0;
        out.radii[a] = e.radii[a] * (1.0 + jitter * u);
        if (may_shift) {
            const double v = 2.0 * rng.uniform(slot * 8 + 4 + a) - 1.0;
            out.centre[a] = e.centre[a] + 0.2 * jitter * v;
        }
    }
    return out;
}

bool inside(const Ellipsoid& e, const std::array<double, 3>& p) {
    double q = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
        const double d = (p[a] - e.centre[a]) / e.radii[a];
        q += d * d;
    }
    return q <= 1.0;
}

double normalized_coord(int i, int n) {
    return (i + 0.5 - 0.5 * n) / (0.5 * n);
}

}  // namespace

Contrast parse_contrast(std::string_view name) {
    if (name == "T1w") return Contrast::T1w;
    if (name == "T2w") return Contrast::T2w;
    if (name == "FLAIR") return Contrast::FLAIR;
    if (name == "PD") return Contrast::PD;
    throw std::invalid_argument("unknown contrast '" + std::string(name) + "'");
}

std::string_view to_string(Contrast c) noexcept {
    switch (c) {
        case Contrast::T1w: return "T1w";
        case Contrast::T2w: return "T2w";
        case Contrast::FLAIR: return "FLAIR";
        case Contrast::PD: return "PD";
    }
    return "?";
}

std::string_view to_string(Tissue t) noexcept {
    switch (t) {
        case Tissue::Background: return "background";
        case Tissue::CSF: return "csf";
        case Tissue::GrayMatter: return "gray_matter";
        case Tissue::WhiteMatter: return "white_matter";
        case Tissue::DeepGray: return "deep_gray";
    }
    return "?";
}

double tissue_intensity(Contrast c, Tissue t) noexcept {
    if (t == Tissue::Background) return 0.0;
    const auto idx = static_cast<std::size_t>(t) - 1;
    switch (c) {
        case Contrast::T1w: return kT1w[idx];
        case Contrast::T2w: return kT2w[idx];
        case Contrast::FLAIR: return kFlair[idx];
        case Contrast::PD: return kPd[idx];
    }
    return 0.0;
}

const Volume3D& PhantomOutput::image(Contrast c) const {
    for (std::size_t i = 0; i < contrasts.size(); ++i) {
        if (contrasts[i] == c) return images[i];
    }
    throw std::invalid_argument("phantom has no " + std::string(to_string(c)) + " image");
}

PhantomOutput generate_phantom(const PhantomSpec& spec) {
    const Dims d = spec.dims;
    if (d.nx < 32 || d.ny < 32 || d.nz < 32) throw std::invalid_argument("phantom dims must be >= 32 per axis");
    if (!(spec.subject_jitter >= 0.0 && spec.subject_jitter <= 0.1)) {
        throw std::invalid_argument("subject_jitter must be in [0, 0.1]");
    }
    if (spec.contrasts.empty()) throw std::invalid_argument("phantom needs at least one contrast");

    const Philox shape_rng(spec.seed, rng_stream::kPhantomShape);
    const double j = spec.subject_jitter;
    const Ellipsoid brain = jittered(kBrain, j, false, shape_rng, 0);
    const Ellipsoid white = jittered(kWhite, j, false, shape_rng, 1);
    const Ellipsoid deep[2] = {jittered(kDeepGray[0], j, true, shape_rng, 2),
                               jittered(kDeepGray[1], j, true, shape_rng, 3)};
    const Ellipsoid vent[2] = {jittered(kVentricle[0], j, true, shape_rng, 4),
                               jittered(kVentricle[1], j, true, shape_rng, 5)};

    LabelMap labels{d, spec.spacing, std::vector<std::uint8_t>(d.voxel_count(), 0)};
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                const std::array<double, 3> p{normalized_coord(x, d.nx), normalized_coord(y, d.ny),
                                              normalized_coord(z, d.nz)};
                Tissue t = Tissue::Background;
                if (inside(brain, p)) {
                    t = Tissue::GrayMatter;
                    if (inside(white, p)) {
                        t = Tissue::WhiteMatter;
                        if (inside(deep[0], p) || inside(deep[1], p)) t = Tissue::DeepGray;
                        if (inside(vent[0], p) || inside(vent[1], p)) t = Tissue::CSF;
                    }
                }
                labels.data[linear_index(d, x, y, z)] = static_cast<std::uint8_t>(t);
            }
        }
    }

    std::vector<std::uint8_t> fg(labels.data.size());
    std::transform(labels.data.begin(), labels.data.end(), fg.begin(),
                   [](std::uint8_t l) { return static_cast<std::uint8_t>(l != 0); });

    PhantomOutput out;
    out.contrasts = spec.contrasts;
    const Philox texture_rng(spec.seed, rng_stream::kPhantomTexture);
    const std::size_t n = d.voxel_count();
    for (const Contrast c : spec.contrasts) {
        double range = 0.0;
        for (const Tissue t : kTissueClasses) range = std::max(range, tissue_intensity(c, t));
        const double sigma = kTextureFraction * range;
        // Each contrast draws from its own block of counters.
        const std::uint64_t base = static_cast<std::uint64_t>(c) * static_cast<std::uint64_t>(n);
        std::vector<float> img(n, 0.0f);
        for (std::size_t i = 0; i < n; ++i) {
            const auto t = static_cast<Tissue>(labels.data[i]);
            if (t == Tissue::Background) continue;
            img[i] = static_cast<float>(tissue_intensity(c, t) + sigma * texture_rng.normal(base + i));
        }
        out.images.emplace_back(d, spec.spacing, std::move(img));
    }
    out.labels = std::move(labels);
    out.mask = Mask3D(d, std::move(fg));
    return out;
}

Volume3D scanner_transform(const Volume3D& vol, const ScannerProfile& profile) {
    if (!(profile.gain > 0.0)) throw std::invalid_argument("scanner gain must be > 0");
    if (!(profile.gamma >= 0.5 && profile.gamma <= 2.0)) throw std::invalid_argument("scanner gamma must be in [0.5, 2]");
    if (!(profile.field_strength >= 0.0) || !std::isfinite(profile.field_strength)) {
        throw std::invalid_argument("scanner field_strength must be finite and >= 0");
    }
    const auto src = vol.data();
    const auto [lo_it, hi_it] = std::minmax_element(src.begin(), src.end());
    const double lo = *lo_it;
    const double span = static_cast<double>(*hi_it) - lo;

    std::vector<double> field;
    if (profile.field_strength > 0.0) {
        constexpr int kOrder = 2;
        const Philox rng(profile.seed, rng_stream::kScannerField);
        field = detail::evaluate_polynomial(vol.dims(), kOrder, detail::random_coefficients(kOrder, 1.0, rng));
        double peak = 0.0;
        for (double f : field) peak = std::max(peak, std::fabs(f));
        for (double& f : field) f = std::exp(profile.field_strength * (peak > 0.0 ? f / peak : 0.0));
    }

    std::vector<float> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double u = span > 0.0 ? (static_cast<double>(src[i]) - lo) / span : 0.0;
        double v = profile.gain * (profile.gamma == 1.0 ? u : std::pow(u, profile.gamma));
        if (!field.empty()) v *= field[i];
        out[i] = static_cast<float>(v);
    }
    return Volume3D(vol.dims(), vol.spacing(), std::move(out));
}

}  // namespace harmokit
