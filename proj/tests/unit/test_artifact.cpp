#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "harmokit/artifact.hpp"
#include "harmokit/metrics.hpp"
#include "harmokit/phantom.hpp"

using namespace harmokit;

namespace {

const Volume3D& clean() {
    static const Volume3D vol = [] {
        PhantomSpec spec;
        spec.seed = 31;
        spec.contrasts = {Contrast::T1w};
        return generate_phantom(spec).images[0];
    }();
    return vol;
}

double dynamic_range(const Volume3D& v) {
    const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
    return static_cast<double>(*hi) - *lo;
}

}  // namespace

TEST_CASE("severity_to_params endpoints") {
    CHECK(severity_to_params(ArtifactKind::Noise, 0.0).noise_sigma_fraction == 0.0);
    CHECK(severity_to_params(ArtifactKind::Noise, 0.5).noise_sigma_fraction == doctest::Approx(0.075));
    CHECK(severity_to_params(ArtifactKind::Anisotropy, 1.0).downsample_factor == 4.0);
    CHECK(severity_to_params(ArtifactKind::Anisotropy, 0.0).downsample_factor == 1.0);
    const auto g = severity_to_params(ArtifactKind::Ghosting, 1.0);
    CHECK(g.ghost_count == 10);
    CHECK(g.ghost_intensity == doctest::Approx(0.6));
    CHECK(severity_to_params(ArtifactKind::Ghosting, 0.0).ghost_count == 1);
    CHECK(severity_to_params(ArtifactKind::BiasField, 0.5).bias_coefficient_scale == doctest::Approx(0.25));
    CHECK_THROWS_AS(severity_to_params(ArtifactKind::Noise, 1.1), std::invalid_argument);
    CHECK_THROWS_AS(severity_to_params(ArtifactKind::Noise, -0.1), std::invalid_argument);
}

TEST_CASE("zero severity is the bit-exact identity for every kind") {
    for (ArtifactKind k : kArtifactKinds) {
        for (int axis = 0; axis < 3; ++axis) {
            const auto [out, sc] = apply_artifact(clean(), {k, 0.0, 5, axis});
            CHECK(sc.value == 0.0);
            CHECK(std::equal(out.data().begin(), out.data().end(), clean().data().begin()));
        }
    }
}

TEST_CASE("returned score equals the severity") {
    for (ArtifactKind k : kArtifactKinds) CHECK(apply_artifact(clean(), {k, 0.37, 2, 1}).second.value == 0.37);
}

TEST_CASE("noise variance matches sigma squared") {
    for (double s : {0.2, 0.5, 1.0}) {
        const auto out = apply_artifact(clean(), {ArtifactKind::Noise, s, 77, 1}).first;
        const double sigma = severity_to_params(ArtifactKind::Noise, s).noise_sigma_fraction * dynamic_range(clean());
        double sum = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double d = static_cast<double>(out[i]) - clean()[i];
            sum += d;
            sq += d * d;
        }
        const double n = static_cast<double>(out.size());
        const double var = (sq - sum * sum / n) / (n - 1.0);
        CHECK(var == doctest::Approx(sigma * sigma).epsilon(0.10));
    }
}

TEST_CASE("bias field has unit mean") {
    for (double scale : {0.05, 0.25, 0.5}) {
        const auto f = bias_field({64, 64, 64}, scale, 9);
        double m = 0.0;
        for (double v : f) m += v;
        CHECK(std::fabs(m / static_cast<double>(f.size()) - 1.0) < 1e-6);
    }
}

TEST_CASE("PSNR is non-increasing in severity for every kind") {
    for (ArtifactKind k : kArtifactKinds) {
        double prev = std::numeric_limits<double>::infinity();
        for (int i = 1; i <= 10; ++i) {
            const double s = 0.1 * i;
            const auto out = apply_artifact(clean(), {k, s, 1234, 1}).first;
            const double p = psnr(out, clean());
            INFO("kind " << to_string(k) << " s " << s);
            CHECK(p <= prev);
            prev = p;
        }
    }
}

TEST_CASE("ghosting preserves slice means across the ghost axis") {
    const auto out = apply_artifact(clean(), {ArtifactKind::Ghosting, 0.8, 0, 1}).first;
    // Every line along y keeps its mean (DC kept), so axial and sagittal
    // slices, which contain whole y-lines, keep theirs.
    for (Orientation o : {Orientation::Axial, Orientation::Sagittal}) {
        for (int idx = 16; idx < 48; idx += 4) {
            const auto a = extract_slice(clean(), o, idx).image;
            const auto b = extract_slice(out, o, idx).image;
            double ma = 0.0, mb = 0.0;
            for (std::size_t p = 0; p < a.size(); ++p) {
                ma += a.data[p];
                mb += b.data[p];
            }
            if (ma > 0.0) CHECK(std::fabs(mb - ma) / ma < 0.01);
        }
    }
    double changed = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) changed += std::fabs(out[i] - clean()[i]);
    CHECK(changed > 0.0);
}

TEST_CASE("artifacts are deterministic per seed") {
    for (ArtifactKind k : kArtifactKinds) {
        const auto a = apply_artifact(clean(), {k, 0.6, 42, 2}).first;
        const auto b = apply_artifact(clean(), {k, 0.6, 42, 2}).first;
        CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
    }
    const auto a = apply_artifact(clean(), {ArtifactKind::Noise, 0.6, 1, 1}).first;
    const auto b = apply_artifact(clean(), {ArtifactKind::Noise, 0.6, 2, 1}).first;
    CHECK_FALSE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST_CASE("anisotropy blurs only along its axis") {
    const auto out = apply_artifact(clean(), {ArtifactKind::Anisotropy, 1.0, 0, 2}).first;
    // A constant-along-z volume is untouched by z blur.
    const Dims d{16, 16, 16};
    std::vector<float> v(d.voxel_count());
    for (int z = 0; z < 16; ++z)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) v[linear_index(d, x, y, z)] = static_cast<float>(x * 3 + y);
    const Volume3D flat(d, {1, 1, 1}, v);
    const auto same = apply_artifact(flat, {ArtifactKind::Anisotropy, 1.0, 0, 2}).first;
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(same[i] == doctest::Approx(v[i]).epsilon(1e-5));
    CHECK(psnr(out, clean()) < 60.0);
}

TEST_CASE("triplet severities and determinism") {
    const auto t = make_triplet(clean(), ArtifactKind::BiasField, 0.8, 3);
    CHECK(t.anchor_severity == 0.0);
    CHECK(t.positive_severity == 0.02);
    CHECK(t.negative_severity == 0.8);
    CHECK(std::equal(t.anchor.data().begin(), t.anchor.data().end(), clean().data().begin()));
    const auto u = make_triplet(clean(), ArtifactKind::BiasField, 0.8, 3);
    CHECK(std::equal(t.positive.data().begin(), t.positive.data().end(), u.positive.data().begin()));
    CHECK(std::equal(t.negative.data().begin(), t.negative.data().end(), u.negative.data().begin()));

    const auto low = make_triplet(clean(), ArtifactKind::Noise, 0.02, 3);
    CHECK(low.negative_severity == low.positive_severity);

    CHECK_THROWS_AS(make_triplet(clean(), ArtifactKind::Noise, 0.0, 3), std::invalid_argument);
    CHECK_THROWS_AS(make_triplet(clean(), ArtifactKind::Noise, 1.5, 3), std::invalid_argument);
}

TEST_CASE("invalid specs") {
    CHECK_THROWS_AS(apply_artifact(clean(), {ArtifactKind::Noise, 1.5, 0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(apply_artifact(clean(), {ArtifactKind::Ghosting, 0.5, 0, 3}), std::invalid_argument);
    CHECK_THROWS_AS(parse_artifact_kind("motion"), std::invalid_argument);
}
