#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "harmokit/attention.hpp"
#include "harmokit/fov.hpp"
#include "harmokit/phantom.hpp"

using namespace harmokit;

namespace {

SourceStack one_pixel(std::vector<float> values, std::vector<std::uint8_t> masks, std::vector<double> logits) {
    SourceStack s;
    for (std::size_t k = 0; k < values.size(); ++k) {
        s.slices.push_back(Image2D(1, 1, values[k]));
        s.masks.push_back(Mask2D(1, 1, masks[k]));
    }
    s.logits = std::move(logits);
    return s;
}

std::vector<double> weights_at(const AttentionMap& a, std::size_t pixel) {
    std::vector<double> w;
    for (std::size_t k = 0; k < a.sources; ++k) w.push_back(a.at(k, pixel));
    return w;
}

SourceStack random_stack(std::mt19937& gen, std::size_t k, int w, int h) {
    std::uniform_real_distribution<float> val(0.0f, 1.0f);
    std::normal_distribution<double> logit(0.0, 2.0);
    SourceStack s;
    for (std::size_t i = 0; i < k; ++i) {
        Image2D img(w, h);
        Mask2D m(w, h);
        for (auto& v : img.data) v = val(gen);
        for (auto& b : m.data) b = gen() & 1u;
        s.slices.push_back(img);
        s.masks.push_back(m);
        s.logits.push_back(logit(gen));
    }
    return s;
}

}  // namespace

TEST_CASE("softmax is normalized and order-invariant") {
    const std::vector<double> l{0.3, -1.2, 2.0, 0.0};
    const auto s = softmax(l);
    CHECK(std::accumulate(s.begin(), s.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    const std::vector<double> r{2.0, 0.0, 0.3, -1.2};
    const auto t = softmax(r);
    CHECK(s[0] == t[2]);
    CHECK(s[1] == t[3]);
    CHECK(s[2] == t[0]);
    CHECK(s[3] == t[1]);
    CHECK_THROWS_AS(softmax(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("enhanced attention examples") {
    const auto fg = enhanced_attention(one_pixel({1, 2}, {1, 1}, {0, 0}));
    CHECK(weights_at(fg, 0) == std::vector<double>{0.5, 0.5});

    const auto bg = enhanced_attention(one_pixel({1, 2, 3}, {0, 0, 0}, {0.1, 2.0, -1.0}));
    for (double w : weights_at(bg, 0)) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    // Logits with softmax (0.5, 0.2, 0.3); source 2 (index 1) is background.
    const auto mixed = enhanced_attention(one_pixel({1, 2, 3}, {1, 0, 1}, {std::log(0.5), std::log(0.2), std::log(0.3)}));
    const auto w = weights_at(mixed, 0);
    CHECK(w[0] == doctest::Approx(0.625).epsilon(1e-12));
    CHECK(w[1] == 0.0);
    CHECK(w[2] == doctest::Approx(0.375).epsilon(1e-12));
}

TEST_CASE("legacy attention examples") {
    const auto outside = legacy_attention(one_pixel({1, 2}, {0, 1}, {0, 0}));
    CHECK(weights_at(outside, 0) == std::vector<double>{0.0, 0.0});
    const auto inside = legacy_attention(one_pixel({1, 2}, {1, 0}, {0, 0}));
    CHECK(weights_at(inside, 0) == std::vector<double>{0.5, 0.5});
    CHECK(weights_at(legacy_attention(one_pixel({4}, {1}, {0.7})), 0) == std::vector<double>{1.0});
    CHECK(weights_at(legacy_attention(one_pixel({4}, {0}, {0.7})), 0) == std::vector<double>{0.0});
}

TEST_CASE("fuse examples") {
    const auto s = one_pixel({2, 4}, {1, 1}, {0, 0});
    CHECK(fuse(s, enhanced_attention(s)).data[0] == 3.0f);
    const auto hot = one_pixel({2, 4}, {0, 1}, {0, 0});
    CHECK(fuse(hot, enhanced_attention(hot)).data[0] == 4.0f);
    const auto bg = one_pixel({0.01f, -0.02f, 0.005f}, {0, 0, 0}, {1, 2, 3});
    CHECK(std::fabs(fuse(bg, enhanced_attention(bg)).data[0]) <= 0.02f);
}

TEST_CASE("stack validation") {
    auto s = one_pixel({1, 2}, {1, 1}, {0, 0});
    s.logits.pop_back();
    CHECK_THROWS_AS(enhanced_attention(s), std::invalid_argument);
    s = one_pixel({1, 2}, {1, 2}, {0, 0});
    CHECK_THROWS_AS(enhanced_attention(s), std::invalid_argument);
    s = one_pixel({1, 2}, {1, 1}, {0, std::nan("")});
    CHECK_THROWS_AS(enhanced_attention(s), std::invalid_argument);
    CHECK_THROWS_AS(enhanced_attention(SourceStack{}), std::invalid_argument);
}

TEST_CASE("normalization, zero-forcing and legacy support on random stacks") {
    std::mt19937 gen(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 1 + trial % 4;
        const auto s = random_stack(gen, k, 7, 5);
        const auto a = enhanced_attention(s);
        const auto l = legacy_attention(s);
        for (std::size_t p = 0; p < 35; ++p) {
            double sum = 0.0;
            int fg = 0;
            for (std::size_t i = 0; i < k; ++i) {
                sum += a.at(i, p);
                fg += s.masks[i].data[p];
            }
            CHECK(std::fabs(sum - 1.0) < 1e-6);
            if (fg > 0 && fg < static_cast<int>(k)) {
                for (std::size_t i = 0; i < k; ++i) {
                    if (!s.masks[i].data[p]) CHECK(a.at(i, p) == 0.0);
                }
            }
            double lsum = 0.0;
            for (std::size_t i = 0; i < k; ++i) lsum += l.at(i, p);
            CHECK(lsum == doctest::Approx(s.masks[0].data[p] ? 1.0 : 0.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("permuting sources permutes the attention planes bitwise") {
    std::mt19937 gen(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 2 + trial % 3;
        const auto s = random_stack(gen, k, 6, 6);
        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), gen);
        SourceStack t;
        for (std::size_t i : perm) {
            t.slices.push_back(s.slices[i]);
            t.masks.push_back(s.masks[i]);
            t.logits.push_back(s.logits[i]);
        }
        const auto a = enhanced_attention(s);
        const auto b = enhanced_attention(t);
        for (std::size_t j = 0; j < k; ++j) {
            const auto pa = a.plane(perm[j]);
            const auto pb = b.plane(j);
            CHECK(std::equal(pa.begin(), pa.end(), pb.begin()));
        }
    }
}

TEST_CASE("mse logits") {
    std::vector<Image2D> src{Image2D(2, 2, 1.0f), Image2D(2, 2, 3.0f)};
    const auto l = mse_logits(src, Image2D(2, 2, 1.0f));
    CHECK(l[0] == 0.0);
    CHECK(l[1] == doctest::Approx(-4.0));
}

TEST_CASE("fuse_volume with identical or single sources") {
    PhantomSpec spec;
    spec.seed = 14;
    spec.contrasts = {Contrast::T1w};
    const auto ph = generate_phantom(spec);
    const auto& v = ph.images[0];
    const std::vector<Volume3D> same{v, v, v};
    const std::vector<Mask3D> masks{ph.mask, ph.mask, ph.mask};
    const std::vector<double> logits{0.2, -1.0, 0.5};
    const auto fused = fuse_volume(same, masks, logits, Orientation::Axial, FusionMode::Enhanced).image;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (ph.mask[i]) CHECK(fused[i] == doctest::Approx(v[i]).epsilon(1e-6));
    }
    const std::vector<Volume3D> one{v};
    const std::vector<Mask3D> one_mask{ph.mask};
    const std::vector<double> one_logit{0.0};
    for (Orientation o : {Orientation::Axial, Orientation::Coronal, Orientation::Sagittal}) {
        const auto single = fuse_volume(one, one_mask, one_logit, o, FusionMode::Enhanced).image;
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(single[i] == v[i] * ph.mask[i]);
    }
}

TEST_CASE("fuse_volume fills an anterior crop from the full source") {
    PhantomSpec spec;
    spec.seed = 15;
    const auto ph = generate_phantom(spec);
    const auto crop = crop_fov(ph.images[0], ph.mask, {FovCropKind::Anterior, 0.25, Side::None});
    const std::vector<Volume3D> src{crop.image, ph.images[1]};
    const std::vector<Mask3D> masks{crop.mask, ph.mask};
    const std::vector<double> logits{0.0, 0.0};
    const auto enhanced = fuse_volume(src, masks, logits, Orientation::Axial, FusionMode::Enhanced, true);
    const auto legacy = fuse_volume(src, masks, logits, Orientation::Axial, FusionMode::Legacy).image;
    std::size_t region_fg = 0, filled = 0, legacy_filled = 0;
    for (std::size_t i = 0; i < ph.mask.size(); ++i) {
        if (!crop.cropped_region[i] || !ph.mask[i]) continue;
        ++region_fg;
        filled += enhanced.image[i] != 0.0f;
        legacy_filled += legacy[i] != 0.0f;
        CHECK(enhanced.image[i] == ph.images[1][i]);
    }
    REQUIRE(region_fg > 0);
    CHECK(filled == region_fg);
    CHECK(legacy_filled == 0);
    REQUIRE(enhanced.weights.size() == 2);
}

TEST_CASE("fuse_volume input checks") {
    const Volume3D a({4, 4, 4}, {1, 1, 1}, 1.0f), b({4, 4, 5}, {1, 1, 1}, 1.0f);
    const Mask3D m({4, 4, 4}, 1);
    const std::vector<double> logits{0.0, 0.0};
    const std::vector<Volume3D> srcs{a, b};
    const std::vector<Mask3D> masks{m, m};
    CHECK_THROWS_AS(fuse_volume(srcs, masks, logits, Orientation::Axial, FusionMode::Enhanced), std::invalid_argument);
    CHECK_THROWS_AS(parse_fusion_mode("median"), std::invalid_argument);
}
