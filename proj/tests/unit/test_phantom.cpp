#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "harmokit/phantom.hpp"

using namespace harmokit;

namespace {

double mean_over(const PhantomOutput& ph, const Volume3D& img, Tissue t) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (ph.labels.data[i] == static_cast<std::uint8_t>(t)) {
            s += img[i];
            ++n;
        }
    }
    return s / static_cast<double>(n);
}

}  // namespace

TEST_CASE("identical spec gives bit-identical phantoms") {
    PhantomSpec spec;
    spec.seed = 3;
    const auto a = generate_phantom(spec);
    const auto b = generate_phantom(spec);
    REQUIRE(a.images.size() == 3);
    for (std::size_t k = 0; k < a.images.size(); ++k) {
        CHECK(std::equal(a.images[k].data().begin(), a.images[k].data().end(), b.images[k].data().begin()));
    }
    CHECK(a.labels.data == b.labels.data);
    CHECK(a.mask == b.mask);
}

TEST_CASE("seeds change the anatomy") {
    PhantomSpec a, b;
    a.seed = 1;
    b.seed = 2;
    CHECK(generate_phantom(a).labels.data != generate_phantom(b).labels.data);
}

TEST_CASE("T1w white matter is brighter than CSF") {
    PhantomSpec spec;
    spec.seed = 9;
    const auto ph = generate_phantom(spec);
    const auto& t1 = ph.image(Contrast::T1w);
    CHECK(mean_over(ph, t1, Tissue::WhiteMatter) > mean_over(ph, t1, Tissue::CSF));
    const auto& t2 = ph.image(Contrast::T2w);
    CHECK(mean_over(ph, t2, Tissue::CSF) > mean_over(ph, t2, Tissue::WhiteMatter));
}

TEST_CASE("seed 7 label counts regression fixture") {
    PhantomSpec spec;
    spec.seed = 7;
    const auto ph = generate_phantom(spec);
    std::array<std::size_t, 5> counts{};
    for (auto v : ph.labels.data) ++counts[v];
    CHECK(counts == std::array<std::size_t, 5>{188480, 516, 38816, 33740, 592});
}

TEST_CASE("every tissue class is present; mask is the non-background support") {
    PhantomSpec spec;
    spec.seed = 21;
    const auto ph = generate_phantom(spec);
    for (Tissue t : kTissueClasses) {
        CHECK(std::count(ph.labels.data.begin(), ph.labels.data.end(), static_cast<std::uint8_t>(t)) > 0);
    }
    for (std::size_t i = 0; i < ph.mask.size(); ++i) {
        CHECK(ph.mask[i] == (ph.labels.data[i] != 0));
        if (!ph.mask[i]) CHECK(ph.images[0][i] == 0.0f);
    }
}

TEST_CASE("invalid specs are rejected") {
    PhantomSpec s;
    s.dims = {31, 64, 64};
    CHECK_THROWS_AS(generate_phantom(s), std::invalid_argument);
    s = {};
    s.subject_jitter = 0.2;
    CHECK_THROWS_AS(generate_phantom(s), std::invalid_argument);
    s = {};
    s.contrasts.clear();
    CHECK_THROWS_AS(generate_phantom(s), std::invalid_argument);
}

TEST_CASE("scanner_transform identity on normalized input") {
    PhantomSpec spec;
    spec.seed = 4;
    const auto ph = generate_phantom(spec);
    const auto& v = ph.images[0];
    const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
    const auto out = scanner_transform(v, {});
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(out[i] == doctest::Approx((v[i] - *lo) / (*hi - *lo)).epsilon(1e-6));
    }
}

TEST_CASE("scanner_transform gamma keeps voxel ordering") {
    PhantomSpec spec;
    spec.seed = 4;
    const auto v = generate_phantom(spec).images[0];
    const auto out = scanner_transform(v, {1.3, 2.0, 0.0, 0});
    std::vector<std::size_t> a(v.size()), b(v.size());
    std::iota(a.begin(), a.end(), std::size_t{0});
    std::iota(b.begin(), b.end(), std::size_t{0});
    std::stable_sort(a.begin(), a.end(), [&](auto i, auto j) { return v[i] < v[j]; });
    std::stable_sort(b.begin(), b.end(), [&](auto i, auto j) { return out[i] < out[j]; });
    CHECK(a == b);
}

TEST_CASE("scanner_transform field seeds") {
    PhantomSpec spec;
    spec.seed = 4;
    const auto v = generate_phantom(spec).images[0];
    const auto a = scanner_transform(v, {1.0, 1.0, 0.2, 1});
    const auto b = scanner_transform(v, {1.0, 1.0, 0.2, 2});
    CHECK_FALSE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
    const auto c = scanner_transform(v, {1.0, 1.0, 0.0, 1});
    const auto d = scanner_transform(v, {1.0, 1.0, 0.0, 2});
    CHECK(std::equal(c.data().begin(), c.data().end(), d.data().begin()));
}

TEST_CASE("scanner_transform preconditions") {
    const Volume3D v({4, 4, 4}, {1, 1, 1}, 1.0f);
    CHECK_THROWS_AS(scanner_transform(v, {0.0, 1.0, 0.0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(scanner_transform(v, {1.0, 0.4, 0.0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(scanner_transform(v, {1.0, 2.1, 0.0, 0}), std::invalid_argument);
}
