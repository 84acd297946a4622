#include "polynomial_field.hpp"

#include <stdexcept>

namespace harmokit::detail {

namespace {
double axis_coord(int i, int n) {
    return n == 1 ? 0.0 : (2.0 * i) / (n - 1) - 1.0;
}
}  // namespace

int polynomial_term_count(int order) noexcept {
    return (order + 1) * (order + 2) * (order + 3) / 6;
}

std::vector<double> random_coefficients(int order, double scale, const Philox& rng) {
    const int n = polynomial_term_count(order);
    std::vector<double> c(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) c[static_cast<std::size_t>(t)] = scale * (2.0 * rng.uniform(static_cast<std::uint64_t>(t)) - 1.0);
    return c;
}

std::vector<double> evaluate_polynomial(const Dims& dims, int order, const std::vector<double>& coeffs) {
    if (static_cast<int>(coeffs.size()) != polynomial_term_count(order)) {
        throw std::invalid_argument("polynomial coefficient count does not match order");
    }
    std::vector<double> out(dims.voxel_count(), 0.0);
    std::vector<double> px(static_cast<std::size_t>(order + 1)), py(px.size()), pz(px.size());
    for (int z = 0; z < dims.nz; ++z) {
        const double cz = axis_coord(z, dims.nz);
        for (int y = 0; y < dims.ny; ++y) {
            const double cy = axis_coord(y, dims.ny);
            for (int x = 0; x < dims.nx; ++x) {
                const double cx = axis_coord(x, dims.nx);
                px[0] = py[0] = pz[0] = 1.0;
                for (int p = 1; p <= order; ++p) {
                    px[static_cast<std::size_t>(p)] = px[static_cast<std::size_t>(p - 1)] * cx;
                    py[static_cast<std::size_t>(p)] = py[static_cast<std::size_t>(p - 1)] * cy;
                    pz[static_cast<std::size_t>(p)] = pz[static_cast<std::size_t>(p - 1)] * cz;
                }
                double v = 0.0;
                std::size_t t = 0;
                for (int deg = 0; deg <= order; ++deg) {
                    for (int i = deg; i >= 0; --i) {
                        for (int j = deg - i; j >= 0; --j) {
                            const int k = deg - i - j;
                            v += coeffs[t++] * px[static_cast<std::size_t>(i)] * py[static_cast<std::size_t>(j)] *
                                 pz[static_cast<std::size_t>(k)];
                        }
                    }
                }
                out[linear_index(dims, x, y, z)] = v;
            }
        }
    }
    return out;
}

}  // namespace harmokit::detail
