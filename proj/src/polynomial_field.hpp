#pragma once

#include <vector>

#include "harmokit/rng.hpp"
#include "harmokit/volume.hpp"

namespace harmokit::detail {

// Number of monomials x^i y^j z^k with i + j + k <= order.
int polynomial_term_count(int order) noexcept;

// Coefficients drawn uniformly from [-scale, scale], in graded-lex order.
std::vector<double> random_coefficients(int order, double scale, const Philox& rng);

// Evaluates the polynomial at voxel centres mapped to [-1, 1] per axis.
std::vector<double> evaluate_polynomial(const Dims& dims, int order, const std::vector<double>& coeffs);

}  // namespace harmokit::detail
