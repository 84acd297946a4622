#pragma once

#include <complex>
#include <span>

namespace harmokit::fft {

// In-place unnormalized 1D DFTs of `count` lines of length `n`; element k of
// line l sits at data[l * dist + k * stride]. Backed by FFTW; planning is
// serialized internally, execution is reentrant.
void transform_lines(std::span<std::complex<double>> data, int n, int count, int stride, int dist, bool inverse);

// In-place unnormalized DFT along one axis (0 = x fastest) of a dense
// nx * ny * nz complex grid.
void transform_axis(std::span<std::complex<double>> data, int nx, int ny, int nz, int axis, bool inverse);

}  // namespace harmokit::fft
