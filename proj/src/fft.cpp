#include "harmokit/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>

namespace harmokit::fft {

namespace {
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

void transform_lines(std::span<std::complex<double>> data, int n, int count, int stride, int dist, bool inverse) {
    if (n < 1 || count < 1) throw std::invalid_argument("fft: n and count must be positive");
    const auto last = static_cast<std::size_t>(count - 1) * static_cast<std::size_t>(dist) +
                      static_cast<std::size_t>(n - 1) * static_cast<std::size_t>(stride);
    if (last >= data.size()) throw std::invalid_argument("fft: line layout exceeds buffer");

    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        // FFTW_ESTIMATE leaves the buffer untouched during planning.
        plan = fftw_plan_many_dft(1, &n, count, buf, nullptr, stride, dist, buf, nullptr, stride, dist,
                                  inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    }
    if (plan == nullptr) throw std::runtime_error("fft: FFTW planning failed");
    fftw_execute(plan);
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
}

void transform_axis(std::span<std::complex<double>> data, int nx, int ny, int nz, int axis, bool inverse) {
    const int n[3] = {nx, ny, nz};
    const int stride[3] = {1, nx, nx * ny};
    if (axis < 0 || axis > 2) throw std::invalid_argument("fft: axis must be 0, 1 or 2");
    if (static_cast<std::size_t>(nx) * ny * nz != data.size()) throw std::invalid_argument("fft: grid size mismatch");

    fftw_iodim dim{n[axis], stride[axis], stride[axis]};
    fftw_iodim loops[2];
    int k = 0;
    for (int a = 0; a < 3; ++a) {
        if (a != axis) loops[k++] = fftw_iodim{n[a], stride[a], stride[a]};
    }
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_guru_dft(1, &dim, 2, loops, buf, buf, inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    }
    if (plan == nullptr) throw std::runtime_error("fft: FFTW planning failed");
    fftw_execute(plan);
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
}

}  // namespace harmokit::fft
