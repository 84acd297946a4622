#include "harmokit/metrics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace harmokit {

namespace {

std::array<double, kSsimWindow> gaussian_taps() {
    std::array<double, kSsimWindow> g{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - kSsimWindow / 2;
        g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += g[static_cast<std::size_t>(i)];
    }
    for (double& v : g) v /= sum;
    return g;
}

// Separable 'valid' Gaussian filter; output (w - 10) x (h - 10).
std::vector<double> filter_valid(const std::vector<double>& img, int w, int h) {
    static const auto g = gaussian_taps();
    const int ow = w - kSsimWindow + 1;
    const int oh = h - kSsimWindow + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < ow; ++i) {
            double acc = 0.0;
            for (int t = 0; t < kSsimWindow; ++t) acc += g[static_cast<std::size_t>(t)] * img[static_cast<std::size_t>(j) * w + i + t];
            tmp[static_cast<std::size_t>(j) * ow + i] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int j = 0; j < oh; ++j) {
        for (int i = 0; i < ow; ++i) {
            double acc = 0.0;
            for (int t = 0; t < kSsimWindow; ++t) acc += g[static_cast<std::size_t>(t)] * tmp[static_cast<std::size_t>(j + t) * ow + i];
            out[static_cast<std::size_t>(j) * ow + i] = acc;
        }
    }
    return out;
}

void check_same_dims(const Volume3D& a, const Volume3D& b, const char* what) {
    if (!(a.dims() == b.dims())) throw std::invalid_argument(std::string(what) + ": volume dims differ");
}

}  // namespace

double psnr_from_mse(double mse, double peak) {
    if (!(mse >= 0.0)) throw std::invalid_argument("psnr: MSE must be >= 0");
    if (mse == 0.0) return kPsnrIdentical;
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: reference has zero dynamic range");
    return 10.0 * std::log10(peak * peak / mse);
}

double psnr(const Volume3D& test, const Volume3D& reference, const Mask3D* region) {
    check_same_dims(test, reference, "psnr");
    if (region && !(region->dims() == reference.dims())) throw std::invalid_argument("psnr: region dims differ");
    double sq = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    std::size_t count = 0;
    const auto t = test.data();
    const auto r = reference.data();
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (region && !(*region)[i]) continue;
        const double d = static_cast<double>(t[i]) - r[i];
        sq += d * d;
        lo = std::min(lo, static_cast<double>(r[i]));
        hi = std::max(hi, static_cast<double>(r[i]));
        ++count;
    }
    if (count == 0) throw std::invalid_argument("psnr: evaluation region is empty");
    return psnr_from_mse(sq / static_cast<double>(count), hi - lo);
}

namespace {

// Calls sink(i, j, value) for every valid window centre of a 2D pair.
template <typename Sink>
void for_each_local_ssim(const Image2D& a, const Image2D& b, double range, double k1, double k2, Sink&& sink) {
    if (a.width != b.width || a.height != b.height) throw std::invalid_argument("ssim: image shapes differ");
    if (a.width < kSsimWindow || a.height < kSsimWindow) throw std::invalid_argument("ssim: images must be at least 11x11");
    const int w = a.width, h = a.height;
    const std::size_t n = a.size();
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = a.data[i];
        y[i] = b.data[i];
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, w, h), my = filter_valid(y, w, h);
    const auto mxx = filter_valid(xx, w, h), myy = filter_valid(yy, w, h), mxy = filter_valid(xy, w, h);
    const double c1 = (k1 * range) * (k1 * range);
    const double c2 = (k2 * range) * (k2 * range);
    const int ow = w - kSsimWindow + 1;
    const int half = kSsimWindow / 2;
    for (int j = 0; j + kSsimWindow <= h; ++j) {
        for (int i = 0; i < ow; ++i) {
            const std::size_t p = static_cast<std::size_t>(j) * ow + i;
            const double vx = mxx[p] - mx[p] * mx[p];
            const double vy = myy[p] - my[p] * my[p];
            const double cov = mxy[p] - mx[p] * my[p];
            sink(i + half, j + half,
                 ((2.0 * mx[p] * my[p] + c1) * (2.0 * cov + c2)) / ((mx[p] * mx[p] + my[p] * my[p] + c1) * (vx + vy + c2)));
        }
    }
}

}  // namespace

Image2D ssim_map(const Image2D& test, const Image2D& reference, double dynamic_range, double k1, double k2) {
    if (!(dynamic_range > 0.0)) throw std::invalid_argument("ssim: dynamic range must be > 0");
    Image2D out(test.width, test.height, std::numeric_limits<float>::quiet_NaN());
    for_each_local_ssim(test, reference, dynamic_range, k1, k2,
                        [&](int i, int j, double v) { out.at(i, j) = static_cast<float>(v); });
    return out;
}

double ssim(const Volume3D& test, const Volume3D& reference, const SsimOptions& options) {
    check_same_dims(test, reference, "ssim");
    if (options.region && !(options.region->dims() == reference.dims())) {
        throw std::invalid_argument("ssim: region dims differ");
    }
    double range = 0.0;
    if (options.dynamic_range) {
        range = *options.dynamic_range;
    } else {
        const auto r = reference.data();
        const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
        range = static_cast<double>(*hi) - *lo;
    }
    if (!(range > 0.0)) throw std::invalid_argument("ssim: reference has zero dynamic range");

    double acc = 0.0;
    std::size_t count = 0;
    for (int z = 0; z < reference.dims().nz; ++z) {
        const auto a = extract_slice(test, Orientation::Axial, z).image;
        const auto b = extract_slice(reference, Orientation::Axial, z).image;
        for_each_local_ssim(a, b, range, options.k1, options.k2, [&](int i, int j, double v) {
            if (options.region && !(*options.region)(i, j, z)) return;
            acc += v;
            ++count;
        });
    }
    if (count == 0) throw std::invalid_argument("ssim: no window centres inside the evaluation region");
    return acc / static_cast<double>(count);
}

double dice(const LabelMap& a, const LabelMap& b, std::uint8_t class_id) {
    if (!(a.dims == b.dims) || a.data.size() != b.data.size()) throw std::invalid_argument("dice: label map dims differ");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const bool ia = a.data[i] == class_id;
        const bool ib = b.data[i] == class_id;
        na += ia;
        nb += ib;
        both += ia && ib;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double region_volume(const LabelMap& labels, std::uint8_t class_id, const Spacing& spacing) {
    const auto n = std::count(labels.data.begin(), labels.data.end(), class_id);
    return static_cast<double>(n) * spacing[0] * spacing[1] * spacing[2];
}

double coefficient_of_variation(std::span<const double> values) {
    if (values.size() < 2) throw std::invalid_argument("coefficient_of_variation needs at least 2 values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (mean == 0.0) throw std::invalid_argument("coefficient_of_variation is undefined for zero mean");
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1)) / mean;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string metric_rows_to_csv(std::span<const MetricRow> rows) {
    std::ostringstream out;
    out << "dataset,subject,contrast,region,metric,value\n";
    for (const auto& r : rows) {
        out << r.dataset << ',' << r.subject << ',' << r.contrast << ',' << r.region << ',' << r.metric << ','
            << format_double(r.value) << '\n';
    }
    return out.str();
}

}  // namespace harmokit
