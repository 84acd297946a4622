#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "harmokit/volume.hpp"

namespace harmokit {

// PSNR of identical inputs.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

double psnr_from_mse(double mse, double peak);

// 10 log10(peak^2 / MSE) over `region` (whole volume when null), with peak
// the reference's max - min over the same region.
double psnr(const Volume3D& test, const Volume3D& reference, const Mask3D* region = nullptr);

struct SsimOptions {
    std::optional<double> dynamic_range;  // defaults to reference max - min
    const Mask3D* region = nullptr;       // restricts window centres
    double k1 = 0.01;
    double k2 = 0.03;
};

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), evaluated at
/// every valid window position of every axial slice and averaged.
double ssim(const Volume3D& test, const Volume3D& reference, const SsimOptions& options = {});

// Local SSIM values of one 2D pair at valid window centres; entries outside
// the valid band are NaN.
Image2D ssim_map(const Image2D& test, const Image2D& reference, double dynamic_range, double k1 = 0.01,
                 double k2 = 0.03);

// 2|A ∩ B| / (|A| + |B|) for one class; 1 when the class is absent from both.
double dice(const LabelMap& a, const LabelMap& b, std::uint8_t class_id);

double region_volume(const LabelMap& labels, std::uint8_t class_id, const Spacing& spacing);

// Sample standard deviation (N - 1) over the mean.
double coefficient_of_variation(std::span<const double> values);

struct MetricRow {
    std::string dataset;
    std::string subject;
    std::string contrast;
    std::string region;
    std::string metric;
    double value = 0.0;
};

// Header "dataset,subject,contrast,region,metric,value" followed by rows.
std::string metric_rows_to_csv(std::span<const MetricRow> rows);

// Shortest round-trip decimal form; "inf" / "-inf" / "nan" for non-finite.
std::string format_double(double v);

}  // namespace harmokit
