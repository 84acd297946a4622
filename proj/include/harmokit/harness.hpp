#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "harmokit/fov.hpp"
#include "harmokit/metrics.hpp"
#include "harmokit/phantom.hpp"
#include "harmokit/scorer.hpp"
#include "harmokit/volume.hpp"

namespace harmokit {

enum class ExperimentKind { FovImputation, TravelingSubject, CvTable, SeverityTrain };

ExperimentKind parse_experiment_kind(std::string_view name);
std::string_view to_string(ExperimentKind k) noexcept;

struct ScorerExperiment {
    int train_phantoms = 50;  // 4 triplets (one per artifact kind) each
    int test_slices = 50;
    int epochs = 2000;
    double learning_rate = 0.5;
    double l2 = 1e-3;
    TripletForm triplet_form = TripletForm::SeverityOrdered;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::FovImputation;
    int phantom_count = 30;
    std::uint64_t seed = 0;
    int phantom_size = 64;
    double subject_jitter = 0.05;
    std::vector<Contrast> contrasts{Contrast::T1w, Contrast::T2w, Contrast::FLAIR};

    // fov-imputation: one run per (cropped contrast, fraction).
    std::vector<Contrast> cropped_contrasts{Contrast::T1w, Contrast::T2w, Contrast::FLAIR};
    FovCropKind crop_kind = FovCropKind::Anterior;
    Side crop_side = Side::None;
    std::vector<double> crop_fractions{0.1, 0.2, 0.3};

    double mask_threshold = 0.1;  // foreground_mask threshold fraction
    double alpha = 0.05;

    // traveling-subject / cv-table
    int scanner_count = 6;
    bool identical_scanners = false;
    Contrast target_contrast = Contrast::T1w;

    ScorerExperiment scorer{};

    std::filesystem::path output_dir = "results";
};

// Parses a config object; unknown keys and invalid values throw std::invalid_argument.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);
void validate(const ExperimentConfig& config);

/// Piecewise-linear conditional-mean intensity map from one co-registered
/// image to another, the contrast-synthesis stand-in of the harness.
///
/// Knots are (mean source, mean target) over the non-empty bins of `bins`
/// equal-width source intensity bins spanning the fitting voxels; values
/// beyond the outer knots take the outer target values.
class IntensityMapping {
public:
    static IntensityMapping fit(std::span<const float> source, std::span<const float> target,
                                std::span<const std::uint8_t> use, int bins = 64);
    static IntensityMapping identity();

    double operator()(double v) const noexcept;
    // Maps every voxel inside `mask`; voxels outside it become 0.
    Volume3D apply(const Volume3D& source, const Mask3D& mask) const;

    const std::vector<double>& knots_x() const noexcept { return xs_; }
    const std::vector<double>& knots_y() const noexcept { return ys_; }
    double fit_mse() const noexcept { return fit_mse_; }

private:
    std::vector<double> xs_;
    std::vector<double> ys_;
    double fit_mse_ = 0.0;
    bool identity_ = false;
};

// Profile 0 is the identity acquisition; the rest are drawn from `seed`.
std::vector<ScannerProfile> scanner_profiles(int count, std::uint64_t seed, bool identical);

/// Threshold segmentation into the four tissue classes: 1D k-means on a
/// reference image's foreground intensities gives three thresholds, and
/// classes are named by the target contrast's tissue ordering.
struct ThresholdSegmenter {
    Contrast contrast = Contrast::T1w;
    std::array<double, 3> thresholds{};
    double mask_threshold = 0.1;

    static ThresholdSegmenter from_reference(const Volume3D& reference, Contrast contrast, double mask_threshold);
    LabelMap segment(const Volume3D& image) const;
};

struct StatRow {
    std::string comparison;
    int n = 0;
    double w = 0.0;
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    std::string method;
    bool reject = false;
};

// Header "comparison,N,W,p_raw,p_adjusted,method,reject".
std::string stat_rows_to_csv(std::span<const StatRow> rows);

struct PlotSeries {
    std::string name;  // written as plotdata/<name>.csv
    std::vector<std::pair<double, double>> points;
};

struct ExperimentReport {
    std::vector<MetricRow> rows;
    std::vector<StatRow> stats;
    nlohmann::json summary;
    std::vector<PlotSeries> plots;
    std::vector<std::pair<std::string, std::string>> files;  // extra (name, content) outputs
};

ExperimentReport run_fov_imputation(const ExperimentConfig& config);
ExperimentReport run_traveling_subject(const ExperimentConfig& config);
ExperimentReport run_cv_table(const ExperimentConfig& config);
ExperimentReport run_severity_train(const ExperimentConfig& config);
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Writes results.csv, stats.csv, summary.json, config.resolved.json,
/// plotdata/*.csv and any extra files into `dir` (created if missing).
void write_report(const ExperimentReport& report, const ExperimentConfig& config, const std::filesystem::path& dir);

}  // namespace harmokit
