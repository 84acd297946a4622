#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "harmokit/volume.hpp"

namespace harmokit {

// (noise, ghosting, bias, sharpness), each clamped to [0, 1].
using FeatureVector = std::array<double, 4>;

// Reference constants dividing each raw feature before clamping; each is
// close to the raw feature at severity 1 of its own artifact kind.
namespace feature_reference {
inline constexpr double kNoise = 0.2;
inline constexpr double kGhost = 0.5;
inline constexpr double kBias = 0.7;
inline constexpr double kSharpness = 3.5;
}  // namespace feature_reference

// Tuning constants of the feature extractors.
namespace feature_params {
inline constexpr int kBackgroundMargin = 3;      // pixels between foreground and noise-estimation region
inline constexpr int kMinBackgroundPixels = 32;
inline constexpr int kMaxGhostPeriod = 10;
inline constexpr double kGhostGuard = 2.0;       // standard errors subtracted from each period's mean dip
inline constexpr double kMaxLineDip = 2.0;       // clamp on per-line log-power dips
inline constexpr int kBiasErosion = 2;
inline constexpr double kBiasMinIntensity = 0.6; // relative to the foreground mean
inline constexpr double kBiasHomogeneity = 0.12; // max log-intensity range in a 3x3 window
inline constexpr int kBiasMinPairs = 200;
inline constexpr double kBiasPrior = 0.03;       // prior scale of log-gradient coefficients
}  // namespace feature_params

/// Handcrafted artifact features of a 2D slice.
///
/// Intensities are first divided by the mean foreground intensity, then:
///  - f1 noise: robust sigma, MAD of the 5-point Laplacian over background
///    pixels at least 3 pixels away from the foreground.
///  - f2 ghosting: attenuation of k-space lines at multiples of a period.
///    Each line's log-power dip against its two neighbours is averaged over
///    multiples of periods 2..10, less its median over all lines and two
///    standard errors; the best period along either axis is reported as an
///    amplitude 1 - exp(-dip / 2).
///  - f3 bias: RMS of a smooth log-intensity gradient field, fitted by ridge
///    least squares to neighbour differences inside homogeneous tissue and
///    corrected for the noise contribution.
///  - f4 sharpness: |ln(Ex / Ey)| with Ex, Ey the mean k-space power per
///    coefficient in the band [N/5, 3N/8) along x and y.
/// An all-zero slice maps to (0, 0, 0, 0).
FeatureVector extract_features(const Image2D& slice, const Mask2D& mask);

struct ScorerParams {
    std::array<double, 4> w{0.0, 0.0, 0.0, 0.0};
    double b = 0.0;
};

// logistic(w . fv + b)
double score(const ScorerParams& params, const FeatureVector& fv) noexcept;

struct TripletScores {
    double anchor = 0.0;
    double positive = 0.0;
    double negative = 0.0;
    double margin = 0.0;
};

// Sum over items of max(0, Sa - Sp + m) + max(0, Sn - Sa + m).
double triplet_loss(std::span<const TripletScores> batch);

/// Objective used by the trainer.
///  - Descending:      the two hinges of `triplet_loss`, one shared margin
///                    m = dynamic_margin(s_negative, s_positive).
///  - SeverityOrdered: scores rise with severity, anchor < positive < negative:
///                    max(0, Sa - Sp + m_ap) + max(0, Sa - Sn + m_an), each margin
///                    the dynamic margin of that pair's severities.
enum class TripletForm { Descending, SeverityOrdered };

std::string_view to_string(TripletForm f) noexcept;
TripletForm parse_triplet_form(std::string_view name);

inline constexpr double kMarginScale = 0.3;

// m0 * (s_negative - s_positive), clamped to [0, m0].
double dynamic_margin(double negative_severity, double positive_severity);

struct TripletFeatures {
    FeatureVector anchor{};
    FeatureVector positive{};
    FeatureVector negative{};
    double anchor_severity = 0.0;
    double positive_severity = 0.0;
    double negative_severity = 0.0;
};

struct LossAndGradient {
    double loss = 0.0;
    std::array<double, 4> grad_w{0.0, 0.0, 0.0, 0.0};
    double grad_b = 0.0;
};

// Total loss over all triplets and its gradient w.r.t. (w, b). Hinges at
// exactly zero contribute no gradient.
LossAndGradient triplet_objective(const ScorerParams& params, std::span<const TripletFeatures> triplets,
                                  TripletForm form);

struct TrainOptions {
    int epochs = 2000;
    double learning_rate = 0.5;
    TripletForm form = TripletForm::SeverityOrdered;
    double l2 = 1e-3;  // weight decay on w (not b), per triplet
    ScorerParams initial{};
};

struct TrainResult {
    ScorerParams params;       // best iterate seen
    ScorerParams final_params; // iterate after the last epoch
    std::vector<double> loss_trace;  // loss at epoch 0..epochs (before each step, then final)
    double initial_loss = 0.0;
    double best_loss = 0.0;
};

/// Full-batch gradient descent on the triplet objective. The step uses the
/// mean per-triplet gradient so the learning rate is independent of batch size.
TrainResult train_scorer(std::span<const TripletFeatures> triplets, const TrainOptions& options);

}  // namespace harmokit
