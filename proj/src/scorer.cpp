#include "harmokit/scorer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include "harmokit/fft.hpp"

namespace harmokit {

namespace {

double clamp01(double v) {
    return std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

std::size_t at(const Image2D& img, int i, int j) {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(img.width) * static_cast<std::size_t>(j);
}

// Square (Chebyshev) dilation or erosion by r pixels; outside the grid counts as background.
Mask2D morph(const Mask2D& m, int r, bool erode) {
    Mask2D out(m.width, m.height);
    for (int j = 0; j < m.height; ++j) {
        for (int i = 0; i < m.width; ++i) {
            bool any = false, all = true;
            for (int b = -r; b <= r; ++b) {
                for (int a = -r; a <= r; ++a) {
                    const int x = i + a, y = j + b;
                    const bool v = x >= 0 && y >= 0 && x < m.width && y < m.height && m.at(x, y);
                    any = any || v;
                    all = all && v;
                }
            }
            out.at(i, j) = erode ? all : any;
        }
    }
    return out;
}

double noise_sigma(const Image2D& img, const Mask2D& mask) {
    using namespace feature_params;
    if (img.width < 3 || img.height < 3) return 0.0;
    const Mask2D near = morph(mask, kBackgroundMargin, false);
    auto laplacians = [&](bool background_only) {
        std::vector<double> lap;
        for (int j = 1; j + 1 < img.height; ++j) {
            for (int i = 1; i + 1 < img.width; ++i) {
                if (background_only && near.at(i, j)) continue;
                lap.push_back(4.0 * img.at(i, j) - img.at(i - 1, j) - img.at(i + 1, j) - img.at(i, j - 1) - img.at(i, j + 1));
            }
        }
        return lap;
    };
    auto lap = laplacians(true);
    if (lap.size() < static_cast<std::size_t>(kMinBackgroundPixels)) lap = laplacians(false);
    const double med = median(lap);
    for (double& v : lap) v = std::fabs(v - med);
    // MAD -> sigma of the Laplacian, whose variance is 20 sigma^2 for white noise.
    return median(std::move(lap)) / 0.6744897501960817 / std::sqrt(20.0);
}

// Power per k-space index 0..N/2 of the 1D DFT along `axis`, summed over all
// lines and folded (k with N - k), divided by lines * N.
std::vector<double> line_power(const Image2D& img, int axis) {
    const int n = axis == 0 ? img.width : img.height;
    const int lines = axis == 0 ? img.height : img.width;
    const int half = n / 2;
    std::vector<std::complex<double>> buf(img.data.begin(), img.data.end());
    if (axis == 0) {
        fft::transform_lines(buf, n, lines, 1, img.width, false);
    } else {
        fft::transform_lines(buf, n, lines, img.width, 1, false);
    }
    std::vector<double> power(static_cast<std::size_t>(half) + 1, 0.0);
    for (int l = 0; l < lines; ++l) {
        for (int k = 0; k <= half; ++k) {
            auto coef = [&](int kk) {
                return std::norm(buf[axis == 0 ? at(img, kk, l) : at(img, l, kk)]);
            };
            const int mirror = (n - k) % n;
            power[static_cast<std::size_t>(k)] += mirror == k ? 2.0 * coef(k) : coef(k) + coef(mirror);
        }
    }
    for (double& p : power) p /= static_cast<double>(lines) * n;
    return power;
}

double ghost_attenuation(const std::vector<double>& power) {
    using namespace feature_params;
    const int half = static_cast<int>(power.size()) - 1;
    if (half < 6) return 0.0;
    std::vector<double> dip(static_cast<std::size_t>(half), 0.0);
    for (int k = 2; k < half; ++k) {
        const double p = power[static_cast<std::size_t>(k)];
        const double nb = power[static_cast<std::size_t>(k - 1)] * power[static_cast<std::size_t>(k + 1)];
        if (p > 0.0 && nb > 0.0) dip[static_cast<std::size_t>(k)] = std::clamp(0.5 * std::log(nb) - std::log(p), -kMaxLineDip, kMaxLineDip);
    }
    const std::vector<double> all(dip.begin() + 2, dip.end());
    const double base = median(all);
    std::vector<double> dev(all.size());
    std::transform(all.begin(), all.end(), dev.begin(), [&](double v) { return std::fabs(v - base); });
    const double spread = 1.482602218505602 * median(std::move(dev));

    double best = 0.0;
    for (int period = 2; period <= kMaxGhostPeriod; ++period) {
        double acc = 0.0;
        int count = 0;
        for (int k = period; k < half; k += period) {
            acc += dip[static_cast<std::size_t>(k)];
            ++count;
        }
        if (count < 2) continue;
        best = std::max(best, acc / count - base - kGhostGuard * spread / std::sqrt(static_cast<double>(count)));
    }
    return 1.0 - std::exp(-0.5 * best);
}

double band_power(const std::vector<double>& power) {
    const int n = 2 * (static_cast<int>(power.size()) - 1);
    const int lo = std::max(1, n / 5);
    const int hi = std::max(lo + 1, 3 * n / 8);
    double acc = 0.0;
    for (int k = lo; k < hi && k < static_cast<int>(power.size()); ++k) acc += power[static_cast<std::size_t>(k)];
    return acc;
}

double sharpness_imbalance(const std::vector<double>& px, const std::vector<double>& py) {
    const double ex = band_power(px);
    const double ey = band_power(py);
    if (!(ex > 0.0 && ey > 0.0)) return 0.0;
    return std::fabs(std::log(ex / ey));
}

double plane_coord(double i, int n) {
    return n == 1 ? 0.0 : (2.0 * i) / (n - 1) - 1.0;
}

double bias_gradient(const Image2D& img, const Mask2D& mask) {
    using namespace feature_params;
    using Mat = Eigen::Matrix<double, 6, 6>;
    using Vec = Eigen::Matrix<double, 6, 1>;
    const int w = img.width, h = img.height;
    if (w < 3 || h < 3) return 0.0;
    const Mask2D inner = morph(mask, kBiasErosion, true);
    std::vector<double> logv(img.size(), 0.0);
    std::vector<std::uint8_t> valid(img.size(), 0);
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            const double v = img.at(i, j);
            if (inner.at(i, j) && v > kBiasMinIntensity) {
                logv[at(img, i, j)] = std::log(v);
                valid[at(img, i, j)] = 1;
            }
        }
    }
    // Homogeneous pixels: full 3x3 neighbourhood valid with a small log range.
    std::vector<std::uint8_t> flat(img.size(), 0);
    for (int j = 1; j + 1 < h; ++j) {
        for (int i = 1; i + 1 < w; ++i) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            bool ok = true;
            for (int b = -1; b <= 1 && ok; ++b) {
                for (int a = -1; a <= 1; ++a) {
                    const std::size_t q = at(img, i + a, j + b);
                    if (!valid[q]) {
                        ok = false;
                        break;
                    }
                    lo = std::min(lo, logv[q]);
                    hi = std::max(hi, logv[q]);
                }
            }
            flat[at(img, i, j)] = ok && hi - lo < kBiasHomogeneity;
        }
    }

    auto basis = [&](double i, double j) {
        const double x = plane_coord(i, w), y = plane_coord(j, h);
        Vec r;
        r << 1.0, x, y, x * x, x * y, y * y;
        return r;
    };
    Mat ata[2] = {Mat::Zero(), Mat::Zero()};
    Vec atb[2] = {Vec::Zero(), Vec::Zero()};
    double sq[2] = {0.0, 0.0};
    std::size_t pairs[2] = {0, 0};
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            if (!flat[at(img, i, j)]) continue;
            for (int axis = 0; axis < 2; ++axis) {
                const int i2 = i + (axis == 0), j2 = j + (axis == 1);
                if (i2 >= w || j2 >= h || !flat[at(img, i2, j2)]) continue;
                const double d = logv[at(img, i2, j2)] - logv[at(img, i, j)];
                const Vec r = basis(0.5 * (i + i2), 0.5 * (j + j2));
                ata[axis] += r * r.transpose();
                atb[axis] += r * d;
                sq[axis] += d * d;
                ++pairs[axis];
            }
        }
    }
    if (pairs[0] < static_cast<std::size_t>(kBiasMinPairs) || pairs[1] < static_cast<std::size_t>(kBiasMinPairs)) return 0.0;

    Vec coef[2];
    double inflation = 0.0;
    for (int axis = 0; axis < 2; ++axis) {
        const Vec ols = ata[axis].ldlt().solve(atb[axis]);
        const double n = static_cast<double>(pairs[axis]);
        const double var = std::max(1e-12, (sq[axis] - ols.dot(atb[axis])) / (n - 6.0));
        const Mat ridge = ata[axis] + (var / (kBiasPrior * kBiasPrior)) * Mat::Identity();
        const auto solver = ridge.ldlt();
        coef[axis] = solver.solve(atb[axis]);
        inflation += var * solver.solve(ata[axis]).trace() / n;
    }
    double ms = 0.0;
    std::size_t count = 0;
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            if (!flat[at(img, i, j)]) continue;
            const Vec r = basis(i, j);
            const double gx = r.dot(coef[0]), gy = r.dot(coef[1]);
            ms += gx * gx + gy * gy;
            ++count;
        }
    }
    // Per-pixel log-gradient scaled to a log-amplitude across half the slice.
    return std::sqrt(std::max(0.0, ms / static_cast<double>(count) - inflation)) * 0.5 * w;
}

double logistic(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

FeatureVector extract_features(const Image2D& slice, const Mask2D& mask) {
    if (mask.width != slice.width || mask.height != slice.height) {
        throw std::invalid_argument("extract_features: mask shape does not match slice");
    }
    double fg_sum = 0.0, abs_sum = 0.0;
    std::size_t fg_count = 0;
    for (std::size_t i = 0; i < slice.size(); ++i) {
        abs_sum += std::fabs(slice.data[i]);
        if (mask.data[i]) {
            fg_sum += slice.data[i];
            ++fg_count;
        }
    }
    double scale = fg_count ? fg_sum / static_cast<double>(fg_count) : abs_sum / static_cast<double>(slice.size());
    if (!(scale > 0.0)) scale = abs_sum / static_cast<double>(slice.size());
    if (!(scale > 0.0) || !std::isfinite(scale)) return {0.0, 0.0, 0.0, 0.0};

    Image2D norm(slice.width, slice.height);
    for (std::size_t i = 0; i < slice.size(); ++i) norm.data[i] = static_cast<float>(slice.data[i] / scale);

    const auto px = line_power(norm, 0);
    const auto py = line_power(norm, 1);
    const double f1 = noise_sigma(norm, mask);
    const double f2 = std::max(ghost_attenuation(px), ghost_attenuation(py));
    const double f3 = fg_count ? bias_gradient(norm, mask) : 0.0;
    const double f4 = sharpness_imbalance(px, py);
    return {clamp01(f1 / feature_reference::kNoise), clamp01(f2 / feature_reference::kGhost),
            clamp01(f3 / feature_reference::kBias), clamp01(f4 / feature_reference::kSharpness)};
}

double score(const ScorerParams& params, const FeatureVector& fv) noexcept {
    double z = params.b;
    for (std::size_t i = 0; i < 4; ++i) z += params.w[i] * fv[i];
    return logistic(z);
}

double triplet_loss(std::span<const TripletScores> batch) {
    double loss = 0.0;
    for (const auto& t : batch) {
        loss += std::max(0.0, t.anchor - t.positive + t.margin) + std::max(0.0, t.negative - t.anchor + t.margin);
    }
    return loss;
}

std::string_view to_string(TripletForm f) noexcept {
    return f == TripletForm::Descending ? "descending" : "severity_ordered";
}

TripletForm parse_triplet_form(std::string_view name) {
    if (name == "descending") return TripletForm::Descending;
    if (name == "severity_ordered") return TripletForm::SeverityOrdered;
    throw std::invalid_argument("unknown triplet form '" + std::string(name) + "'");
}

double dynamic_margin(double negative_severity, double positive_severity) {
    if (!(negative_severity >= 0.0 && negative_severity <= 1.0 && positive_severity >= 0.0 && positive_severity <= 1.0)) {
        throw std::invalid_argument("dynamic_margin: severities must be in [0, 1]");
    }
    return std::clamp(kMarginScale * (negative_severity - positive_severity), 0.0, kMarginScale);
}

LossAndGradient triplet_objective(const ScorerParams& params, std::span<const TripletFeatures> triplets,
                                  TripletForm form) {
    LossAndGradient out;
    // d/dtheta of S = S (1 - S) * (f, 1)
    auto accumulate = [&](const FeatureVector& f, double sign) {
        const double s = score(params, f);
        const double ds = s * (1.0 - s) * sign;
        for (std::size_t i = 0; i < 4; ++i) out.grad_w[i] += ds * f[i];
        out.grad_b += ds;
    };
    const bool descending = form == TripletForm::Descending;
    for (const auto& t : triplets) {
        const double m1 = descending ? dynamic_margin(t.negative_severity, t.positive_severity)
                                  : dynamic_margin(t.positive_severity, t.anchor_severity);
        const double m2 = descending ? m1 : dynamic_margin(t.negative_severity, t.anchor_severity);
        const double sa = score(params, t.anchor);
        const double sp = score(params, t.positive);
        const double sn = score(params, t.negative);

        const double h1 = sa - sp + m1;
        if (h1 > 0.0) {
            out.loss += h1;
            accumulate(t.anchor, 1.0);
            accumulate(t.positive, -1.0);
        }
        const double h2 = (descending ? sn - sa : sa - sn) + m2;
        if (h2 > 0.0) {
            out.loss += h2;
            accumulate(t.negative, descending ? 1.0 : -1.0);
            accumulate(t.anchor, descending ? -1.0 : 1.0);
        }
    }
    return out;
}

namespace {

// N * l2 / 2 * |w|^2, so that the mean-gradient step carries l2 * w.
double weight_penalty(const ScorerParams& p, double l2, std::size_t n) {
    double sq = 0.0;
    for (double w : p.w) sq += w * w;
    return 0.5 * l2 * static_cast<double>(n) * sq;
}

}  // namespace

TrainResult train_scorer(std::span<const TripletFeatures> triplets, const TrainOptions& options) {
    if (triplets.empty()) throw std::invalid_argument("train_scorer needs at least one triplet");
    if (options.epochs < 0) throw std::invalid_argument("train_scorer: epochs must be >= 0");
    if (!(options.learning_rate > 0.0)) throw std::invalid_argument("train_scorer: learning rate must be > 0");
    if (!(options.l2 >= 0.0)) throw std::invalid_argument("train_scorer: l2 must be >= 0");

    TrainResult result;
    ScorerParams p = options.initial;
    const double inv_n = 1.0 / static_cast<double>(triplets.size());
    result.loss_trace.reserve(static_cast<std::size_t>(options.epochs) + 1);

    result.params = p;
    result.best_loss = std::numeric_limits<double>::infinity();
    for (int epoch = 0; epoch <= options.epochs; ++epoch) {
        const LossAndGradient lg = triplet_objective(p, triplets, options.form);
        const double objective = lg.loss + weight_penalty(p, options.l2, triplets.size());
        result.loss_trace.push_back(objective);
        if (objective < result.best_loss) {
            result.best_loss = objective;
            result.params = p;
        }
        if (epoch == options.epochs) break;
        for (std::size_t i = 0; i < 4; ++i) {
            p.w[i] -= options.learning_rate * (inv_n * lg.grad_w[i] + options.l2 * p.w[i]);
        }
        p.b -= options.learning_rate * inv_n * lg.grad_b;
    }
    result.initial_loss = result.loss_trace.front();
    result.final_params = p;
    return result;
}

}  // namespace harmokit
