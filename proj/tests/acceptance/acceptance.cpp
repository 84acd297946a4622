// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "harmokit/attention.hpp"
#include "harmokit/harness.hpp"
#include "harmokit/metrics.hpp"
#include "harmokit/nifti.hpp"
#include "harmokit/scorer.hpp"
#include "harmokit/stats.hpp"

using namespace harmokit;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and thresholds.
constexpr int kAttentionCases = 1000;
constexpr double kWeightSumTol = 1e-6;
constexpr double kAttentionSeconds = 10.0;
constexpr int kFovPhantoms = 30;
constexpr double kFovFraction = 0.25;
constexpr int kFovMinWins = 28;
constexpr double kFovMaxP = 0.01;
constexpr double kFovSeconds = 120.0;
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr int kFdPoints = 10;
constexpr double kMinRho = 0.8;
constexpr double kSeveritySeconds = 60.0;
constexpr double kSsimIdenticalTol = 1e-9;
constexpr double kSsimClosedFormTol = 1e-6;
constexpr double kBhTol = 1e-12;
constexpr int kBonferroniVectors = 100;
constexpr int kCvScanners = 6;
constexpr int kCvMinRegions = 3;
constexpr int kNiftiVolumes = 20;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

SourceStack random_stack(std::mt19937& gen, std::size_t k, int w, int h) {
    std::uniform_real_distribution<float> val(0.0f, 1.0f);
    std::normal_distribution<double> logit(0.0, 3.0);
    SourceStack s;
    for (std::size_t i = 0; i < k; ++i) {
        Image2D img(w, h);
        Mask2D m(w, h);
        for (auto& v : img.data) v = val(gen);
        for (auto& b : m.data) b = gen() & 1u;
        s.slices.push_back(std::move(img));
        s.masks.push_back(std::move(m));
        s.logits.push_back(logit(gen));
    }
    return s;
}

Outcome ac1_attention() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937 gen(101);
    std::uniform_int_distribution<int> kdist(1, 4), side(1, 16);
    long bad_sum = 0, bad_zero = 0, bad_perm = 0;
    for (int c = 0; c < kAttentionCases; ++c) {
        const std::size_t k = static_cast<std::size_t>(kdist(gen));
        const int w = side(gen), h = side(gen);
        const auto s = random_stack(gen, k, w, h);
        const auto a = enhanced_attention(s);
        const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
        for (std::size_t p = 0; p < n; ++p) {
            double sum = 0.0;
            std::size_t fg = 0;
            for (std::size_t i = 0; i < k; ++i) {
                sum += a.at(i, p);
                fg += s.masks[i].data[p];
            }
            bad_sum += std::fabs(sum - 1.0) > kWeightSumTol;
            if (fg > 0 && fg < k) {
                for (std::size_t i = 0; i < k; ++i) bad_zero += !s.masks[i].data[p] && a.at(i, p) != 0.0;
            }
        }
        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), gen);
        SourceStack t;
        for (std::size_t i : perm) {
            t.slices.push_back(s.slices[i]);
            t.masks.push_back(s.masks[i]);
            t.logits.push_back(s.logits[i]);
        }
        const auto b = enhanced_attention(t);
        for (std::size_t j = 0; j < k; ++j) {
            const auto pa = a.plane(perm[j]);
            const auto pb = b.plane(j);
            bad_perm += std::memcmp(pa.data(), pb.data(), pa.size() * sizeof(double)) != 0;
        }
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = bad_sum == 0 && bad_zero == 0 && bad_perm == 0 && secs < kAttentionSeconds;
    o.detail = std::to_string(kAttentionCases) + " cases, sum violations " + std::to_string(bad_sum) +
               ", nonzero background weights " + std::to_string(bad_zero) + ", permutation mismatches " +
               std::to_string(bad_perm) + fmt(", %.2f s", secs);
    return o;
}

Outcome ac2_fov() {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig c;
    c.kind = ExperimentKind::FovImputation;
    c.phantom_count = kFovPhantoms;
    c.cropped_contrasts = {Contrast::T1w};
    c.crop_kind = FovCropKind::Anterior;
    c.crop_fractions = {kFovFraction};
    const auto r = run_fov_imputation(c);
    const double secs = seconds_since(t0);
    const auto& run = r.summary["runs"][0];
    const int wins = run["enhanced_psnr_wins"].get<int>();
    const auto& p = run["psnr_test"]["p_raw"];
    const double pv = p.is_number() ? p.get<double>() : 1.0;
    Outcome o;
    o.pass = wins >= kFovMinWins && pv < kFovMaxP && secs < kFovSeconds;
    o.detail = std::to_string(wins) + "/" + std::to_string(kFovPhantoms) + " enhanced wins" +
               fmt(", Wilcoxon p = %.3g, mean PSNR %.2f vs %.2f dB", pv, run["mean_psnr"]["enhanced"].get<double>(),
                   run["mean_psnr"]["legacy"].get<double>()) +
               fmt(", %.1f s", secs);
    return o;
}

double rel_error(const LossAndGradient& analytic, const std::array<double, 5>& numeric) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (int i = 0; i < 5; ++i) {
        const double a = i < 4 ? analytic.grad_w[i] : analytic.grad_b;
        diff += (a - numeric[i]) * (a - numeric[i]);
        na += a * a;
        nn += numeric[i] * numeric[i];
    }
    const double scale = std::max(std::sqrt(na), std::sqrt(nn));
    return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

Outcome ac3_triplet() {
    struct Case {
        TripletScores s;
        double expected;
    };
    const Case cases[] = {
        {{0, 0, 0, 0}, 0.0},
        {{0.3, 0.1, 0.8, 0.1}, std::max(0.0, 0.3 - 0.1 + 0.1) + std::max(0.0, 0.8 - 0.3 + 0.1)},
        {{0.5, 0.9, 0.1, 0.2}, 0.0},
    };
    int exact = 0;
    for (const auto& c : cases) exact += triplet_loss(std::span(&c.s, 1)) == c.expected;

    std::mt19937 gen(303);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 2.0);
    std::vector<TripletFeatures> triplets(40);
    for (auto& t : triplets) {
        for (int k = 0; k < 4; ++k) {
            t.anchor[k] = u(gen);
            t.positive[k] = u(gen);
            t.negative[k] = u(gen);
        }
        t.anchor_severity = 0.0;
        t.positive_severity = 0.02;
        t.negative_severity = 0.05 + 0.95 * u(gen);
    }
    double worst = 0.0;
    for (int i = 0; i < kFdPoints; ++i) {
        const ScorerParams p{{n(gen), n(gen), n(gen), n(gen)}, n(gen)};
        const auto lg = triplet_objective(p, triplets, TripletForm::Descending);
        std::array<double, 5> g{};
        for (int d = 0; d < 5; ++d) {
            ScorerParams hi = p, lo = p;
            (d < 4 ? hi.w[d] : hi.b) += kFdStep;
            (d < 4 ? lo.w[d] : lo.b) -= kFdStep;
            g[d] = (triplet_objective(hi, triplets, TripletForm::Descending).loss -
                    triplet_objective(lo, triplets, TripletForm::Descending).loss) /
                   (2.0 * kFdStep);
        }
        worst = std::max(worst, rel_error(lg, g));
    }
    Outcome o;
    o.pass = exact == 3 && worst < kFdRelTol;
    o.detail = std::to_string(exact) + "/3 analytic cases exact" +
               fmt(", worst gradient rel. error %.2e over %.0f points", worst, kFdPoints);
    return o;
}

Outcome ac4_severity() {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig c;
    c.kind = ExperimentKind::SeverityTrain;
    c.seed = 42;
    c.scorer.test_slices = 50;
    const auto r = run_severity_train(c);
    const double secs = seconds_since(t0);
    const double rho = r.summary["spearman_rho"].get<double>();
    Outcome o;
    o.pass = rho >= kMinRho && secs < kSeveritySeconds;
    o.detail = fmt("Spearman rho = %.3f on %.0f held-out slices", rho, c.scorer.test_slices) +
               fmt(", %.1f s", secs);
    return o;
}

Outcome ac5_metrics() {
    std::vector<std::string> failed;
    if (psnr_from_mse(0.01, 1.0) != 20.0) failed.push_back("psnr");

    std::mt19937 gen(505);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    const Dims d{24, 24, 4};
    std::vector<float> v(d.voxel_count());
    for (float& f : v) f = u(gen);
    const Volume3D vol(d, {1, 1, 1}, v);
    if (!(std::fabs(ssim(vol, vol) - 1.0) < kSsimIdenticalTol)) failed.push_back("ssim identical");

    const float ca = 0.2f, cb = 0.4f;
    SsimOptions opt;
    opt.dynamic_range = 1.0;
    const double c1 = (0.01 * 1.0) * (0.01 * 1.0);
    const double closed = (2.0 * ca * cb + c1) / (double(ca) * ca + double(cb) * cb + c1);
    if (!(std::fabs(ssim(Volume3D(d, {1, 1, 1}, ca), Volume3D(d, {1, 1, 1}, cb), opt) - closed) < kSsimClosedFormTol))
        failed.push_back("ssim constant");

    const LabelMap a{{6, 1, 1}, {1, 1, 1}, {1, 1, 1, 1, 0, 0}};
    const LabelMap b{{6, 1, 1}, {1, 1, 1}, {0, 0, 1, 1, 1, 1}};
    if (dice(a, b, 1) != 0.5) failed.push_back("dsc");
    if (coefficient_of_variation(std::vector<double>{1, 2, 3}) != 0.5) failed.push_back("cv");

    Outcome o;
    o.pass = failed.empty();
    o.detail = failed.empty() ? "psnr, ssim identical, ssim constant, dsc, cv oracles hold" : "failed:";
    for (const auto& f : failed) o.detail += " " + f;
    return o;
}

Outcome ac6_stats() {
    std::vector<std::string> failed;
    const std::vector<double> x{1.1, 2.3, 3.0, 4.2, 5.5}, zero(5, 0.0);
    const auto w = wilcoxon_signed_rank(x, zero);
    if (w.p_value != 0.0625) failed.push_back("wilcoxon");

    const std::vector<double> p{0.01, 0.02, 0.03, 0.04};
    const auto bh = benjamini_hochberg(p, 0.05);
    for (double v : bh.adjusted)
        if (!(std::fabs(v - 0.04) < kBhTol)) {
            failed.push_back("bh");
            break;
        }

    std::mt19937 gen(606);
    std::uniform_real_distribution<double> u(1e-6, 1.0);
    int violations = 0;
    for (int t = 0; t < kBonferroniVectors; ++t) {
        std::vector<double> q(2 + t % 15);
        for (auto& v : q) v = std::pow(u(gen), 3.0);
        const auto rb = bonferroni(q, 0.05);
        const auto rh = benjamini_hochberg(q, 0.05);
        for (std::size_t i = 0; i < q.size(); ++i) violations += (rb.reject[i] && !rh.reject[i]) || rb.adjusted[i] < rh.adjusted[i];
    }
    if (violations) failed.push_back("bonferroni dominance (" + std::to_string(violations) + ")");

    Outcome o;
    o.pass = failed.empty();
    o.detail = failed.empty() ? "wilcoxon exact p, BH adjustment, Bonferroni dominance on " +
                                    std::to_string(kBonferroniVectors) + " vectors hold"
                              : "failed:";
    for (const auto& f : failed) o.detail += " " + f;
    return o;
}

Outcome ac7_cv() {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig c;
    c.kind = ExperimentKind::CvTable;
    c.phantom_count = 1;
    c.scanner_count = kCvScanners;
    const auto r = run_cv_table(c);
    const int lower = r.summary["regions_with_lower_fused_volume_cv"].get<int>();
    std::string per;
    for (const auto& reg : r.summary["regions"]) {
        auto show = [](const nlohmann::json& v) { return v.is_null() ? std::string("nan") : fmt("%.3f", v.get<double>()); };
        per += " " + reg["region"].get<std::string>() + " " + show(reg["raw"]["volume_cv"]) + "->" +
               show(reg["fused"]["volume_cv"]);
    }
    Outcome o;
    o.pass = lower >= kCvMinRegions;
    o.detail = std::to_string(lower) + "/4 regions with lower fused volume CV (" + per.substr(1) + ")" +
               fmt(", %.1f s", seconds_since(t0));
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome ac8_format() {
    std::mt19937 gen(808);
    std::uniform_int_distribution<int> side(1, 12);
    std::normal_distribution<float> val(0.0f, 1000.0f);
    const fs::path dir = fs::temp_directory_path() / "harmokit_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    int exact = 0;
    for (int t = 0; t < kNiftiVolumes; ++t) {
        const Dims d{side(gen), side(gen), side(gen)};
        std::vector<float> v(d.voxel_count());
        for (float& f : v) f = val(gen);
        const Volume3D vol(d, {0.75 + 0.0625 * t, 1.0, 1.5}, v);
        const fs::path p = dir / "rt.nii";
        nifti::save(vol, p);
        const auto back = nifti::load(p);
        exact += back.dims() == d && back.spacing() == vol.spacing() &&
                 std::memcmp(back.data().data(), v.data(), v.size() * sizeof(float)) == 0;
    }

    ExperimentConfig c;
    c.kind = ExperimentKind::FovImputation;
    c.phantom_count = 5;
    c.phantom_size = 48;
    c.cropped_contrasts = {Contrast::T1w};
    c.crop_fractions = {kFovFraction};
    write_report(run_experiment(c), c, dir / "a");
    write_report(run_experiment(c), c, dir / "b");
    bool identical = true;
    for (const char* f : {"results.csv", "stats.csv"}) {
        const auto sa = slurp(dir / "a" / f), sb = slurp(dir / "b" / f);
        identical = identical && !sa.empty() && sa == sb;
    }
    fs::remove_all(dir);
    Outcome o;
    o.pass = exact == kNiftiVolumes && identical;
    o.detail = std::to_string(exact) + "/" + std::to_string(kNiftiVolumes) + " NIfTI round-trips bit-exact, CSVs " +
               (identical ? "byte-identical" : "differ") + " across two runs";
    return o;
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"AC1 attention contract", ac1_attention}, {"AC2 limited-FOV direction", ac2_fov},
        {"AC3 triplet loss and gradient", ac3_triplet}, {"AC4 severity ranking", ac4_severity},
        {"AC5 metric oracles", ac5_metrics}, {"AC6 statistics oracles", ac6_stats},
        {"AC7 CV reduction", ac7_cv}, {"AC8 format and determinism", ac8_format},
    };
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/8 criteria passed\n", 8 - failures);
    return failures == 0 ? 0 : 1;
}
