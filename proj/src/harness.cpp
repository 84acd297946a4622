#include "harmokit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "harmokit/artifact.hpp"
#include "harmokit/attention.hpp"
#include "harmokit/error.hpp"
#include "harmokit/rng.hpp"
#include "harmokit/stats.hpp"

namespace harmokit {

using nlohmann::json;

namespace {

constexpr std::uint64_t kCalibrationSeedOffset = 1'000'000;
constexpr std::uint64_t kTrainSeedOffset = 2'000'000;
constexpr std::uint64_t kTestSeedOffset = 3'000'000;
constexpr std::uint64_t kScannerSeedOffset = 4'000'000;
constexpr int kMappingBins = 64;
constexpr char kSyntheticNote[] = "synthetic data: digital phantoms only, not clinical results";

std::string fraction_label(double f) {
    std::ostringstream s;
    s << f;
    return s.str();
}

std::string subject_name(std::uint64_t seed) { return "phantom_" + std::to_string(seed); }

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::vector<Contrast> parse_contrast_list(const json& j) {
    std::vector<Contrast> out;
    for (const auto& v : j) out.push_back(parse_contrast(v.get<std::string>()));
    return out;
}

json contrast_list(std::span<const Contrast> cs) {
    json a = json::array();
    for (Contrast c : cs) a.push_back(std::string(to_string(c)));
    return a;
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
            throw std::invalid_argument("unknown config key '" + where + key + "'");
        }
    }
}

PhantomOutput make_phantom(const ExperimentConfig& config, std::uint64_t seed, std::vector<Contrast> contrasts) {
    PhantomSpec spec;
    spec.dims = {config.phantom_size, config.phantom_size, config.phantom_size};
    spec.seed = seed;
    spec.subject_jitter = config.subject_jitter;
    spec.contrasts = std::move(contrasts);
    return generate_phantom(spec);
}

Mask3D mask_intersection(const Mask3D& a, const Mask3D& b) {
    std::vector<std::uint8_t> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] && b[i];
    return Mask3D(a.dims(), std::move(out));
}

double mean_of(std::span<const double> v) {
    return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                     : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double cv_or_nan(std::span<const double> v) {
    try {
        return coefficient_of_variation(v);
    } catch (const std::invalid_argument&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// One Wilcoxon comparison per entry, corrected jointly; skipped entries carry
// their reason and stay out of the correction family.
struct PendingTest {
    std::string comparison;
    std::vector<double> x;
    std::vector<double> y;
};

enum class Correction { Bonferroni, BenjaminiHochberg };

std::vector<StatRow> run_tests(std::vector<PendingTest> tests, double alpha, Correction correction, json& out) {
    std::vector<StatRow> rows;
    std::vector<double> p;
    std::vector<std::size_t> tested;
    for (auto& t : tests) {
        StatRow row;
        row.comparison = t.comparison;
        json entry{{"comparison", t.comparison}};
        try {
            const auto r = wilcoxon_signed_rank(t.x, t.y);
            row.n = r.n_effective;
            row.w = r.statistic;
            row.p_raw = r.p_value;
            row.method = r.method;
            tested.push_back(rows.size());
            p.push_back(r.p_value);
        } catch (const std::invalid_argument& e) {
            row.n = static_cast<int>(t.x.size());
            row.w = std::numeric_limits<double>::quiet_NaN();
            row.p_raw = std::numeric_limits<double>::quiet_NaN();
            row.p_adjusted = std::numeric_limits<double>::quiet_NaN();
            row.method = "skipped";
            const std::string what = e.what();
            entry["skipped"] = true;
            entry["reason"] = what.find("N < 5") != std::string::npos ? "N < 5" : what;
        }
        rows.push_back(row);
        out.push_back(entry);
    }
    if (!p.empty()) {
        const auto adj = correction == Correction::Bonferroni ? bonferroni(p, alpha) : benjamini_hochberg(p, alpha);
        for (std::size_t i = 0; i < tested.size(); ++i) {
            rows[tested[i]].p_adjusted = adj.adjusted[i];
            rows[tested[i]].reject = adj.reject[i];
        }
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto& e = out[out.size() - rows.size() + i];
        e["N"] = rows[i].n;
        e["W"] = number_or_null(rows[i].w);
        e["p_raw"] = number_or_null(rows[i].p_raw);
        e["p_adjusted"] = number_or_null(rows[i].p_adjusted);
        e["method"] = rows[i].method;
        e["reject"] = rows[i].reject;
    }
    return rows;
}

json base_summary(const ExperimentConfig& config) {
    return json{{"data", "synthetic"},
                {"note", kSyntheticNote},
                {"experiment", std::string(to_string(config.kind))},
                {"seed", config.seed}};
}

// Harmonizing maps from each scanner's contrasts to scanner 0's target
// contrast, fitted on a calibration phantom imaged on every scanner.
struct Harmonizer {
    std::vector<std::vector<IntensityMapping>> maps;  // [scanner][contrast]
};

Harmonizer fit_harmonizer(const ExperimentConfig& config, std::span<const ScannerProfile> profiles) {
    const auto calib = make_phantom(config, config.seed + kCalibrationSeedOffset, config.contrasts);
    const Volume3D target = scanner_transform(calib.image(config.target_contrast), profiles.front());
    Harmonizer h;
    for (const auto& profile : profiles) {
        auto& row = h.maps.emplace_back();
        for (Contrast c : config.contrasts) {
            const Volume3D acquired = scanner_transform(calib.image(c), profile);
            row.push_back(IntensityMapping::fit(acquired.data(), target.data(), calib.mask.data(), kMappingBins));
        }
    }
    return h;
}

Volume3D harmonize(const ExperimentConfig& config, const Harmonizer& h, std::size_t scanner,
                   std::span<const Volume3D> acquired, const Mask3D& mask) {
    std::vector<Volume3D> mapped;
    std::vector<Mask3D> masks;
    std::vector<double> logits;
    for (std::size_t k = 0; k < config.contrasts.size(); ++k) {
        const auto& m = h.maps[scanner][k];
        mapped.push_back(m.apply(acquired[k], mask));
        masks.push_back(mask);
        logits.push_back(-m.fit_mse());
    }
    return fuse_volume(mapped, masks, logits, Orientation::Axial, FusionMode::Enhanced).image;
}

}  // namespace

ExperimentKind parse_experiment_kind(std::string_view name) {
    if (name == "fov-imputation") return ExperimentKind::FovImputation;
    if (name == "traveling-subject") return ExperimentKind::TravelingSubject;
    if (name == "cv-table") return ExperimentKind::CvTable;
    if (name == "severity-train") return ExperimentKind::SeverityTrain;
    throw std::invalid_argument("unknown experiment kind '" + std::string(name) + "'");
}

std::string_view to_string(ExperimentKind k) noexcept {
    switch (k) {
        case ExperimentKind::FovImputation: return "fov-imputation";
        case ExperimentKind::TravelingSubject: return "traveling-subject";
        case ExperimentKind::CvTable: return "cv-table";
        case ExperimentKind::SeverityTrain: return "severity-train";
    }
    return "fov-imputation";
}

ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    reject_unknown_keys(j, {"kind", "phantom_count", "seed", "phantom_size", "subject_jitter", "contrasts",
                            "cropped_contrasts", "crop", "mask_threshold", "alpha", "scanner_count",
                            "identical_scanners", "target_contrast", "scorer", "output_dir"},
                        "");
    ExperimentConfig c;
    try {
        if (j.contains("kind")) c.kind = parse_experiment_kind(j.at("kind").get<std::string>());
        c.phantom_count = get_or(j, "phantom_count", c.phantom_count);
        c.seed = get_or(j, "seed", c.seed);
        c.phantom_size = get_or(j, "phantom_size", c.phantom_size);
        c.subject_jitter = get_or(j, "subject_jitter", c.subject_jitter);
        if (j.contains("contrasts")) c.contrasts = parse_contrast_list(j.at("contrasts"));
        if (j.contains("cropped_contrasts")) c.cropped_contrasts = parse_contrast_list(j.at("cropped_contrasts"));
        if (j.contains("crop")) {
            const auto& cj = j.at("crop");
            reject_unknown_keys(cj, {"kind", "side", "fractions"}, "crop.");
            if (cj.contains("kind")) c.crop_kind = parse_fov_kind(cj.at("kind").get<std::string>());
            if (cj.contains("side")) c.crop_side = parse_side(cj.at("side").get<std::string>());
            if (cj.contains("fractions")) c.crop_fractions = cj.at("fractions").get<std::vector<double>>();
        }
        c.mask_threshold = get_or(j, "mask_threshold", c.mask_threshold);
        c.alpha = get_or(j, "alpha", c.alpha);
        c.scanner_count = get_or(j, "scanner_count", c.scanner_count);
        c.identical_scanners = get_or(j, "identical_scanners", c.identical_scanners);
        if (j.contains("target_contrast")) c.target_contrast = parse_contrast(j.at("target_contrast").get<std::string>());
        if (j.contains("scorer")) {
            const auto& sj = j.at("scorer");
            reject_unknown_keys(sj, {"train_phantoms", "test_slices", "epochs", "learning_rate", "l2", "triplet_form"},
                                "scorer.");
            auto& s = c.scorer;
            s.train_phantoms = get_or(sj, "train_phantoms", s.train_phantoms);
            s.test_slices = get_or(sj, "test_slices", s.test_slices);
            s.epochs = get_or(sj, "epochs", s.epochs);
            s.learning_rate = get_or(sj, "learning_rate", s.learning_rate);
            s.l2 = get_or(sj, "l2", s.l2);
            if (sj.contains("triplet_form")) s.triplet_form = parse_triplet_form(sj.at("triplet_form").get<std::string>());
        }
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config type error: ") + e.what());
    }
    validate(c);
    return c;
}

json to_json(const ExperimentConfig& c) {
    return json{{"kind", std::string(to_string(c.kind))},
                {"phantom_count", c.phantom_count},
                {"seed", c.seed},
                {"phantom_size", c.phantom_size},
                {"subject_jitter", c.subject_jitter},
                {"contrasts", contrast_list(c.contrasts)},
                {"cropped_contrasts", contrast_list(c.cropped_contrasts)},
                {"crop",
                 {{"kind", std::string(to_string(c.crop_kind))},
                  {"side", std::string(to_string(c.crop_side))},
                  {"fractions", c.crop_fractions}}},
                {"mask_threshold", c.mask_threshold},
                {"alpha", c.alpha},
                {"scanner_count", c.scanner_count},
                {"identical_scanners", c.identical_scanners},
                {"target_contrast", std::string(to_string(c.target_contrast))},
                {"scorer",
                 {{"train_phantoms", c.scorer.train_phantoms},
                  {"test_slices", c.scorer.test_slices},
                  {"epochs", c.scorer.epochs},
                  {"learning_rate", c.scorer.learning_rate},
                  {"l2", c.scorer.l2},
                  {"triplet_form", std::string(to_string(c.scorer.triplet_form))}}},
                {"output_dir", c.output_dir.string()}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw FormatError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

void validate(const ExperimentConfig& c) {
    if (c.phantom_count < 1) throw std::invalid_argument("phantom_count must be >= 1");
    if (c.phantom_size < 32) throw std::invalid_argument("phantom_size must be >= 32");
    if (!(c.subject_jitter >= 0.0 && c.subject_jitter <= 0.1)) throw std::invalid_argument("subject_jitter must be in [0, 0.1]");
    if (c.contrasts.empty()) throw std::invalid_argument("contrasts must not be empty");
    for (std::size_t i = 0; i < c.contrasts.size(); ++i) {
        for (std::size_t k = i + 1; k < c.contrasts.size(); ++k) {
            if (c.contrasts[i] == c.contrasts[k]) throw std::invalid_argument("contrasts must be distinct");
        }
    }
    const auto listed = [&](Contrast x) { return std::find(c.contrasts.begin(), c.contrasts.end(), x) != c.contrasts.end(); };
    if (!std::all_of(c.cropped_contrasts.begin(), c.cropped_contrasts.end(), listed)) {
        throw std::invalid_argument("cropped_contrasts must be a subset of contrasts");
    }
    if (!listed(c.target_contrast)) throw std::invalid_argument("target_contrast must be one of contrasts");
    if (!(c.mask_threshold > 0.0 && c.mask_threshold < 1.0)) throw std::invalid_argument("mask_threshold must be in (0, 1)");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");

    switch (c.kind) {
        case ExperimentKind::FovImputation:
            if (c.cropped_contrasts.empty()) throw std::invalid_argument("cropped_contrasts must not be empty");
            if (c.crop_fractions.empty()) throw std::invalid_argument("crop.fractions must not be empty");
            for (double f : c.crop_fractions) validate(FovCropSpec{c.crop_kind, f, c.crop_side});
            if (c.contrasts.size() < 2) throw std::invalid_argument("fov-imputation needs at least two contrasts");
            break;
        case ExperimentKind::TravelingSubject:
        case ExperimentKind::CvTable:
            if (c.scanner_count < 2) throw std::invalid_argument("scanner_count must be >= 2 (S < 2)");
            break;
        case ExperimentKind::SeverityTrain:
            if (c.scorer.train_phantoms < 1) throw std::invalid_argument("scorer.train_phantoms must be >= 1");
            if (c.scorer.test_slices < 2) throw std::invalid_argument("scorer.test_slices must be >= 2");
            if (c.scorer.epochs < 0) throw std::invalid_argument("scorer.epochs must be >= 0");
            if (!(c.scorer.learning_rate > 0.0)) throw std::invalid_argument("scorer.learning_rate must be > 0");
            if (!(c.scorer.l2 >= 0.0)) throw std::invalid_argument("scorer.l2 must be >= 0");
            break;
    }
}

IntensityMapping IntensityMapping::fit(std::span<const float> source, std::span<const float> target,
                                       std::span<const std::uint8_t> use, int bins) {
    if (source.size() != target.size() || source.size() != use.size()) {
        throw std::invalid_argument("intensity mapping: source, target and mask sizes differ");
    }
    if (bins < 1) throw std::invalid_argument("intensity mapping: bins must be >= 1");
    std::vector<std::pair<float, float>> pairs;
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (use[i]) pairs.emplace_back(source[i], target[i]);
    }
    if (pairs.size() < 2) throw std::invalid_argument("intensity mapping needs at least 2 fitting voxels");
    std::sort(pairs.begin(), pairs.end());

    IntensityMapping m;
    const std::size_t n = pairs.size();
    const double lo = pairs.front().first, hi = pairs.back().first;
    const double width = (hi - lo) / bins;
    std::size_t i = 0;
    for (int g = 0; g < bins && i < n; ++g) {
        const double edge = g + 1 == bins ? std::numeric_limits<double>::infinity() : lo + width * (g + 1);
        double sx = 0.0, sy = 0.0;
        std::size_t cnt = 0;
        for (; i < n && (pairs[i].first < edge || width == 0.0); ++i, ++cnt) {
            sx += pairs[i].first;
            sy += pairs[i].second;
        }
        if (cnt == 0) continue;
        m.xs_.push_back(sx / static_cast<double>(cnt));
        m.ys_.push_back(sy / static_cast<double>(cnt));
    }
    double sq = 0.0;
    for (const auto& [s, t] : pairs) {
        const double d = m(s) - t;
        sq += d * d;
    }
    m.fit_mse_ = sq / static_cast<double>(n);
    return m;
}

IntensityMapping IntensityMapping::identity() {
    IntensityMapping m;
    m.identity_ = true;
    return m;
}

double IntensityMapping::operator()(double v) const noexcept {
    if (identity_) return v;
    if (xs_.size() == 1 || v <= xs_.front()) return ys_.front();
    if (v >= xs_.back()) return ys_.back();
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), v);
    const std::size_t k = static_cast<std::size_t>(it - xs_.begin());
    const double t = (v - xs_[k - 1]) / (xs_[k] - xs_[k - 1]);
    return ys_[k - 1] + t * (ys_[k] - ys_[k - 1]);
}

Volume3D IntensityMapping::apply(const Volume3D& source, const Mask3D& mask) const {
    if (!(source.dims() == mask.dims())) throw std::invalid_argument("intensity mapping: mask dims differ");
    std::vector<float> out(source.size(), 0.0f);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (mask[i]) out[i] = static_cast<float>((*this)(source[i]));
    }
    return Volume3D(source.dims(), source.spacing(), std::move(out));
}

std::vector<ScannerProfile> scanner_profiles(int count, std::uint64_t seed, bool identical) {
    if (count < 1) throw std::invalid_argument("scanner count must be >= 1");
    const Philox rng(seed + kScannerSeedOffset, rng_stream::kHarness);
    std::vector<ScannerProfile> out(static_cast<std::size_t>(count));
    for (int s = 1; s < count && !identical; ++s) {
        const std::uint64_t c = static_cast<std::uint64_t>(s) * 4;
        auto& p = out[static_cast<std::size_t>(s)];
        p.gain = 0.7 + 0.6 * rng.uniform(c);
        p.gamma = 0.6 + 0.9 * rng.uniform(c + 1);
        p.field_strength = 0.05 + 0.1 * rng.uniform(c + 2);
        p.seed = rng.block(c + 3)[0];
    }
    return out;
}

ThresholdSegmenter ThresholdSegmenter::from_reference(const Volume3D& reference, Contrast contrast, double mask_threshold) {
    const Mask3D fg = foreground_mask(reference, mask_threshold);
    std::vector<float> v;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        if (fg[i]) v.push_back(reference[i]);
    }
    if (v.size() < 4) throw std::invalid_argument("threshold segmentation needs at least 4 foreground voxels");
    std::array<double, 4> centre{};
    for (int k = 0; k < 4; ++k) centre[static_cast<std::size_t>(k)] = percentile(v, 12.5 + 25.0 * k);
    for (int iter = 0; iter < 100; ++iter) {
        std::array<double, 4> sum{}, cnt{};
        for (float x : v) {
            std::size_t best = 0;
            for (std::size_t k = 1; k < 4; ++k) {
                if (std::fabs(x - centre[k]) < std::fabs(x - centre[best])) best = k;
            }
            sum[best] += x;
            cnt[best] += 1.0;
        }
        bool moved = false;
        for (std::size_t k = 0; k < 4; ++k) {
            if (cnt[k] == 0.0) continue;
            const double c = sum[k] / cnt[k];
            moved = moved || c != centre[k];
            centre[k] = c;
        }
        if (!moved) break;
    }
    std::sort(centre.begin(), centre.end());
    ThresholdSegmenter seg;
    seg.contrast = contrast;
    seg.mask_threshold = mask_threshold;
    for (std::size_t k = 0; k < 3; ++k) seg.thresholds[k] = 0.5 * (centre[k] + centre[k + 1]);
    return seg;
}

LabelMap ThresholdSegmenter::segment(const Volume3D& image) const {
    std::array<Tissue, 4> by_rank = kTissueClasses;
    std::stable_sort(by_rank.begin(), by_rank.end(),
                     [&](Tissue a, Tissue b) { return tissue_intensity(contrast, a) < tissue_intensity(contrast, b); });
    const Mask3D fg = foreground_mask(image, mask_threshold);
    LabelMap out{image.dims(), image.spacing(), std::vector<std::uint8_t>(image.size(), 0)};
    for (std::size_t i = 0; i < image.size(); ++i) {
        if (!fg[i]) continue;
        std::size_t rank = 0;
        while (rank < 3 && image[i] >= thresholds[rank]) ++rank;
        out.data[i] = static_cast<std::uint8_t>(by_rank[rank]);
    }
    return out;
}

std::string stat_rows_to_csv(std::span<const StatRow> rows) {
    std::ostringstream out;
    out << "comparison,N,W,p_raw,p_adjusted,method,reject\n";
    for (const auto& r : rows) {
        out << r.comparison << ',' << r.n << ',' << format_double(r.w) << ',' << format_double(r.p_raw) << ','
            << format_double(r.p_adjusted) << ',' << r.method << ',' << (r.reject ? "true" : "false") << '\n';
    }
    return out.str();
}

ExperimentReport run_fov_imputation(const ExperimentConfig& config) {
    validate(config);
    ExperimentReport report;
    report.summary = base_summary(config);
    report.summary["runs"] = json::array();
    std::vector<PendingTest> tests;

    struct Cell {
        std::vector<double> psnr[2], ssim[2];  // [enhanced, legacy]
    };
    std::map<std::pair<std::size_t, std::size_t>, Cell> cells;  // (contrast idx, fraction idx)

    for (int p = 0; p < config.phantom_count; ++p) {
        const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(p);
        const auto ph = make_phantom(config, seed, config.contrasts);
        for (std::size_t ci = 0; ci < config.cropped_contrasts.size(); ++ci) {
            const Contrast target = config.cropped_contrasts[ci];
            const Volume3D& truth = ph.image(target);
            for (std::size_t fi = 0; fi < config.crop_fractions.size(); ++fi) {
                const double f = config.crop_fractions[fi];
                const auto crop = crop_fov(truth, ph.mask, FovCropSpec{config.crop_kind, f, config.crop_side});

                // Source 0 is the limited-FOV acquisition; the other contrasts
                // are synthesized into its contrast over their overlap.
                std::vector<Volume3D> sources{crop.image};
                std::vector<Mask3D> masks{crop.mask};
                for (std::size_t k = 0; k < ph.contrasts.size(); ++k) {
                    if (ph.contrasts[k] == target) continue;
                    const Mask3D overlap = mask_intersection(ph.mask, crop.mask);
                    const auto map = IntensityMapping::fit(ph.images[k].data(), crop.image.data(), overlap.data(), kMappingBins);
                    sources.push_back(map.apply(ph.images[k], ph.mask));
                    masks.push_back(ph.mask);
                }
                const LogitProvider logits = [&](int z, std::span<const Image2D> slices) {
                    return mse_logits(slices, extract_slice(crop.image, Orientation::Axial, z).image);
                };

                const std::string region = std::string(to_string(config.crop_kind)) +
                                           (config.crop_side == Side::None ? "" : "-" + std::string(to_string(config.crop_side))) +
                                           "_" + fraction_label(f);
                auto& cell = cells[{ci, fi}];
                for (int m = 0; m < 2; ++m) {
                    const FusionMode mode = m == 0 ? FusionMode::Enhanced : FusionMode::Legacy;
                    const Volume3D fused = fuse_volume(sources, masks, logits, Orientation::Axial, mode).image;
                    const double ps = psnr(fused, truth, &crop.cropped_region);
                    SsimOptions so;
                    so.region = &crop.cropped_region;
                    const double ss = ssim(fused, truth, so);
                    cell.psnr[m].push_back(ps);
                    cell.ssim[m].push_back(ss);
                    const std::string dataset = "synthetic/" + std::string(to_string(mode));
                    report.rows.push_back({dataset, subject_name(seed), std::string(to_string(target)), region, "psnr", ps});
                    report.rows.push_back({dataset, subject_name(seed), std::string(to_string(target)), region, "ssim", ss});
                }
            }
        }
    }

    // Bonferroni across cropped contrasts within each (metric, fraction) family.
    json tests_json = json::array();
    for (const char* metric : {"psnr", "ssim"}) {
        for (std::size_t fi = 0; fi < config.crop_fractions.size(); ++fi) {
            std::vector<PendingTest> family;
            for (std::size_t ci = 0; ci < config.cropped_contrasts.size(); ++ci) {
                const auto& cell = cells.at({ci, fi});
                const bool is_psnr = std::string(metric) == "psnr";
                family.push_back({std::string(metric) + ":" + std::string(to_string(config.cropped_contrasts[ci])) + ":" +
                                      fraction_label(config.crop_fractions[fi]) + ":enhanced_vs_legacy",
                                  is_psnr ? cell.psnr[0] : cell.ssim[0], is_psnr ? cell.psnr[1] : cell.ssim[1]});
            }
            auto rows = run_tests(std::move(family), config.alpha, Correction::Bonferroni, tests_json);
            report.stats.insert(report.stats.end(), rows.begin(), rows.end());
        }
    }

    for (std::size_t fi = 0; fi < config.crop_fractions.size(); ++fi) {
        for (std::size_t ci = 0; ci < config.cropped_contrasts.size(); ++ci) {
            const auto& cell = cells.at({ci, fi});
            int wins = 0;
            for (std::size_t i = 0; i < cell.psnr[0].size(); ++i) wins += cell.psnr[0][i] > cell.psnr[1][i];
            const json& tp = tests_json[fi * config.cropped_contrasts.size() + ci];
            const json& ts = tests_json[(config.crop_fractions.size() + fi) * config.cropped_contrasts.size() + ci];
            report.summary["runs"].push_back(
                {{"cropped_contrast", std::string(to_string(config.cropped_contrasts[ci]))},
                 {"crop_kind", std::string(to_string(config.crop_kind))},
                 {"crop_fraction", config.crop_fractions[fi]},
                 {"phantoms", cell.psnr[0].size()},
                 {"mean_psnr", {{"enhanced", mean_of(cell.psnr[0])}, {"legacy", mean_of(cell.psnr[1])}}},
                 {"mean_ssim", {{"enhanced", mean_of(cell.ssim[0])}, {"legacy", mean_of(cell.ssim[1])}}},
                 {"enhanced_psnr_wins", wins},
                 {"psnr_test", tp},
                 {"ssim_test", ts}});
        }
    }

    for (std::size_t ci = 0; ci < config.cropped_contrasts.size(); ++ci) {
        for (int m = 0; m < 2; ++m) {
            for (const char* metric : {"psnr", "ssim"}) {
                PlotSeries s;
                s.name = std::string("fov_") + metric + "_" + std::string(to_string(config.cropped_contrasts[ci])) + "_" +
                         (m == 0 ? "enhanced" : "legacy");
                for (std::size_t fi = 0; fi < config.crop_fractions.size(); ++fi) {
                    const auto& cell = cells.at({ci, fi});
                    s.points.emplace_back(config.crop_fractions[fi],
                                          mean_of(std::string(metric) == "psnr" ? cell.psnr[m] : cell.ssim[m]));
                }
                report.plots.push_back(std::move(s));
            }
        }
    }
    report.summary["tests"] = tests_json;
    return report;
}

ExperimentReport run_traveling_subject(const ExperimentConfig& config) {
    validate(config);
    ExperimentReport report;
    report.summary = base_summary(config);
    const auto profiles = scanner_profiles(config.scanner_count, config.seed, config.identical_scanners);
    const Harmonizer h = fit_harmonizer(config, profiles);
    const std::size_t target_idx = static_cast<std::size_t>(
        std::find(config.contrasts.begin(), config.contrasts.end(), config.target_contrast) - config.contrasts.begin());

    std::vector<double> vals[2][2];  // [metric][raw, harmonized]
    for (int p = 0; p < config.phantom_count; ++p) {
        const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(p);
        const auto ph = make_phantom(config, seed, config.contrasts);
        const Volume3D target = scanner_transform(ph.image(config.target_contrast), profiles.front());
        for (std::size_t s = 1; s < profiles.size(); ++s) {
            std::vector<Volume3D> acquired;
            for (Contrast c : config.contrasts) acquired.push_back(scanner_transform(ph.image(c), profiles[s]));
            const Volume3D harmonized = harmonize(config, h, s, acquired, ph.mask);
            const Volume3D* conditions[2] = {&acquired[target_idx], &harmonized};
            for (int cond = 0; cond < 2; ++cond) {
                const double ps = psnr(*conditions[cond], target, &ph.mask);
                SsimOptions so;
                so.region = &ph.mask;
                const double ss = ssim(*conditions[cond], target, so);
                vals[0][cond].push_back(ps);
                vals[1][cond].push_back(ss);
                const std::string dataset = cond == 0 ? "synthetic/raw" : "synthetic/harmonized";
                const std::string region = "scanner_" + std::to_string(s);
                report.rows.push_back({dataset, subject_name(seed), std::string(to_string(config.target_contrast)), region, "psnr", ps});
                report.rows.push_back({dataset, subject_name(seed), std::string(to_string(config.target_contrast)), region, "ssim", ss});
            }
        }
    }

    json tests_json = json::array();
    report.stats = run_tests({{"psnr:harmonized_vs_raw", vals[0][1], vals[0][0]}, {"ssim:harmonized_vs_raw", vals[1][1], vals[1][0]}},
                             config.alpha, Correction::BenjaminiHochberg, tests_json);
    report.summary["target_contrast"] = std::string(to_string(config.target_contrast));
    report.summary["scanners"] = config.scanner_count;
    report.summary["mean_psnr"] = {{"raw", mean_of(vals[0][0])}, {"harmonized", mean_of(vals[0][1])}};
    report.summary["mean_ssim"] = {{"raw", mean_of(vals[1][0])}, {"harmonized", mean_of(vals[1][1])}};
    report.summary["tests"] = tests_json;

    for (int metric = 0; metric < 2; ++metric) {
        for (int cond = 0; cond < 2; ++cond) {
            PlotSeries s;
            s.name = std::string("traveling_") + (metric == 0 ? "psnr" : "ssim") + "_" + (cond == 0 ? "raw" : "harmonized");
            const auto& v = vals[metric][cond];
            const std::size_t per = profiles.size() - 1;
            for (std::size_t i = 0; i < v.size(); ++i) s.points.emplace_back(static_cast<double>(i % per + 1), v[i]);
            report.plots.push_back(std::move(s));
        }
    }
    return report;
}

ExperimentReport run_cv_table(const ExperimentConfig& config) {
    validate(config);
    ExperimentReport report;
    report.summary = base_summary(config);
    const auto profiles = scanner_profiles(config.scanner_count, config.seed, config.identical_scanners);
    const Harmonizer h = fit_harmonizer(config, profiles);
    const std::size_t target_idx = static_cast<std::size_t>(
        std::find(config.contrasts.begin(), config.contrasts.end(), config.target_contrast) - config.contrasts.begin());

    const auto ph = make_phantom(config, config.seed, config.contrasts);
    const std::string subject = subject_name(config.seed);
    std::vector<LabelMap> seg[2];  // [raw, fused], one per scanner
    std::optional<ThresholdSegmenter> segmenter;
    for (std::size_t s = 0; s < profiles.size(); ++s) {
        std::vector<Volume3D> acquired;
        for (Contrast c : config.contrasts) acquired.push_back(scanner_transform(ph.image(c), profiles[s]));
        if (s == 0) {
            segmenter = ThresholdSegmenter::from_reference(acquired[target_idx], config.target_contrast, config.mask_threshold);
        }
        seg[0].push_back(segmenter->segment(acquired[target_idx]));
        seg[1].push_back(segmenter->segment(harmonize(config, h, s, acquired, ph.mask)));
    }

    std::ostringstream table;
    table << "region,condition,metric,mean,cv\n";
    json regions = json::array();
    int fused_lower = 0;
    for (Tissue t : kTissueClasses) {
        const auto id = static_cast<std::uint8_t>(t);
        json rj{{"region", std::string(to_string(t))}};
        double vol_cv[2]{};
        for (int cond = 0; cond < 2; ++cond) {
            const std::string dataset = cond == 0 ? "synthetic/raw" : "synthetic/fused";
            const char* cname = cond == 0 ? "raw" : "fused";
            std::vector<double> vols, dscs;
            for (std::size_t s = 0; s < profiles.size(); ++s) {
                const double v = region_volume(seg[cond][s], id, ph.labels.spacing);
                vols.push_back(v);
                report.rows.push_back({dataset, subject, "scanner_" + std::to_string(s), std::string(to_string(t)), "volume", v});
                if (s == 0) continue;
                const double d = dice(seg[cond][s], seg[0][0], id);
                dscs.push_back(d);
                report.rows.push_back({dataset, subject, "scanner_" + std::to_string(s), std::string(to_string(t)), "dsc", d});
            }
            vol_cv[cond] = cv_or_nan(vols);
            const double dsc_cv = cv_or_nan(dscs);
            table << to_string(t) << ',' << cname << ",volume," << format_double(mean_of(vols)) << ','
                  << format_double(vol_cv[cond]) << '\n';
            table << to_string(t) << ',' << cname << ",dsc," << format_double(mean_of(dscs)) << ','
                  << format_double(dsc_cv) << '\n';
            rj[cname] = {{"volume_mean", number_or_null(mean_of(vols))},
                         {"volume_cv", number_or_null(vol_cv[cond])},
                         {"dsc_mean", number_or_null(mean_of(dscs))},
                         {"dsc_cv", number_or_null(dsc_cv)}};
        }
        fused_lower += vol_cv[1] < vol_cv[0];
        regions.push_back(rj);
    }
    report.files.emplace_back("cv_table.csv", table.str());
    report.summary["scanners"] = config.scanner_count;
    report.summary["target_contrast"] = std::string(to_string(config.target_contrast));
    report.summary["thresholds"] = segmenter->thresholds;
    report.summary["regions"] = regions;
    report.summary["regions_with_lower_fused_volume_cv"] = fused_lower;

    for (int cond = 0; cond < 2; ++cond) {
        PlotSeries s;
        s.name = std::string("cv_volume_") + (cond == 0 ? "raw" : "fused");
        for (std::size_t r = 0; r < kTissueClasses.size(); ++r) {
            const json& v = regions[r][cond == 0 ? "raw" : "fused"]["volume_cv"];
            s.points.emplace_back(static_cast<double>(kTissueClasses[r]),
                                  v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
        }
        report.plots.push_back(std::move(s));
    }
    return report;
}

ExperimentReport run_severity_train(const ExperimentConfig& config) {
    validate(config);
    const auto& sc = config.scorer;
    ExperimentReport report;
    report.summary = base_summary(config);
    const Philox rng(config.seed, rng_stream::kHarness);
    std::uint64_t counter = 0;
    const int z_lo = config.phantom_size * 3 / 8;
    const int z_span = config.phantom_size / 4;
    const auto draw_severity = [&] { return 0.05 + 0.95 * rng.uniform(counter++); };
    const auto draw_slice = [&] { return z_lo + static_cast<int>(z_span * rng.uniform(counter++)); };

    std::vector<TripletFeatures> triplets;
    for (int p = 0; p < sc.train_phantoms; ++p) {
        const std::uint64_t seed = config.seed + kTrainSeedOffset + static_cast<std::uint64_t>(p);
        const auto ph = make_phantom(config, seed, {Contrast::T1w});
        for (std::size_t t = 0; t < std::size(kArtifactKinds); ++t) {
            const double s = draw_severity();
            const int z = draw_slice();
            const auto trip = make_triplet(ph.images[0], kArtifactKinds[t], s, seed * 4 + t);
            const auto m = extract_mask_slice(ph.mask, Orientation::Axial, z);
            TripletFeatures f;
            f.anchor = extract_features(extract_slice(trip.anchor, Orientation::Axial, z).image, m);
            f.positive = extract_features(extract_slice(trip.positive, Orientation::Axial, z).image, m);
            f.negative = extract_features(extract_slice(trip.negative, Orientation::Axial, z).image, m);
            f.anchor_severity = trip.anchor_severity;
            f.positive_severity = trip.positive_severity;
            f.negative_severity = trip.negative_severity;
            triplets.push_back(f);
        }
    }

    TrainOptions opts;
    opts.epochs = sc.epochs;
    opts.learning_rate = sc.learning_rate;
    opts.form = sc.triplet_form;
    opts.l2 = sc.l2;
    const TrainResult trained = train_scorer(triplets, opts);

    std::vector<double> truth, predicted;
    std::vector<std::size_t> kinds;
    for (int i = 0; i < sc.test_slices; ++i) {
        const std::uint64_t seed = config.seed + kTestSeedOffset + static_cast<std::uint64_t>(i);
        const auto ph = make_phantom(config, seed, {Contrast::T1w});
        const std::size_t k = static_cast<std::size_t>(i) % std::size(kArtifactKinds);
        const double s = draw_severity();
        const int z = draw_slice();
        const auto degraded = apply_artifact(ph.images[0], ArtifactSpec{kArtifactKinds[k], s, seed, 1}).first;
        const auto fv = extract_features(extract_slice(degraded, Orientation::Axial, z).image,
                                         extract_mask_slice(ph.mask, Orientation::Axial, z));
        const double pred = score(trained.params, fv);
        truth.push_back(s);
        predicted.push_back(pred);
        kinds.push_back(k);
        const std::string region = std::string(to_string(kArtifactKinds[k])) + "_axial_" + std::to_string(z);
        report.rows.push_back({"synthetic/scorer", subject_name(seed), "T1w", region, "severity_true", s});
        report.rows.push_back({"synthetic/scorer", subject_name(seed), "T1w", region, "severity_predicted", pred});
    }

    json per_kind = json::object();
    for (std::size_t k = 0; k < std::size(kArtifactKinds); ++k) {
        std::vector<double> a, b;
        for (std::size_t i = 0; i < kinds.size(); ++i) {
            if (kinds[i] == k) {
                a.push_back(truth[i]);
                b.push_back(predicted[i]);
            }
        }
        per_kind[std::string(to_string(kArtifactKinds[k]))] = a.size() >= 2 ? json(spearman(a, b)) : json(nullptr);
    }
    const json params{{"w", trained.params.w}, {"b", trained.params.b}, {"triplet_form", std::string(to_string(sc.triplet_form))}};
    report.summary["spearman_rho"] = spearman(truth, predicted);
    report.summary["spearman_rho_per_kind"] = per_kind;
    report.summary["train_triplets"] = triplets.size();
    report.summary["initial_loss"] = trained.initial_loss;
    report.summary["best_loss"] = trained.best_loss;
    report.summary["params"] = params;

    std::ostringstream log;
    log << "epoch,loss\n";
    PlotSeries loss{"severity_training_loss", {}};
    for (std::size_t e = 0; e < trained.loss_trace.size(); ++e) {
        log << e << ',' << format_double(trained.loss_trace[e]) << '\n';
        loss.points.emplace_back(static_cast<double>(e), trained.loss_trace[e]);
    }
    PlotSeries scatter{"severity_true_vs_predicted", {}};
    for (std::size_t i = 0; i < truth.size(); ++i) scatter.points.emplace_back(truth[i], predicted[i]);
    report.plots.push_back(std::move(loss));
    report.plots.push_back(std::move(scatter));
    report.files.emplace_back("training_log.csv", log.str());
    report.files.emplace_back("scorer_params.json", params.dump(2) + "\n");
    return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    switch (config.kind) {
        case ExperimentKind::FovImputation: return run_fov_imputation(config);
        case ExperimentKind::TravelingSubject: return run_traveling_subject(config);
        case ExperimentKind::CvTable: return run_cv_table(config);
        case ExperimentKind::SeverityTrain: return run_severity_train(config);
    }
    throw std::invalid_argument("unknown experiment kind");
}

void write_report(const ExperimentReport& report, const ExperimentConfig& config, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir / "plotdata", ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    const auto write = [](const fs::path& path, const std::string& content) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write " + path.string());
        out << content;
        if (!out) throw IoError("write failed: " + path.string());
    };
    write(dir / "results.csv", metric_rows_to_csv(report.rows));
    write(dir / "stats.csv", stat_rows_to_csv(report.stats));
    write(dir / "summary.json", report.summary.dump(2) + "\n");
    write(dir / "config.resolved.json", to_json(config).dump(2) + "\n");
    for (const auto& s : report.plots) {
        std::ostringstream out;
        out << "x,y\n";
        for (const auto& [x, y] : s.points) out << format_double(x) << ',' << format_double(y) << '\n';
        write(dir / "plotdata" / (s.name + ".csv"), out.str());
    }
    for (const auto& [name, content] : report.files) write(dir / name, content);
}

}  // namespace harmokit
