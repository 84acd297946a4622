#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "harmokit/artifact.hpp"
#include "harmokit/attention.hpp"
#include "harmokit/error.hpp"
#include "harmokit/fov.hpp"
#include "harmokit/harness.hpp"
#include "harmokit/metrics.hpp"
#include "harmokit/nifti.hpp"
#include "harmokit/phantom.hpp"
#include "harmokit/scorer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace harmokit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

void log_resolved(const std::string& command, const json& resolved) {
    std::cerr << "harmokit " << command << ": resolved config " << resolved.dump() << '\n';
}

void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw IoError("input file not found: " + p.string());
}

Volume3D load_volume(const fs::path& p) {
    require_file(p);
    return nifti::load(p);
}

Mask3D load_mask(const fs::path& p) {
    const Volume3D v = load_volume(p);
    std::vector<std::uint8_t> data(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) data[i] = v[i] > 0.5f;
    return Mask3D(v.dims(), std::move(data));
}

void save_mask(const Mask3D& m, const Spacing& spacing, const fs::path& p) {
    nifti::save_labels(LabelMap{m.dims(), spacing, std::vector<std::uint8_t>(m.data().begin(), m.data().end())}, p);
}

json read_json(const fs::path& p) {
    require_file(p);
    std::ifstream in(p);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(p.string() + " is not valid JSON: " + e.what());
    }
}

std::vector<Contrast> contrasts_from(const std::vector<std::string>& names) {
    std::vector<Contrast> out;
    for (const auto& n : names) out.push_back(parse_contrast(n));
    return out;
}

struct PhantomArgs {
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    int size = 64;
    double jitter = 0.05;
    std::vector<std::string> contrasts{"T1w", "T2w", "FLAIR"};
};

int run_phantom(const PhantomArgs& a) {
    PhantomSpec spec;
    spec.dims = {a.size, a.size, a.size};
    spec.seed = a.seed;
    spec.subject_jitter = a.jitter;
    spec.contrasts = contrasts_from(a.contrasts);
    log_resolved("phantom", {{"out_dir", a.out_dir}, {"seed", a.seed}, {"size", a.size}, {"jitter", a.jitter}, {"contrasts", a.contrasts}});
    const auto ph = generate_phantom(spec);
    fs::create_directories(a.out_dir);
    for (std::size_t k = 0; k < ph.contrasts.size(); ++k) {
        nifti::save(ph.images[k], fs::path(a.out_dir) / (std::string(to_string(ph.contrasts[k])) + ".nii"));
    }
    nifti::save_labels(ph.labels, fs::path(a.out_dir) / "labels.nii");
    save_mask(ph.mask, ph.labels.spacing, fs::path(a.out_dir) / "mask.nii");
    return kExitOk;
}

struct ArtifactArgs {
    std::string input, output, kind = "noise";
    double severity = 0.5;
    std::uint64_t seed = 0;
    int axis = 1;
};

int run_artifact(const ArtifactArgs& a) {
    log_resolved("artifact", {{"input", a.input}, {"output", a.output}, {"kind", a.kind}, {"severity", a.severity},
                              {"seed", a.seed}, {"axis", a.axis}});
    const ArtifactSpec spec{parse_artifact_kind(a.kind), a.severity, a.seed, a.axis};
    const Volume3D in = load_volume(a.input);
    const auto [out, sc] = apply_artifact(in, spec);
    nifti::save(out, a.output);
    std::cout << json{{"severity", sc.value}}.dump() << '\n';
    return kExitOk;
}

struct CropArgs {
    std::string input, output, mask, mask_output, region_output;
    std::string kind = "anterior", side = "none";
    double fraction = 0.25;
    double mask_threshold = 0.1;
};

int run_crop(const CropArgs& a) {
    log_resolved("crop", {{"input", a.input}, {"output", a.output}, {"mask", a.mask}, {"kind", a.kind}, {"side", a.side},
                          {"fraction", a.fraction}, {"mask_threshold", a.mask_threshold}});
    const FovCropSpec spec{parse_fov_kind(a.kind), a.fraction, parse_side(a.side)};
    validate(spec);
    const Volume3D in = load_volume(a.input);
    const Mask3D m = a.mask.empty() ? foreground_mask(in, a.mask_threshold) : load_mask(a.mask);
    const auto r = crop_fov(in, m, spec);
    nifti::save(r.image, a.output);
    if (!a.mask_output.empty()) save_mask(r.mask, in.spacing(), a.mask_output);
    if (!a.region_output.empty()) save_mask(r.cropped_region, in.spacing(), a.region_output);
    return kExitOk;
}

struct FuseArgs {
    std::vector<std::string> inputs, masks;
    std::string target, output, mode = "enhanced", orientation = "axial";
    double mask_threshold = 0.1;
};

int run_fuse(const FuseArgs& a) {
    log_resolved("fuse", {{"inputs", a.inputs}, {"masks", a.masks}, {"target", a.target}, {"output", a.output},
                          {"mode", a.mode}, {"orientation", a.orientation}, {"mask_threshold", a.mask_threshold}});
    if (!a.masks.empty() && a.masks.size() != a.inputs.size()) {
        throw std::invalid_argument("--masks needs one mask per input");
    }
    std::vector<Volume3D> sources;
    std::vector<Mask3D> masks;
    for (std::size_t k = 0; k < a.inputs.size(); ++k) {
        sources.push_back(load_volume(a.inputs[k]));
        masks.push_back(a.masks.empty() ? foreground_mask(sources.back(), a.mask_threshold) : load_mask(a.masks[k]));
    }
    const Orientation o = parse_orientation(a.orientation);
    const FusionMode mode = parse_fusion_mode(a.mode);
    FusedVolume fused;
    if (a.target.empty()) {
        const std::vector<double> uniform(sources.size(), 0.0);
        fused = fuse_volume(sources, masks, uniform, o, mode);
    } else {
        const Volume3D target = load_volume(a.target);
        const LogitProvider logits = [&](int idx, std::span<const Image2D> slices) {
            return mse_logits(slices, extract_slice(target, o, idx).image);
        };
        fused = fuse_volume(sources, masks, logits, o, mode);
    }
    nifti::save(fused.image, a.output);
    return kExitOk;
}

struct ScoreArgs {
    std::string input, mask, params, orientation = "axial";
    int slice = -1;
    double mask_threshold = 0.1;
};

int run_score(const ScoreArgs& a) {
    log_resolved("score", {{"input", a.input}, {"mask", a.mask}, {"params", a.params}, {"orientation", a.orientation},
                           {"slice", a.slice}, {"mask_threshold", a.mask_threshold}});
    const Volume3D vol = load_volume(a.input);
    const Mask3D m = a.mask.empty() ? foreground_mask(vol, a.mask_threshold) : load_mask(a.mask);
    const Orientation o = parse_orientation(a.orientation);
    const int len = vol.dims()[slice_axis(o)];
    const int idx = a.slice < 0 ? len / 2 : a.slice;
    if (idx >= len) throw std::invalid_argument("--slice " + std::to_string(idx) + " is out of range");
    const auto fv = extract_features(extract_slice(vol, o, idx).image, extract_mask_slice(m, o, idx));
    json out{{"slice", idx}, {"features", fv}};
    if (!a.params.empty()) {
        const json pj = read_json(a.params);
        ScorerParams p;
        p.w = pj.at("w").get<std::array<double, 4>>();
        p.b = pj.at("b").get<double>();
        out["score"] = score(p, fv);
    }
    std::cout << out.dump() << '\n';
    return kExitOk;
}

struct MetricsArgs {
    std::string test, reference, region, labels_test, labels_reference;
};

int run_metrics(const MetricsArgs& a) {
    log_resolved("metrics", {{"test", a.test}, {"reference", a.reference}, {"region", a.region},
                             {"labels_test", a.labels_test}, {"labels_reference", a.labels_reference}});
    const Volume3D t = load_volume(a.test);
    const Volume3D r = load_volume(a.reference);
    std::optional<Mask3D> region;
    if (!a.region.empty()) region = load_mask(a.region);
    SsimOptions so;
    so.region = region ? &*region : nullptr;
    json out{{"psnr", psnr(t, r, so.region)}, {"ssim", ssim(t, r, so)}};
    if (!a.labels_test.empty() || !a.labels_reference.empty()) {
        if (a.labels_test.empty() || a.labels_reference.empty()) {
            throw std::invalid_argument("--labels-test and --labels-reference go together");
        }
        const LabelMap lt = labels_from_volume(load_volume(a.labels_test));
        const LabelMap lr = labels_from_volume(load_volume(a.labels_reference));
        json d = json::object();
        for (Tissue c : kTissueClasses) d[std::string(to_string(c))] = dice(lt, lr, static_cast<std::uint8_t>(c));
        out["dsc"] = d;
    }
    std::cout << out.dump() << '\n';
    return kExitOk;
}

struct ExperimentArgs {
    std::string config, kind, output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> phantoms;
};

int run_experiment_cmd(const ExperimentArgs& a) {
    json j = a.config.empty() ? json::object() : read_json(a.config);
    if (!a.kind.empty()) j["kind"] = a.kind;
    if (a.seed) j["seed"] = *a.seed;
    if (a.phantoms) j["phantom_count"] = *a.phantoms;
    if (!a.output_dir.empty()) j["output_dir"] = a.output_dir;
    const ExperimentConfig config = config_from_json(j);
    log_resolved("experiment", to_json(config));
    const ExperimentReport report = run_experiment(config);
    write_report(report, config, config.output_dir);
    std::cerr << "harmokit experiment: wrote " << config.output_dir.string() << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"harmokit: synthetic-phantom MR harmonization toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "harmokit 0.1.0");

    PhantomArgs pa;
    auto* phantom = app.add_subcommand("phantom", "Generate a multi-contrast digital phantom");
    phantom->add_option("--out-dir", pa.out_dir, "Output directory")->capture_default_str();
    phantom->add_option("--seed", pa.seed, "Phantom seed")->capture_default_str();
    phantom->add_option("--size", pa.size, "Voxels per axis")->capture_default_str();
    phantom->add_option("--jitter", pa.jitter, "Subject jitter in [0, 0.1]")->capture_default_str();
    phantom->add_option("--contrasts", pa.contrasts, "Contrasts to render")->capture_default_str();

    ArtifactArgs aa;
    auto* artifact = app.add_subcommand("artifact", "Apply a simulated MR artifact");
    artifact->add_option("--input", aa.input, "Input NIfTI")->required();
    artifact->add_option("--output", aa.output, "Output NIfTI")->required();
    artifact->add_option("--kind", aa.kind, "noise | ghosting | bias_field | anisotropy")->capture_default_str();
    artifact->add_option("--severity", aa.severity, "Severity in [0, 1]")->capture_default_str();
    artifact->add_option("--seed", aa.seed, "Artifact seed")->capture_default_str();
    artifact->add_option("--axis", aa.axis, "Axis for ghosting/anisotropy (0, 1, 2)")->capture_default_str();

    CropArgs ca;
    auto* crop = app.add_subcommand("crop", "Simulate a limited field of view");
    crop->add_option("--input", ca.input, "Input NIfTI")->required();
    crop->add_option("--output", ca.output, "Cropped NIfTI")->required();
    crop->add_option("--mask", ca.mask, "Foreground mask NIfTI (default: thresholded input)");
    crop->add_option("--mask-output", ca.mask_output, "Write the cropped mask here");
    crop->add_option("--region-output", ca.region_output, "Write the cropped-region mask here");
    crop->add_option("--kind", ca.kind, "anterior | lateral")->capture_default_str();
    crop->add_option("--side", ca.side, "none | left | right")->capture_default_str();
    crop->add_option("--fraction", ca.fraction, "Cropped fraction in [0, 0.5]")->capture_default_str();
    crop->add_option("--mask-threshold", ca.mask_threshold, "Foreground threshold fraction")->capture_default_str();

    FuseArgs fa;
    auto* fuse = app.add_subcommand("fuse", "Attention-fuse co-registered sources");
    fuse->add_option("--inputs", fa.inputs, "Source NIfTIs, source 0 first")->required();
    fuse->add_option("--masks", fa.masks, "One mask per source (default: thresholded sources)");
    fuse->add_option("--target", fa.target, "Target NIfTI for MSE logits (default: uniform logits)");
    fuse->add_option("--output", fa.output, "Fused NIfTI")->required();
    fuse->add_option("--mode", fa.mode, "enhanced | legacy")->capture_default_str();
    fuse->add_option("--orientation", fa.orientation, "axial | coronal | sagittal")->capture_default_str();
    fuse->add_option("--mask-threshold", fa.mask_threshold, "Foreground threshold fraction")->capture_default_str();

    ScoreArgs sa;
    auto* score_cmd = app.add_subcommand("score", "Artifact features and severity score of one slice");
    score_cmd->add_option("--input", sa.input, "Input NIfTI")->required();
    score_cmd->add_option("--mask", sa.mask, "Foreground mask NIfTI (default: thresholded input)");
    score_cmd->add_option("--params", sa.params, "Scorer parameters JSON {\"w\": [4], \"b\": x}");
    score_cmd->add_option("--orientation", sa.orientation, "axial | coronal | sagittal")->capture_default_str();
    score_cmd->add_option("--slice", sa.slice, "Slice index (default: middle)");
    score_cmd->add_option("--mask-threshold", sa.mask_threshold, "Foreground threshold fraction")->capture_default_str();

    MetricsArgs ma;
    auto* metrics = app.add_subcommand("metrics", "PSNR/SSIM (and optional DSC) against a reference");
    metrics->add_option("--test", ma.test, "Test NIfTI")->required();
    metrics->add_option("--reference", ma.reference, "Reference NIfTI")->required();
    metrics->add_option("--region", ma.region, "Evaluation region mask NIfTI");
    metrics->add_option("--labels-test", ma.labels_test, "Label map of the test image");
    metrics->add_option("--labels-reference", ma.labels_reference, "Reference label map");

    ExperimentArgs ea;
    auto* experiment = app.add_subcommand("experiment", "Run a phantom experiment and write reports");
    experiment->add_option("--config", ea.config, "JSON experiment config");
    experiment->add_option("--kind", ea.kind, "fov-imputation | traveling-subject | cv-table | severity-train");
    experiment->add_option("--seed", ea.seed, "Override the config seed");
    experiment->add_option("--phantoms", ea.phantoms, "Override phantom_count");
    experiment->add_option("--output-dir", ea.output_dir, "Override output_dir");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*phantom) return run_phantom(pa);
        if (*artifact) return run_artifact(aa);
        if (*crop) return run_crop(ca);
        if (*fuse) return run_fuse(fa);
        if (*score_cmd) return run_score(sa);
        if (*metrics) return run_metrics(ma);
        if (*experiment) return run_experiment_cmd(ea);
    } catch (const std::exception& e) {
        std::cerr << "harmokit: error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
