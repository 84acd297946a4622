// Python bindings. Volumes are numpy arrays indexed [x, y, z] (Fortran
// order, same voxel order as NIfTI); 2D slices are indexed [i, j].

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "harmokit/artifact.hpp"
#include "harmokit/attention.hpp"
#include "harmokit/error.hpp"
#include "harmokit/fov.hpp"
#include "harmokit/harness.hpp"
#include "harmokit/metrics.hpp"
#include "harmokit/nifti.hpp"
#include "harmokit/phantom.hpp"
#include "harmokit/scorer.hpp"
#include "harmokit/stats.hpp"

namespace py = pybind11;
using namespace harmokit;

namespace {

using FloatArray = py::array_t<float, py::array::f_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::f_style | py::array::forcecast>;

template <typename T>
py::array_t<T, py::array::f_style> to_numpy(std::span<const T> data, std::vector<py::ssize_t> shape) {
    py::array_t<T, py::array::f_style> out(shape);
    std::memcpy(out.mutable_data(), data.data(), data.size() * sizeof(T));
    return out;
}

Dims dims_of(const py::array& a) {
    if (a.ndim() != 3) throw std::invalid_argument("expected a 3D array");
    return {static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))};
}

Volume3D to_volume(const FloatArray& a, const Spacing& spacing = {1.0, 1.0, 1.0}) {
    const Dims d = dims_of(a);
    return Volume3D(d, spacing, std::vector<float>(a.data(), a.data() + a.size()));
}

Mask3D to_mask(const ByteArray& a) {
    const Dims d = dims_of(a);
    return Mask3D(d, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

LabelMap to_labels(const ByteArray& a, const Spacing& spacing = {1.0, 1.0, 1.0}) {
    return LabelMap{dims_of(a), spacing, std::vector<std::uint8_t>(a.data(), a.data() + a.size())};
}

py::array volume_array(const Volume3D& v) {
    const Dims& d = v.dims();
    return to_numpy<float>(v.data(), {d.nx, d.ny, d.nz});
}

py::array mask_array(const Mask3D& m) {
    const Dims& d = m.dims();
    return to_numpy<std::uint8_t>(m.data(), {d.nx, d.ny, d.nz});
}

Image2D to_image(const FloatArray& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2D array");
    Image2D img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::memcpy(img.data.data(), a.data(), img.size() * sizeof(float));
    return img;
}

Mask2D to_mask2d(const ByteArray& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2D array");
    Mask2D m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::memcpy(m.data.data(), a.data(), m.size());
    return m;
}

SourceStack to_stack(const std::vector<FloatArray>& slices, const std::vector<ByteArray>& masks,
                     const std::vector<double>& logits) {
    SourceStack s;
    for (const auto& a : slices) s.slices.push_back(to_image(a));
    for (const auto& m : masks) s.masks.push_back(to_mask2d(m));
    s.logits = logits;
    return s;
}

py::array attention_array(const AttentionMap& a) {
    return to_numpy<double>(a.weights, {a.width, a.height, static_cast<py::ssize_t>(a.sources)});
}

py::dict wilcoxon_dict(const StatTestResult& r) {
    py::dict d;
    d["statistic"] = r.statistic;
    d["w_plus"] = r.w_plus;
    d["w_minus"] = r.w_minus;
    d["p_value"] = r.p_value;
    d["n"] = r.n_effective;
    d["method"] = r.method;
    return d;
}

py::dict multiple_dict(const MultipleTestResult& r) {
    py::dict d;
    d["adjusted"] = r.adjusted;
    d["reject"] = std::vector<bool>(r.reject.begin(), r.reject.end());
    return d;
}

}  // namespace

PYBIND11_MODULE(_harmokit, m) {
    m.doc() = "Multi-contrast MR harmonization toolkit on digital phantoms";

    // Translators are tried newest first, so the subclass goes last.
    py::register_exception<Error>(m, "HarmokitError", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def(
        "generate_phantom",
        [](std::uint64_t seed, int size, double jitter, std::vector<std::string> contrasts) {
            PhantomSpec spec;
            spec.dims = {size, size, size};
            spec.seed = seed;
            spec.subject_jitter = jitter;
            spec.contrasts.clear();
            for (const auto& c : contrasts) spec.contrasts.push_back(parse_contrast(c));
            const auto ph = generate_phantom(spec);
            py::dict images;
            for (std::size_t i = 0; i < ph.contrasts.size(); ++i)
                images[py::str(std::string(to_string(ph.contrasts[i])))] = volume_array(ph.images[i]);
            py::dict out;
            out["images"] = images;
            out["labels"] = to_numpy<std::uint8_t>(ph.labels.data, {size, size, size});
            out["mask"] = mask_array(ph.mask);
            return out;
        },
        py::arg("seed") = 0, py::arg("size") = 64, py::arg("jitter") = 0.05,
        py::arg("contrasts") = std::vector<std::string>{"T1w", "T2w", "FLAIR"},
        "Phantom images by contrast name, tissue labels and the brain mask.");

    m.def(
        "apply_artifact",
        [](const FloatArray& vol, const std::string& kind, double severity, std::uint64_t seed, int axis) {
            const auto [out, s] = apply_artifact(to_volume(vol), {parse_artifact_kind(kind), severity, seed, axis});
            return py::make_tuple(volume_array(out), s.value);
        },
        py::arg("volume"), py::arg("kind"), py::arg("severity"), py::arg("seed") = 0, py::arg("axis") = 1,
        "Degraded volume and its severity score.");

    m.def(
        "foreground_mask",
        [](const FloatArray& vol, double threshold) { return mask_array(foreground_mask(to_volume(vol), threshold)); },
        py::arg("volume"), py::arg("threshold") = 0.1);

    m.def(
        "crop_fov",
        [](const FloatArray& vol, const ByteArray& mask, const std::string& kind, double fraction, const std::string& side) {
            const auto r = crop_fov(to_volume(vol), to_mask(mask), {parse_fov_kind(kind), fraction, parse_side(side)});
            return py::make_tuple(volume_array(r.image), mask_array(r.mask), mask_array(r.cropped_region));
        },
        py::arg("volume"), py::arg("mask"), py::arg("kind") = "anterior", py::arg("fraction") = 0.25,
        py::arg("side") = "none", "(cropped image, cropped mask, cropped-region mask)");

    m.def("softmax", [](const std::vector<double>& logits) { return softmax(logits); }, py::arg("logits"));

    m.def(
        "attention",
        [](const std::vector<FloatArray>& slices, const std::vector<ByteArray>& masks, const std::vector<double>& logits,
           const std::string& mode) {
            const auto s = to_stack(slices, masks, logits);
            return attention_array(parse_fusion_mode(mode) == FusionMode::Enhanced ? enhanced_attention(s)
                                                                                    : legacy_attention(s));
        },
        py::arg("slices"), py::arg("masks"), py::arg("logits"), py::arg("mode") = "enhanced",
        "Per-pixel weights, shape (width, height, K).");

    m.def(
        "fuse_slices",
        [](const std::vector<FloatArray>& slices, const std::vector<ByteArray>& masks, const std::vector<double>& logits,
           const std::string& mode) {
            const auto s = to_stack(slices, masks, logits);
            const auto a = parse_fusion_mode(mode) == FusionMode::Enhanced ? enhanced_attention(s) : legacy_attention(s);
            const auto f = fuse(s, a);
            return to_numpy<float>(f.data, {f.width, f.height});
        },
        py::arg("slices"), py::arg("masks"), py::arg("logits"), py::arg("mode") = "enhanced");

    m.def(
        "fuse_volume",
        [](const std::vector<FloatArray>& sources, const std::vector<ByteArray>& masks, const std::vector<double>& logits,
           const std::string& orientation, const std::string& mode) {
            std::vector<Volume3D> vs;
            std::vector<Mask3D> ms;
            for (const auto& s : sources) vs.push_back(to_volume(s));
            for (const auto& k : masks) ms.push_back(to_mask(k));
            return volume_array(
                fuse_volume(vs, ms, std::span<const double>(logits), parse_orientation(orientation), parse_fusion_mode(mode))
                    .image);
        },
        py::arg("sources"), py::arg("masks"), py::arg("logits"), py::arg("orientation") = "axial",
        py::arg("mode") = "enhanced");

    m.def(
        "extract_features",
        [](const FloatArray& slice, const ByteArray& mask) {
            const auto f = extract_features(to_image(slice), to_mask2d(mask));
            return std::vector<double>(f.begin(), f.end());
        },
        py::arg("slice"), py::arg("mask"), "(noise, ghosting, bias, sharpness) features of one slice.");

    m.def(
        "score",
        [](const std::array<double, 4>& w, double b, const std::array<double, 4>& features) {
            FeatureVector fv{};
            std::copy(features.begin(), features.end(), fv.begin());
            return score({w, b}, fv);
        },
        py::arg("w"), py::arg("b"), py::arg("features"));

    m.def(
        "triplet_loss",
        [](const std::vector<std::array<double, 4>>& batch) {
            std::vector<TripletScores> s;
            for (const auto& t : batch) s.push_back({t[0], t[1], t[2], t[3]});
            return triplet_loss(s);
        },
        py::arg("batch"), "Loss over (anchor, positive, negative, margin) score tuples.");

    m.def("dynamic_margin", &dynamic_margin, py::arg("negative_severity"), py::arg("positive_severity"));

    m.def(
        "psnr",
        [](const FloatArray& test, const FloatArray& ref, std::optional<ByteArray> region) {
            if (region) {
                const Mask3D r = to_mask(*region);
                return psnr(to_volume(test), to_volume(ref), &r);
            }
            return psnr(to_volume(test), to_volume(ref));
        },
        py::arg("test"), py::arg("reference"), py::arg("region") = py::none());
    m.def("psnr_from_mse", &psnr_from_mse, py::arg("mse"), py::arg("peak"));

    m.def(
        "ssim",
        [](const FloatArray& test, const FloatArray& ref, std::optional<double> dynamic_range) {
            SsimOptions o;
            o.dynamic_range = dynamic_range;
            return ssim(to_volume(test), to_volume(ref), o);
        },
        py::arg("test"), py::arg("reference"), py::arg("dynamic_range") = py::none());

    m.def(
        "dice", [](const ByteArray& a, const ByteArray& b, int cls) {
            return dice(to_labels(a), to_labels(b), static_cast<std::uint8_t>(cls));
        },
        py::arg("a"), py::arg("b"), py::arg("class_id"));

    m.def(
        "region_volume",
        [](const ByteArray& labels, int cls, const Spacing& spacing) {
            return region_volume(to_labels(labels), static_cast<std::uint8_t>(cls), spacing);
        },
        py::arg("labels"), py::arg("class_id"), py::arg("spacing") = Spacing{1.0, 1.0, 1.0});

    m.def(
        "coefficient_of_variation", [](const std::vector<double>& v) { return coefficient_of_variation(v); },
        py::arg("values"));

    m.def(
        "wilcoxon_signed_rank",
        [](const std::vector<double>& x, const std::vector<double>& y, const std::string& method) {
            WilcoxonMethod wm = WilcoxonMethod::Auto;
            if (method == "exact") wm = WilcoxonMethod::Exact;
            else if (method == "normal") wm = WilcoxonMethod::Normal;
            else if (method != "auto") throw std::invalid_argument("method must be auto, exact or normal");
            return wilcoxon_dict(wilcoxon_signed_rank(x, y, wm));
        },
        py::arg("x"), py::arg("y"), py::arg("method") = "auto");

    m.def(
        "bonferroni", [](const std::vector<double>& p, double alpha) { return multiple_dict(bonferroni(p, alpha)); },
        py::arg("p_values"), py::arg("alpha") = 0.05);
    m.def(
        "benjamini_hochberg",
        [](const std::vector<double>& p, double q) { return multiple_dict(benjamini_hochberg(p, q)); },
        py::arg("p_values"), py::arg("q") = 0.05);
    m.def(
        "spearman", [](const std::vector<double>& a, const std::vector<double>& b) { return spearman(a, b); },
        py::arg("a"), py::arg("b"));

    m.def(
        "load_nifti",
        [](const std::string& path) {
            const auto v = nifti::load(path);
            return py::make_tuple(volume_array(v), v.spacing());
        },
        py::arg("path"), "(array, spacing)");
    m.def(
        "save_nifti",
        [](const FloatArray& vol, const std::string& path, const Spacing& spacing) {
            nifti::save(to_volume(vol, spacing), path);
        },
        py::arg("volume"), py::arg("path"), py::arg("spacing") = Spacing{1.0, 1.0, 1.0});

    m.def(
        "_run_experiment",
        [](const std::string& config_json, const std::string& output_dir) {
            const auto config = config_from_json(nlohmann::json::parse(config_json));
            ExperimentReport report;
            {
                py::gil_scoped_release release;
                report = run_experiment(config);
                if (!output_dir.empty()) write_report(report, config, output_dir);
            }
            return report.summary.dump();
        },
        py::arg("config_json"), py::arg("output_dir") = "");
}
