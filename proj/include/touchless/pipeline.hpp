#pragma once

// Declarative stage chains for the augmentation ("direct") and
// enhancement ("indirect") pipelines, their JSON config format, and the
// batch runner that materializes variants to disk.
//
// Config document:
//   {"name": ..., "stages": [{"kind": ..., "params": {...}}, ...],
//    "variants": [{"name": ..., "extra_stages": [...]}, ...]}

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "touchless/dataset.hpp"
#include "touchless/image.hpp"
#include "touchless/image_io.hpp"
#include "touchless/imaging.hpp"
#include "touchless/sift.hpp"

namespace touchless {

/// Invalid pipeline configuration (bad params, unknown keys, stage order).
class ConfigError : public DataError {
public:
    using DataError::DataError;
};

/// A stage failed while processing one input.
class StageError : public DataError {
public:
    using DataError::DataError;
};

using ojson = nlohmann::ordered_json;

namespace pipeline_detail {

/// Reads typed fields from a params object and rejects keys nobody asked for.
class ParamReader {
public:
    ParamReader(const nlohmann::json& j, std::string context) : j_(j), context_(std::move(context)) {
        if (!j_.is_object()) throw ConfigError(context_ + ": params must be an object");
    }

    template <typename T>
    void read(const char* key, T& out) {
        used_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(context_ + ": parameter '" + key + "' has the wrong type");
        }
    }

    /// Reads a real that may be null, meaning +infinity.
    void read_unbounded(const char* key, double& out) {
        used_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        if (it->is_null()) {
            out = std::numeric_limits<double>::infinity();
            return;
        }
        if (!it->is_number()) throw ConfigError(context_ + ": parameter '" + key + "' must be a number or null");
        out = it->get<double>();
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!used_.count(key)) throw ConfigError(context_ + ": unknown parameter '" + key + "'");
    }

private:
    const nlohmann::json& j_;
    std::string context_;
    std::set<std::string> used_;
};

inline void expect(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                                const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": expected an object");
    for (const auto& [key, value] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError(context + ": unknown key '" + key + "'");
}

} // namespace pipeline_detail

// ---------------------------------------------------------------------------
// Stage parameter records. Each carries its kind name, JSON mapping and
// validation; defaults apply to keys omitted from a config file.

namespace stage {

struct NormalizeStretch {
    static constexpr std::string_view kind = "normalize_stretch";
    void validate() const {}
    ojson to_json() const { return ojson::object(); }
    void read(pipeline_detail::ParamReader&) {}
};

/// Unit scaling v/255 as applied at model ingest. On 8-bit storage the
/// quantized result equals the input.
struct NormalizeUnit {
    static constexpr std::string_view kind = "normalize_unit";
    void validate() const {}
    ojson to_json() const { return ojson::object(); }
    void read(pipeline_detail::ParamReader&) {}
};

struct Contrast {
    static constexpr std::string_view kind = "contrast";
    double factor = 1.5;
    void validate() const { pipeline_detail::expect(factor > 0.0 && std::isfinite(factor), "contrast: factor must be > 0"); }
    ojson to_json() const { return {{"factor", factor}}; }
    void read(pipeline_detail::ParamReader& r) { r.read("factor", factor); }
};

struct Brightness {
    static constexpr std::string_view kind = "brightness";
    double delta = 25.0;
    void validate() const { pipeline_detail::expect(std::isfinite(delta), "brightness: delta must be finite"); }
    ojson to_json() const { return {{"delta", delta}}; }
    void read(pipeline_detail::ParamReader& r) { r.read("delta", delta); }
};

struct Color {
    static constexpr std::string_view kind = "color";
    std::array<double, 3> gains{1.2, 1.0, 1.0};
    void validate() const {
        for (double g : gains)
            pipeline_detail::expect(g >= 0.0 && std::isfinite(g), "color: gains must be finite and >= 0");
    }
    ojson to_json() const { return {{"gains", gains}}; }
    void read(pipeline_detail::ParamReader& r) { r.read("gains", gains); }
};

struct Sharpen {
    static constexpr std::string_view kind = "sharpen";
    double amount = 1.0;
    void validate() const { pipeline_detail::expect(amount > 0.0 && std::isfinite(amount), "sharpen: amount must be > 0"); }
    ojson to_json() const { return {{"amount", amount}}; }
    void read(pipeline_detail::ParamReader& r) { r.read("amount", amount); }
};

struct Clahe {
    static constexpr std::string_view kind = "clahe";
    double clip_limit = 2.0;  ///< null in JSON = clipping disabled
    int tiles_x = 8;
    int tiles_y = 8;
    void validate() const {
        pipeline_detail::expect(clip_limit >= 1.0, "clahe: clip_limit must be >= 1");
        pipeline_detail::expect(tiles_x >= 1 && tiles_y >= 1, "clahe: tile counts must be >= 1");
    }
    ojson to_json() const {
        ojson j;
        j["clip_limit"] = std::isfinite(clip_limit) ? ojson(clip_limit) : ojson(nullptr);
        j["tiles_x"] = tiles_x;
        j["tiles_y"] = tiles_y;
        return j;
    }
    void read(pipeline_detail::ParamReader& r) {
        r.read_unbounded("clip_limit", clip_limit);
        r.read("tiles_x", tiles_x);
        r.read("tiles_y", tiles_y);
    }
};

/// Keypoint-cloud bounding box (plus margin) as the region of interest.
struct SiftRoi {
    static constexpr std::string_view kind = "sift_roi";
    int margin = 12;
    int min_keypoints = 5;
    SiftParams sift{};
    void validate() const {
        pipeline_detail::expect(margin >= 0, "sift_roi: margin must be >= 0");
        pipeline_detail::expect(min_keypoints >= 1, "sift_roi: min_keypoints must be >= 1");
        try {
            sift.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("sift_roi: ") + e.what());
        }
    }
    ojson to_json() const {
        return {{"margin", margin},
                {"min_keypoints", min_keypoints},
                {"octaves", sift.octaves},
                {"scales_per_octave", sift.scales_per_octave},
                {"sigma0", sift.sigma0},
                {"contrast_threshold", sift.contrast_threshold},
                {"edge_ratio_threshold", sift.edge_ratio_threshold},
                {"upsample", sift.upsample}};
    }
    void read(pipeline_detail::ParamReader& r) {
        r.read("margin", margin);
        r.read("min_keypoints", min_keypoints);
        r.read("octaves", sift.octaves);
        r.read("scales_per_octave", sift.scales_per_octave);
        r.read("sigma0", sift.sigma0);
        r.read("contrast_threshold", sift.contrast_threshold);
        r.read("edge_ratio_threshold", sift.edge_ratio_threshold);
        r.read("upsample", sift.upsample);
    }
};

/// Otsu binarization; also records the binary image as the context mask.
struct Threshold {
    static constexpr std::string_view kind = "threshold";
    void validate() const {}
    ojson to_json() const { return ojson::object(); }
    void read(pipeline_detail::ParamReader&) {}
};

/// Crops to the SIFT ROI, else to the mask's bounding box grown by
/// mask_margin, else leaves the image untouched.
struct CropRoi {
    static constexpr std::string_view kind = "crop_roi";
    int mask_margin = 8;
    void validate() const { pipeline_detail::expect(mask_margin >= 0, "crop_roi: mask_margin must be >= 0"); }
    ojson to_json() const { return {{"mask_margin", mask_margin}}; }
    void read(pipeline_detail::ParamReader& r) { r.read("mask_margin", mask_margin); }
};

struct Laplacian {
    static constexpr std::string_view kind = "laplacian";
    void validate() const {}
    ojson to_json() const { return ojson::object(); }
    void read(pipeline_detail::ParamReader&) {}
};

struct Invert {
    static constexpr std::string_view kind = "invert";
    void validate() const {}
    ojson to_json() const { return ojson::object(); }
    void read(pipeline_detail::ParamReader&) {}
};

struct Dilate {
    static constexpr std::string_view kind = "dilate";
    int size = 3;
    std::string shape = "square";  ///< square | cross
    int iterations = 1;
    void validate() const {
        pipeline_detail::expect(size >= 1 && size % 2 == 1, "dilate: size must be odd and >= 1");
        pipeline_detail::expect(shape == "square" || shape == "cross", "dilate: shape must be 'square' or 'cross'");
        pipeline_detail::expect(iterations >= 1, "dilate: iterations must be >= 1");
    }
    StructuringElement element() const {
        return shape == "cross" ? StructuringElement::cross(size) : StructuringElement::square(size);
    }
    ojson to_json() const { return {{"size", size}, {"shape", shape}, {"iterations", iterations}}; }
    void read(pipeline_detail::ParamReader& r) {
        r.read("size", size);
        r.read("shape", shape);
        r.read("iterations", iterations);
    }
};

struct Resize {
    static constexpr std::string_view kind = "resize";
    int width = 224;
    int height = 224;
    void validate() const { pipeline_detail::expect(width >= 1 && height >= 1, "resize: width and height must be >= 1"); }
    ojson to_json() const { return {{"width", width}, {"height", height}}; }
    void read(pipeline_detail::ParamReader& r) {
        r.read("width", width);
        r.read("height", height);
    }
};

} // namespace stage

using StageParams = std::variant<stage::NormalizeStretch, stage::NormalizeUnit, stage::Contrast, stage::Brightness,
                                 stage::Color, stage::Sharpen, stage::Clahe, stage::SiftRoi, stage::Threshold,
                                 stage::CropRoi, stage::Laplacian, stage::Invert, stage::Dilate, stage::Resize>;

struct StageSpec {
    StageParams params;

    std::string_view kind() const {
        return std::visit([](const auto& p) { return std::decay_t<decltype(p)>::kind; }, params);
    }
    template <typename T>
    bool is() const { return std::holds_alternative<T>(params); }
};

struct VariantSpec {
    std::string name;
    std::vector<StageSpec> extra_stages;
};

struct PipelineConfig {
    std::string name;
    std::vector<StageSpec> stages;
    std::vector<VariantSpec> variants;
};

/// Inter-stage state threaded through a run.
struct PipelineContext {
    Image image;
    std::optional<Rect> roi;
    std::optional<Image> mask;
    std::optional<std::vector<Keypoint>> keypoints;
};

struct NamedImage {
    std::string variant;
    Image image;
};

namespace pipeline_detail {

template <typename T>
bool kind_matches(std::string_view kind, StageParams& out) {
    if (kind != T::kind) return false;
    out = T{};
    return true;
}

template <typename... Ts>
bool make_stage(std::string_view kind, StageParams& out, std::variant<Ts...>*) {
    return (kind_matches<Ts>(kind, out) || ...);
}

/// Stages that operate on one channel; RGB input is converted to luma first.
inline bool forces_gray(const StageSpec& s) {
    return s.is<stage::Clahe>() || s.is<stage::SiftRoi>() || s.is<stage::Threshold>() || s.is<stage::Laplacian>() ||
           s.is<stage::Dilate>();
}

inline bool valid_variant_name(std::string_view n) {
    return !n.empty() && std::all_of(n.begin(), n.end(), [](unsigned char c) { return std::isalnum(c) || c == '-'; });
}

struct ChainState {
    bool gray = false;
    bool has_region_source = false;
};

inline void check_chain(const std::vector<StageSpec>& stages, ChainState& st, const std::string& where) {
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto& s = stages[i];
        const std::string at = where + " stage " + std::to_string(i) + " (" + std::string(s.kind()) + ")";
        try {
            std::visit([](const auto& p) { p.validate(); }, s.params);
        } catch (const ConfigError& e) {
            throw ConfigError(at + ": " + e.what());
        }
        if (s.is<stage::Color>() && st.gray) throw ConfigError(at + ": color requires 3-channel data but the chain is gray here");
        if (s.is<stage::CropRoi>() && !st.has_region_source)
            throw ConfigError(at + ": crop_roi needs an earlier sift_roi or threshold stage");
        if (forces_gray(s)) st.gray = true;
        if (s.is<stage::SiftRoi>() || s.is<stage::Threshold>()) st.has_region_source = true;
    }
}

} // namespace pipeline_detail

/// Type-checks a config: params, stage ordering, channel requirements and
/// variant names. Throws ConfigError naming the offending stage.
inline void validate_config(const PipelineConfig& cfg) {
    using namespace pipeline_detail;
    ChainState base;
    check_chain(cfg.stages, base, "pipeline '" + cfg.name + "'");
    std::set<std::string> names;
    for (const auto& v : cfg.variants) {
        if (!valid_variant_name(v.name))
            throw ConfigError("variant name '" + v.name + "' must be non-empty and use only letters, digits and '-'");
        if (!names.insert(v.name).second) throw ConfigError("duplicate variant name '" + v.name + "'");
        ChainState st = base;
        check_chain(v.extra_stages, st, "variant '" + v.name + "'");
    }
}

// ---------------------------------------------------------------------------
// JSON

inline ojson stage_to_json(const StageSpec& s) {
    return {{"kind", std::string(s.kind())},
            {"params", std::visit([](const auto& p) { return p.to_json(); }, s.params)}};
}

inline StageSpec stage_from_json(const nlohmann::json& j, const std::string& context) {
    using namespace pipeline_detail;
    reject_unknown_keys(j, {"kind", "params"}, context);
    if (!j.contains("kind") || !j["kind"].is_string()) throw ConfigError(context + ": missing string 'kind'");
    const std::string kind = j["kind"].get<std::string>();
    StageSpec s;
    if (!make_stage(kind, s.params, static_cast<StageParams*>(nullptr)))
        throw ConfigError(context + ": unknown stage kind '" + kind + "'");
    const nlohmann::json empty = nlohmann::json::object();
    const nlohmann::json& params = j.contains("params") ? j["params"] : empty;
    ParamReader reader(params, context + " (" + kind + ")");
    std::visit([&](auto& p) { p.read(reader); }, s.params);
    reader.finish();
    return s;
}

inline std::vector<StageSpec> stages_from_json(const nlohmann::json& j, const std::string& context) {
    if (!j.is_array()) throw ConfigError(context + ": expected an array of stages");
    std::vector<StageSpec> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(stage_from_json(j[i], context + "[" + std::to_string(i) + "]"));
    return out;
}

inline ojson config_to_json(const PipelineConfig& cfg) {
    ojson j;
    j["name"] = cfg.name;
    j["stages"] = ojson::array();
    for (const auto& s : cfg.stages) j["stages"].push_back(stage_to_json(s));
    j["variants"] = ojson::array();
    for (const auto& v : cfg.variants) {
        ojson vj;
        vj["name"] = v.name;
        vj["extra_stages"] = ojson::array();
        for (const auto& s : v.extra_stages) vj["extra_stages"].push_back(stage_to_json(s));
        j["variants"].push_back(std::move(vj));
    }
    return j;
}

inline std::string serialize_config(const PipelineConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

/// Parses and validates a config document. Unknown keys are rejected at
/// every level.
inline PipelineConfig parse_config(std::string_view text) {
    using namespace pipeline_detail;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown_keys(j, {"name", "stages", "variants"}, "config");
    PipelineConfig cfg;
    if (j.contains("name")) {
        if (!j["name"].is_string()) throw ConfigError("config: 'name' must be a string");
        cfg.name = j["name"].get<std::string>();
    }
    if (j.contains("stages")) cfg.stages = stages_from_json(j["stages"], "stages");
    if (j.contains("variants")) {
        if (!j["variants"].is_array()) throw ConfigError("config: 'variants' must be an array");
        for (std::size_t i = 0; i < j["variants"].size(); ++i) {
            const auto& vj = j["variants"][i];
            const std::string ctx = "variants[" + std::to_string(i) + "]";
            reject_unknown_keys(vj, {"name", "extra_stages"}, ctx);
            VariantSpec v;
            if (!vj.contains("name") || !vj["name"].is_string()) throw ConfigError(ctx + ": missing string 'name'");
            v.name = vj["name"].get<std::string>();
            if (vj.contains("extra_stages")) v.extra_stages = stages_from_json(vj["extra_stages"], ctx + ".extra_stages");
            cfg.variants.push_back(std::move(v));
        }
    }
    validate_config(cfg);
    return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

// ---------------------------------------------------------------------------
// Default configurations

/// Photometric augmentation: six variants per input and no geometric stage.
inline PipelineConfig default_direct_config() {
    PipelineConfig cfg;
    cfg.name = "direct";
    cfg.variants = {
        {"original", {}},
        {"normalized", {{stage::NormalizeStretch{}}}},
        {"contrast", {{stage::Contrast{1.5}}}},
        {"color", {{stage::Color{{1.2, 1.0, 1.0}}}}},
        {"brightness", {{stage::Brightness{25.0}}}},
        {"sharpened", {{stage::Sharpen{1.0}}}},
    };
    return cfg;
}

/// Ten-stage enhancement chain followed by three emitted variants.
inline PipelineConfig default_indirect_config() {
    PipelineConfig cfg;
    cfg.name = "indirect";
    cfg.stages = {
        {stage::NormalizeStretch{}}, {stage::Clahe{}},     {stage::SiftRoi{}},    {stage::Threshold{}},
        {stage::CropRoi{}},          {stage::Laplacian{}}, {stage::Invert{}},     {stage::Sharpen{1.0}},
        {stage::Contrast{1.2}},      {stage::Dilate{}},
    };
    cfg.variants = {
        {"enhanced", {}},
        {"enhanced-contrast", {{stage::Contrast{1.3}}}},
        {"enhanced-sharpen", {{stage::Sharpen{1.0}}}},
    };
    return cfg;
}

// ---------------------------------------------------------------------------
// Execution

namespace pipeline_detail {

inline Image& gray_image(PipelineContext& ctx) {
    if (ctx.image.channels() != 1) ctx.image = to_grayscale(ctx.image);
    return ctx.image;
}

inline Rect keypoint_bounds(const std::vector<Keypoint>& kps, int margin, int width, int height) {
    double x0 = kps[0].x, x1 = kps[0].x, y0 = kps[0].y, y1 = kps[0].y;
    for (const auto& k : kps) {
        x0 = std::min(x0, k.x);
        x1 = std::max(x1, k.x);
        y0 = std::min(y0, k.y);
        y1 = std::max(y1, k.y);
    }
    const int left = std::max(0, static_cast<int>(std::floor(x0)) - margin);
    const int top = std::max(0, static_cast<int>(std::floor(y0)) - margin);
    const int right = std::min(width - 1, static_cast<int>(std::ceil(x1)) + margin);
    const int bottom = std::min(height - 1, static_cast<int>(std::ceil(y1)) + margin);
    return {left, top, right - left + 1, bottom - top + 1};
}

struct StageRunner {
    PipelineContext& ctx;

    void operator()(const stage::NormalizeStretch&) const { ctx.image = normalize_stretch(ctx.image); }
    void operator()(const stage::NormalizeUnit&) const { ctx.image = quantize(normalize_unit(ctx.image)); }
    void operator()(const stage::Contrast& p) const { ctx.image = adjust_contrast(ctx.image, p.factor); }
    void operator()(const stage::Brightness& p) const { ctx.image = adjust_brightness(ctx.image, p.delta); }
    void operator()(const stage::Color& p) const {
        if (ctx.image.channels() != 3) throw StageError("color requires a 3-channel image");
        ctx.image = adjust_color(ctx.image, p.gains);
    }
    void operator()(const stage::Sharpen& p) const { ctx.image = sharpen(ctx.image, p.amount); }
    void operator()(const stage::Clahe& p) const {
        Image& g = gray_image(ctx);
        ClaheParams cp{p.clip_limit, std::min(p.tiles_x, g.width()), std::min(p.tiles_y, g.height())};
        ctx.image = clahe(g, cp);
    }
    void operator()(const stage::SiftRoi& p) const {
        Image& g = gray_image(ctx);
        std::vector<Keypoint> kps;
        if (g.width() >= 16 && g.height() >= 16) kps = detect_keypoints(build_scale_space(g, p.sift));
        if (static_cast<int>(kps.size()) >= p.min_keypoints)
            ctx.roi = keypoint_bounds(kps, p.margin, g.width(), g.height());
        else
            ctx.roi.reset();
        ctx.keypoints = std::move(kps);
    }
    void operator()(const stage::Threshold&) const {
        auto res = threshold_otsu(gray_image(ctx));
        ctx.mask = res.binary;
        ctx.image = std::move(res.binary);
    }
    void operator()(const stage::CropRoi& p) const {
        std::optional<Rect> r = ctx.roi;
        if (!r && ctx.mask) r = roi_from_mask(*ctx.mask, p.mask_margin);
        if (r) {
            ctx.image = crop(ctx.image, *r);
            if (ctx.mask) ctx.mask = crop(*ctx.mask, *r);
            if (ctx.keypoints) {
                for (auto& k : *ctx.keypoints) {
                    k.x -= r->x;
                    k.y -= r->y;
                }
            }
        }
        ctx.roi.reset();
    }
    void operator()(const stage::Laplacian&) const { ctx.image = laplacian(gray_image(ctx)); }
    void operator()(const stage::Invert&) const { ctx.image = invert(ctx.image); }
    void operator()(const stage::Dilate& p) const { ctx.image = dilate(gray_image(ctx), p.element(), p.iterations); }
    void operator()(const stage::Resize& p) const {
        ctx.image = resize_bilinear(ctx.image, p.width, p.height);
        ctx.roi.reset();
        ctx.mask.reset();
        ctx.keypoints.reset();
    }
};

inline void run_chain(PipelineContext& ctx, const std::vector<StageSpec>& stages, const std::string& where) {
    for (std::size_t i = 0; i < stages.size(); ++i) {
        try {
            std::visit(StageRunner{ctx}, stages[i].params);
        } catch (const std::exception& e) {
            throw StageError(where + " stage " + std::to_string(i) + " (" + std::string(stages[i].kind()) +
                             "): " + e.what());
        }
    }
}

} // namespace pipeline_detail

/// Runs the base chain once, then each variant's extra stages on a copy of
/// the resulting context. Without variants a single output named "base" is
/// produced.
inline std::vector<NamedImage> run_pipeline(const Image& img, const PipelineConfig& cfg) {
    validate_config(cfg);
    PipelineContext ctx{img, std::nullopt, std::nullopt, std::nullopt};
    pipeline_detail::run_chain(ctx, cfg.stages, "pipeline '" + cfg.name + "'");
    std::vector<NamedImage> out;
    if (cfg.variants.empty()) {
        out.push_back({"base", std::move(ctx.image)});
        return out;
    }
    for (const auto& v : cfg.variants) {
        PipelineContext local = ctx;
        pipeline_detail::run_chain(local, v.extra_stages, "variant '" + v.name + "'");
        out.push_back({v.name, std::move(local.image)});
    }
    return out;
}

/// "<subject_id>_<sample_idx>_<variant>.png"
inline std::string output_file_name(const SampleRecord& r, std::string_view variant) {
    return std::to_string(r.subject_id) + "_" + std::to_string(r.sample_idx) + "_" + std::string(variant) + ".png";
}

struct BatchFailure {
    std::string path;
    std::string message;
};

struct BatchResult {
    Manifest manifest;
    std::vector<BatchFailure> failures;
};

using OutputNamer = std::function<std::string(const SampleRecord&, std::string_view variant)>;

/// Processes every record (concurrently when jobs > 1) and writes one PNG
/// per variant into out_dir, named by `namer`. The derived manifest lists
/// outputs in input record order and keeps each source record's subject,
/// sample, modality and split. Unreadable or failing inputs are collected,
/// not fatal; colliding output names are rejected before any work starts.
inline BatchResult run_batch(const Manifest& m, const PipelineConfig& cfg, const std::filesystem::path& out_dir,
                             unsigned jobs = 0, const OutputNamer& namer = output_file_name) {
    namespace fs = std::filesystem;
    validate_config(cfg);
    {
        std::vector<std::string> variants;
        for (const auto& v : cfg.variants) variants.push_back(v.name);
        if (variants.empty()) variants.push_back("base");
        std::map<std::string, std::string> owner;
        for (const auto& r : m.records)
            for (const auto& v : variants) {
                auto [it, inserted] = owner.emplace(namer(r, v), r.path);
                if (!inserted)
                    throw DataError("records '" + it->second + "' and '" + r.path + "' both produce output '" +
                                    it->first + "'");
            }
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) throw std::runtime_error("cannot create output directory '" + out_dir.string() + "'");
    {
        const fs::path probe = out_dir / ".write-probe";
        try {
            write_text_atomic(probe, "");
        } catch (const std::exception&) {
            throw std::runtime_error("output directory '" + out_dir.string() + "' is not writable");
        }
        fs::remove(probe, ec);
    }

    struct Slot {
        std::vector<std::string> variants;
        std::optional<std::string> error;
    };
    std::vector<Slot> slots(m.records.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < m.records.size(); i = next++) {
            const SampleRecord& rec = m.records[i];
            try {
                const Image img = read_image(resolve(m, rec));
                for (auto& out : run_pipeline(img, cfg)) {
                    write_image(out.image, out_dir / namer(rec, out.variant));
                    slots[i].variants.push_back(std::move(out.variant));
                }
            } catch (const std::exception& e) {
                slots[i].variants.clear();
                slots[i].error = e.what();
            }
        }
    };

    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(1, m.records.size())));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    }

    BatchResult result;
    result.manifest.source_root = out_dir.string();
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        const SampleRecord& rec = m.records[i];
        if (slots[i].error) {
            result.failures.push_back({rec.path, *slots[i].error});
            continue;
        }
        for (const auto& v : slots[i].variants) {
            SampleRecord o = rec;
            o.path = namer(rec, v);
            result.manifest.records.push_back(std::move(o));
        }
    }
    result.manifest.refresh_class_count();
    return result;
}

} // namespace touchless
