// touchless: command-line entry point for dataset inventory, the two
// preprocessing pipelines, trainer export and metric reporting.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal failure.
// Diagnostics go to stderr; results go to files only.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "touchless/touchless.hpp"

namespace fs = std::filesystem;
using namespace touchless;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { std::cerr << "touchless: " << msg << "\n"; }

void print_warnings(const Warnings& w) {
    for (const auto& line : w) log("warning: " + line);
}

PipelineConfig config_or(const std::string& path, PipelineConfig fallback) {
    return path.empty() ? fallback : load_config(path);
}

/// Keeps touchless records; augmentation and enhancement apply to that
/// modality only.
Manifest touchless_only(const Manifest& m) {
    Manifest out = m;
    out.records.clear();
    for (const auto& r : m.records)
        if (r.modality == Modality::touchless) out.records.push_back(r);
    if (out.records.size() != m.records.size())
        log("skipping " + std::to_string(m.records.size() - out.records.size()) + " touch-based records");
    out.refresh_class_count();
    return out;
}

int finish_batch(const BatchResult& res, const fs::path& out_manifest) {
    write_manifest(res.manifest, out_manifest);
    log("wrote " + std::to_string(res.manifest.records.size()) + " records to " + out_manifest.string());
    for (const auto& f : res.failures) log("failed: " + f.path + ": " + f.message);
    if (!res.failures.empty()) {
        log(std::to_string(res.failures.size()) + " inputs failed");
        return kData;
    }
    return kOk;
}

/// "<dir>_<stem>.png" from a manifest path, keeping names unique across
/// subject directories.
std::string flattened_png_name(const SampleRecord& r, std::string_view) {
    fs::path p(r.path);
    std::string name = p.parent_path().string();
    for (char& c : name)
        if (c == '/' || c == '\\') c = '_';
    if (!name.empty()) name += "_";
    return name + p.stem().string() + ".png";
}

struct Options {
    std::string root, out, manifest, config, out_dir, out_manifest, predictions, model, confusion, json, curves_dir,
        image, modality = "touchless";
    double fraction = 0.0;
    std::uint64_t seed = 0;
    unsigned jobs = 0;
    int size = 224;
    int classes = 0;
    bool upsample = false;
    std::vector<std::string> without, with, history;
};

int run_scan(const Options& o) {
    Warnings w;
    const Manifest m = scan_root(o.root, parse_modality(o.modality), &w);
    print_warnings(w);
    write_manifest(m, o.out);
    log("scanned " + std::to_string(m.records.size()) + " images from " + std::to_string(m.class_count) +
        " subjects");
    return kOk;
}

int run_split(const Options& o) {
    if (!(o.fraction > 0.0 && o.fraction < 1.0)) throw UsageError("--fraction must lie strictly between 0 and 1");
    Warnings w;
    const Manifest m = assign_splits(read_manifest(o.manifest), o.fraction, o.seed, &w);
    print_warnings(w);
    write_manifest(m, o.out);
    log("train " + std::to_string(m.count(Split::train)) + ", test " + std::to_string(m.count(Split::test)));
    return kOk;
}

int run_pipeline_command(const Options& o, PipelineConfig fallback) {
    const PipelineConfig cfg = config_or(o.config, std::move(fallback));
    const Manifest m = touchless_only(read_manifest(o.manifest));
    return finish_batch(run_batch(m, cfg, o.out_dir, o.jobs), o.out_manifest);
}

int run_prepare(const Options& o) {
    if (o.size < 1) throw UsageError("--size must be >= 1");
    PipelineConfig cfg;
    cfg.name = "prepare";
    cfg.stages = {{stage::Resize{o.size, o.size}}};
    const Manifest m = read_manifest(o.manifest);
    const fs::path out_manifest = o.out_manifest.empty() ? fs::path(o.out_dir) / "manifest.csv" : fs::path(o.out_manifest);
    return finish_batch(run_batch(m, cfg, o.out_dir, o.jobs, flattened_png_name), out_manifest);
}

int run_evaluate(const Options& o) {
    if (o.classes < 1) throw UsageError("--classes must be >= 1");
    const auto preds = read_predictions(o.predictions, o.classes);
    const std::string model = o.model.empty() ? fs::path(o.predictions).stem().string() : o.model;
    const EvalSummary s = summarize(preds, o.classes, model);
    write_summary(s, o.out);
    if (!o.confusion.empty()) write_text_atomic(o.confusion, confusion_to_json(confusion(preds, o.classes)).dump() + "\n");
    log(model + ": " + format_metrics(s) + " (" + std::to_string(preds.size()) + " predictions)");
    return kOk;
}

int run_report(const Options& o) {
    std::vector<EvalSummary> a, b;
    for (const auto& p : o.without) a.push_back(read_summary(p));
    for (const auto& p : o.with) b.push_back(read_summary(p));
    const ComparisonReport r = compare_reports(a, b);
    write_text_atomic(o.out, render_report_text(r));
    if (!o.json.empty()) write_text_atomic(o.json, render_report_json(r).dump(2) + "\n");
    if (!o.history.empty()) {
        if (o.curves_dir.empty()) throw UsageError("--history requires --curves-dir");
        fs::create_directories(o.curves_dir);
        for (const auto& p : o.history) {
            const HistoryCurve h = read_history(p);
            write_text_atomic(fs::path(o.curves_dir) / (fs::path(p).stem().string() + ".csv"), export_curves(h));
        }
    }
    log("compared " + std::to_string(r.rows.size()) + " models");
    return kOk;
}

int run_sift_dump(const Options& o) {
    SiftParams p;
    p.upsample = o.upsample;
    const Image img = read_image(o.image);
    if (img.width() < 16 || img.height() < 16)
        throw DataError("image '" + o.image + "' is smaller than the 16x16 minimum for SIFT");
    const ScaleSpace ss = build_scale_space(img, p);
    const auto kps = detect_keypoints(ss);
    nlohmann::ordered_json j{{"width", img.width()}, {"height", img.height()}, {"keypoints", keypoints_to_json(kps)}};
    write_text_atomic(o.out, j.dump(2) + "\n");
    log(std::to_string(kps.size()) + " keypoints");
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Touchless fingerprint preprocessing, dataset and metrics toolkit"};
    app.require_subcommand(1);
    Options o;

    auto* scan = app.add_subcommand("scan", "Inventory a one-directory-per-subject image tree into a manifest");
    scan->add_option("--root", o.root, "Dataset root directory")->required()->check(CLI::ExistingDirectory);
    scan->add_option("--out", o.out, "Output manifest CSV")->required();
    scan->add_option("--modality", o.modality, "Modality label for all records")
        ->check(CLI::IsMember({"touchless", "touchbased"}))
        ->capture_default_str();

    auto* split = app.add_subcommand("split", "Assign a seeded per-subject train/test split");
    split->add_option("--manifest", o.manifest, "Input manifest CSV")->required()->check(CLI::ExistingFile);
    split->add_option("--fraction", o.fraction, "Train fraction in (0,1)")->required();
    split->add_option("--seed", o.seed, "Random seed")->required();
    split->add_option("--out", o.out, "Output manifest CSV")->required();

    auto add_pipeline_flags = [&](CLI::App* cmd) {
        cmd->add_option("--manifest", o.manifest, "Input manifest CSV")->required()->check(CLI::ExistingFile);
        cmd->add_option("--config", o.config, "Pipeline config JSON (built-in default when absent)")
            ->check(CLI::ExistingFile);
        cmd->add_option("--out-dir", o.out_dir, "Directory for output images")->required();
        cmd->add_option("--out-manifest", o.out_manifest, "Derived manifest CSV")->required();
        cmd->add_option("--jobs", o.jobs, "Worker threads (0 = logical cores)")->capture_default_str();
    };
    auto* augment = app.add_subcommand("augment", "Run the photometric augmentation pipeline");
    add_pipeline_flags(augment);
    auto* enhance = app.add_subcommand("enhance", "Run the enhancement pipeline");
    add_pipeline_flags(enhance);

    auto* prepare = app.add_subcommand("prepare", "Resize images for trainer ingest");
    prepare->add_option("--manifest", o.manifest, "Input manifest CSV")->required()->check(CLI::ExistingFile);
    prepare->add_option("--size", o.size, "Square output size in pixels")->capture_default_str();
    prepare->add_option("--out-dir", o.out_dir, "Directory for output images")->required();
    prepare->add_option("--out-manifest", o.out_manifest, "Derived manifest CSV (default <out-dir>/manifest.csv)");
    prepare->add_option("--jobs", o.jobs, "Worker threads (0 = logical cores)")->capture_default_str();

    auto* evaluate = app.add_subcommand("evaluate", "Summarize a predictions CSV");
    evaluate->add_option("--predictions", o.predictions, "Predictions CSV")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--classes", o.classes, "Class count K")->required();
    evaluate->add_option("--out", o.out, "Output summary JSON")->required();
    evaluate->add_option("--model", o.model, "Model name (default: predictions file stem)");
    evaluate->add_option("--confusion", o.confusion, "Optional confusion matrix JSON output");

    auto* report = app.add_subcommand("report", "Compare summaries without and with preprocessing");
    report->add_option("--without", o.without, "Summary JSON files without preprocessing")
        ->required()
        ->check(CLI::ExistingFile);
    report->add_option("--with", o.with, "Summary JSON files with preprocessing")->required()->check(CLI::ExistingFile);
    report->add_option("--out", o.out, "Plain-text report output")->required();
    report->add_option("--json", o.json, "Optional JSON report output");
    report->add_option("--history", o.history, "Training history JSON files to export as curves")
        ->check(CLI::ExistingFile);
    report->add_option("--curves-dir", o.curves_dir, "Directory for curve CSVs");

    auto* sift_dump = app.add_subcommand("sift-dump", "Dump SIFT keypoints of one image as JSON");
    sift_dump->add_option("--image", o.image, "Input PNG or BMP")->required()->check(CLI::ExistingFile);
    sift_dump->add_option("--out", o.out, "Output JSON")->required();
    sift_dump->add_flag("--upsample", o.upsample, "Double the input before building the scale space");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (scan->parsed()) return run_scan(o);
        if (split->parsed()) return run_split(o);
        if (augment->parsed()) return run_pipeline_command(o, default_direct_config());
        if (enhance->parsed()) return run_pipeline_command(o, default_indirect_config());
        if (prepare->parsed()) return run_prepare(o);
        if (evaluate->parsed()) return run_evaluate(o);
        if (report->parsed()) return run_report(o);
        if (sift_dump->parsed()) return run_sift_dump(o);
    } catch (const UsageError& e) {
        log(std::string("usage error: ") + e.what());
        return kUsage;
    } catch (const DataError& e) {
        log(std::string("data error: ") + e.what());
        return kData;
    } catch (const std::invalid_argument& e) {
        log(std::string("invalid argument: ") + e.what());
        return kUsage;
    } catch (const std::exception& e) {
        log(std::string("internal error: ") + e.what());
        return kInternal;
    }
    return kInternal;
}
