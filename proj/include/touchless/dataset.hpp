#pragma once

// Dataset inventory: one directory per subject, deterministic stratified
// train/test assignment, and the manifest CSV shared with the trainer.
//
// Manifest file:  path,subject_id,sample_idx,modality,split  (UTF-8, LF)
// Side metadata:  <manifest>.meta.json  {"source_root": ..., "seed": ...}

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "touchless/fileio.hpp"
#include "touchless/image.hpp"

namespace touchless {

enum class Modality { touchless, touchbased };
enum class Split { unassigned, train, test };

inline std::string_view to_string(Modality m) { return m == Modality::touchless ? "touchless" : "touchbased"; }

inline std::string_view to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    default: return "unassigned";
    }
}

inline Modality parse_modality(std::string_view s) {
    if (s == "touchless") return Modality::touchless;
    if (s == "touchbased") return Modality::touchbased;
    throw std::invalid_argument("unknown modality '" + std::string(s) + "'");
}

inline Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    if (s == "unassigned") return Split::unassigned;
    throw std::invalid_argument("unknown split '" + std::string(s) + "'");
}

inline constexpr int kMaxSamplesPerSubject = 4;

struct SampleRecord {
    std::string path;  ///< relative to Manifest::source_root, '/' separated
    int subject_id = 0;
    int sample_idx = 0;
    Modality modality = Modality::touchless;
    Split split = Split::unassigned;

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct Manifest {
    std::vector<SampleRecord> records;
    int class_count = 0;
    std::string source_root;
    std::uint64_t seed = 0;

    friend bool operator==(const Manifest&, const Manifest&) = default;

    /// Recomputes class_count from the records.
    void refresh_class_count() {
        std::set<int> ids;
        for (const auto& r : records) ids.insert(r.subject_id);
        class_count = static_cast<int>(ids.size());
    }

    std::size_t count(Split s) const {
        return static_cast<std::size_t>(
            std::count_if(records.begin(), records.end(), [s](const SampleRecord& r) { return r.split == s; }));
    }
};

using Warnings = std::vector<std::string>;

namespace dataset_detail {

inline bool is_image_file(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    static const std::set<std::string> known{".png", ".bmp", ".jpg", ".jpeg", ".tif", ".tiff"};
    return known.count(ext) > 0;
}

/// Subject id from a directory name: its trailing run of digits
/// ("17", "017", "subject_17" all give 17).
inline int parse_subject_id(const std::string& name) {
    std::size_t end = name.size();
    std::size_t begin = end;
    while (begin > 0 && std::isdigit(static_cast<unsigned char>(name[begin - 1]))) --begin;
    int id = 0;
    if (begin == end) return 0;
    auto [ptr, ec] = std::from_chars(name.data() + begin, name.data() + end, id);
    if (ec != std::errc{} || ptr != name.data() + end) return 0;
    return id;
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

/// Uniform integer in [0, n) by rejection sampling, so results do not
/// depend on the standard library's distribution implementation.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % n;
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_below(rng, i)]);
}

inline std::filesystem::path meta_path(const std::filesystem::path& manifest_path) {
    std::filesystem::path p = manifest_path;
    p += ".meta.json";
    return p;
}

/// source_root as stored in the sidecar: relative to the manifest's
/// directory, so a manifest and its images can be moved together.
inline std::string relative_root(const std::string& source_root, const std::filesystem::path& manifest_path) {
    namespace fs = std::filesystem;
    const fs::path base = fs::weakly_canonical(fs::absolute(manifest_path).parent_path());
    const fs::path root = fs::weakly_canonical(fs::absolute(source_root.empty() ? "." : source_root));
    fs::path rel = root.lexically_relative(base);
    if (rel.empty()) return root.string();
    return rel.string();
}

} // namespace dataset_detail

/// Inventories a one-directory-per-subject tree. Samples are numbered
/// 1..n in lexicographic file order; records come out ordered by
/// (subject, sample) regardless of directory enumeration order.
inline Manifest scan_root(const std::filesystem::path& root, Modality modality = Modality::touchless,
                          Warnings* warnings = nullptr) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw DataError("dataset root '" + root.string() + "' is not a directory");

    std::map<int, fs::path> subjects;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        const int id = dataset_detail::parse_subject_id(name);
        if (id < 1) throw DataError("cannot parse a subject id from directory '" + entry.path().string() + "'");
        auto [it, inserted] = subjects.emplace(id, entry.path());
        if (!inserted)
            throw DataError("directories '" + it->second.string() + "' and '" + entry.path().string() +
                            "' map to the same subject id " + std::to_string(id));
    }

    Manifest m;
    m.source_root = root.string();
    for (const auto& [id, dir] : subjects) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file() && dataset_detail::is_image_file(entry.path()))
                files.push_back(entry.path().filename().string());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            if (warnings) warnings->push_back("subject directory '" + dir.string() + "' contains no images");
            continue;
        }
        if (files.size() > kMaxSamplesPerSubject)
            throw DataError("subject directory '" + dir.string() + "' holds " + std::to_string(files.size()) +
                            " images; at most " + std::to_string(kMaxSamplesPerSubject) + " samples per subject");
        const std::string dir_name = dir.filename().string();
        for (std::size_t i = 0; i < files.size(); ++i) {
            m.records.push_back({dir_name + "/" + files[i], id, static_cast<int>(i) + 1, modality, Split::unassigned});
        }
    }
    m.refresh_class_count();
    return m;
}

/// Stratified, seeded train/test assignment.
///
/// Records of a subject are grouped by source sample (all variants of one
/// capture form a group). Groups are shuffled, records within each group are
/// shuffled, and the first round(fraction * k) of the resulting sequence go
/// to train. Whole groups therefore stay together except for at most one
/// group per subject when the target count is not a multiple of the group
/// size. Subjects with k >= 2 records always appear in both splits.
inline Manifest assign_splits(const Manifest& m, double train_fraction, std::uint64_t seed,
                              Warnings* warnings = nullptr) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("assign_splits: train fraction must lie strictly between 0 and 1");

    // subject -> sample -> record indices (sorted by path for order independence)
    std::map<int, std::map<int, std::vector<std::size_t>>> by_subject;
    for (std::size_t i = 0; i < m.records.size(); ++i)
        by_subject[m.records[i].subject_id][m.records[i].sample_idx].push_back(i);

    Manifest out = m;
    out.seed = seed;
    std::mt19937_64 rng(seed);
    for (auto& [subject, groups] : by_subject) {
        std::vector<std::vector<std::size_t>> ordered;
        std::size_t k = 0;
        for (auto& [sample, idx] : groups) {
            std::sort(idx.begin(), idx.end(),
                      [&](std::size_t a, std::size_t b) { return m.records[a].path < m.records[b].path; });
            k += idx.size();
            ordered.push_back(idx);
        }
        if (k == 1) {
            out.records[ordered[0][0]].split = Split::train;
            if (warnings)
                warnings->push_back("subject " + std::to_string(subject) + " has a single record; assigned to train");
            continue;
        }
        dataset_detail::shuffle(ordered, rng);
        for (auto& g : ordered) dataset_detail::shuffle(g, rng);

        auto target = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(k)));
        target = std::clamp<std::size_t>(target, 1, k - 1);
        std::size_t placed = 0;
        for (const auto& g : ordered) {
            for (std::size_t idx : g) out.records[idx].split = placed++ < target ? Split::train : Split::test;
        }
    }
    return out;
}

/// Checks record invariants and path uniqueness; messages cite 1-based
/// data line numbers as they appear in the CSV (header is line 1).
inline void validate_manifest(const Manifest& m) {
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        const auto& r = m.records[i];
        const std::string where = "record " + std::to_string(i + 1);
        if (r.path.empty()) throw DataError(where + ": empty path");
        if (r.path.find_first_of(",\n\r\"") != std::string::npos)
            throw DataError(where + ": path '" + r.path + "' contains a comma, quote or line break");
        if (r.subject_id < 1) throw DataError(where + ": subject_id must be >= 1");
        if (r.sample_idx < 1 || r.sample_idx > kMaxSamplesPerSubject)
            throw DataError(where + ": sample_idx must be in [1," + std::to_string(kMaxSamplesPerSubject) + "]");
        auto [it, inserted] = seen.emplace(r.path, i);
        if (!inserted)
            throw DataError("duplicate path '" + r.path + "' in records " + std::to_string(it->second + 1) + " and " +
                            std::to_string(i + 1));
    }
}

inline constexpr std::string_view kManifestHeader = "path,subject_id,sample_idx,modality,split";

inline std::string manifest_to_csv(const Manifest& m) {
    std::string out(kManifestHeader);
    out += '\n';
    for (const auto& r : m.records) {
        out += r.path;
        out += ',';
        out += std::to_string(r.subject_id);
        out += ',';
        out += std::to_string(r.sample_idx);
        out += ',';
        out += to_string(r.modality);
        out += ',';
        out += to_string(r.split);
        out += '\n';
    }
    return out;
}

inline Manifest manifest_from_csv(std::string_view text, const std::string& name = "<manifest>") {
    const auto lines = split_lines(text);
    if (lines.empty() || lines[0] != kManifestHeader)
        throw DataError(name + ":1: expected header '" + std::string(kManifestHeader) + "'");
    Manifest m;
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        const std::string where = name + ":" + std::to_string(line_no) + ": ";
        const auto f = split_fields(lines[i]);
        if (f.size() != 5) throw DataError(where + "expected 5 fields, found " + std::to_string(f.size()));
        SampleRecord r;
        r.path = f[0];
        if (r.path.empty()) throw DataError(where + "empty path");
        if (!dataset_detail::parse_int(f[1], r.subject_id) || r.subject_id < 1)
            throw DataError(where + "invalid subject_id '" + f[1] + "'");
        if (!dataset_detail::parse_int(f[2], r.sample_idx) || r.sample_idx < 1 || r.sample_idx > kMaxSamplesPerSubject)
            throw DataError(where + "invalid sample_idx '" + f[2] + "'");
        try {
            r.modality = parse_modality(f[3]);
            r.split = parse_split(f[4]);
        } catch (const std::invalid_argument& e) {
            throw DataError(where + e.what());
        }
        auto [it, inserted] = seen.emplace(r.path, line_no);
        if (!inserted)
            throw DataError(name + ": duplicate path '" + r.path + "' on lines " + std::to_string(it->second) + " and " +
                            std::to_string(line_no));
        m.records.push_back(std::move(r));
    }
    m.refresh_class_count();
    return m;
}

inline void write_manifest(const Manifest& m, const std::filesystem::path& path) {
    validate_manifest(m);
    write_text_atomic(path, manifest_to_csv(m));
    nlohmann::ordered_json meta{{"source_root", dataset_detail::relative_root(m.source_root, path)}, {"seed", m.seed}};
    write_text_atomic(dataset_detail::meta_path(path), meta.dump(2) + "\n");
}

/// Reads a manifest. Without a metadata sidecar, source_root defaults to
/// the manifest's directory and seed to 0.
inline Manifest read_manifest(const std::filesystem::path& path) {
    Manifest m = manifest_from_csv(read_text_file(path), path.string());
    const auto meta = dataset_detail::meta_path(path);
    if (std::filesystem::exists(meta)) {
        try {
            const auto j = nlohmann::json::parse(read_text_file(meta));
            for (const auto& [key, value] : j.items())
                if (key != "source_root" && key != "seed") throw DataError(meta.string() + ": unknown key '" + key + "'");
            const std::filesystem::path root = j.at("source_root").get<std::string>();
            m.source_root = root.is_absolute() ? root.string() : (path.parent_path() / root).lexically_normal().string();
            m.seed = j.at("seed").get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError(meta.string() + ": " + e.what());
        }
    } else {
        m.source_root = path.parent_path().string();
    }
    return m;
}

inline std::filesystem::path resolve(const Manifest& m, const SampleRecord& r) {
    return std::filesystem::path(m.source_root) / r.path;
}

} // namespace touchless
