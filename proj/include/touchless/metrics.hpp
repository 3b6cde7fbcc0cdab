#pragma once

// Closed-set classification metrics over trainer prediction files, the
// without/with preprocessing comparison report, and training-curve export.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "touchless/fileio.hpp"
#include "touchless/image.hpp"

namespace touchless {

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr double kProbabilitySumTolerance = 1e-6;

struct PredictionRecord {
    std::string path;
    int true_label = 0;
    std::vector<double> probs;
};

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    int classes = 0;
    std::vector<std::uint64_t> counts;

    explicit ConfusionMatrix(int k = 0) : classes(k), counts(static_cast<std::size_t>(k) * k, 0) {}
    std::uint64_t& at(int t, int p) { return counts[static_cast<std::size_t>(t) * classes + p]; }
    std::uint64_t at(int t, int p) const { return counts[static_cast<std::size_t>(t) * classes + p]; }
    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
    std::uint64_t trace() const {
        std::uint64_t s = 0;
        for (int i = 0; i < classes; ++i) s += at(i, i);
        return s;
    }
};

struct EvalSummary {
    std::string model;
    double accuracy = 0.0;
    double loss = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    bool operator==(const EvalSummary&) const = default;
};

/// Throws DataError naming the record when it violates the K-class contract.
inline void validate_prediction(const PredictionRecord& r, int k) {
    const std::string who = "prediction '" + r.path + "'";
    if (static_cast<int>(r.probs.size()) != k)
        throw DataError(who + ": expected " + std::to_string(k) + " probabilities, found " +
                        std::to_string(r.probs.size()));
    if (r.true_label < 0 || r.true_label >= k)
        throw DataError(who + ": true_label " + std::to_string(r.true_label) + " outside [0," + std::to_string(k) + ")");
    double sum = 0.0;
    for (double p : r.probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw DataError(who + ": probability outside [0,1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kProbabilitySumTolerance)
        throw DataError(who + ": probabilities sum to " + std::to_string(sum));
}

/// First index of the maximum probability.
inline int argmax(std::span<const double> probs) {
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

inline ConfusionMatrix confusion(std::span<const PredictionRecord> preds, int k) {
    if (k < 1) throw std::invalid_argument("confusion: class count must be >= 1");
    ConfusionMatrix cm(k);
    for (const auto& r : preds) {
        validate_prediction(r, k);
        ++cm.at(r.true_label, argmax(r.probs));
    }
    return cm;
}

/// Accuracy, mean cross-entropy and macro precision/recall/F1. A class
/// with no predictions (or no true samples) contributes 0 to the macro
/// precision (or recall) mean but still counts in the denominator.
inline EvalSummary summarize(std::span<const PredictionRecord> preds, int k, std::string model = {}) {
    if (preds.empty()) throw DataError("summarize: no predictions");
    const ConfusionMatrix cm = confusion(preds, k);

    double loss = 0.0;
    for (const auto& r : preds) loss -= std::log(std::max(r.probs[r.true_label], kProbabilityFloor));

    std::vector<std::uint64_t> row(k, 0), col(k, 0);
    for (int t = 0; t < k; ++t)
        for (int p = 0; p < k; ++p) {
            row[t] += cm.at(t, p);
            col[p] += cm.at(t, p);
        }
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    for (int c = 0; c < k; ++c) {
        const double tp = static_cast<double>(cm.at(c, c));
        const double pc = col[c] ? tp / static_cast<double>(col[c]) : 0.0;
        const double rc = row[c] ? tp / static_cast<double>(row[c]) : 0.0;
        precision += pc;
        recall += rc;
        f1 += (pc + rc) > 0.0 ? 2.0 * pc * rc / (pc + rc) : 0.0;
    }
    EvalSummary s;
    s.model = std::move(model);
    s.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
    s.loss = loss / static_cast<double>(preds.size());
    s.precision = precision / k;
    s.recall = recall / k;
    s.f1 = f1 / k;
    return s;
}

// ---------------------------------------------------------------------------
// Predictions CSV: path,true_label,p0,...,p{K-1}

namespace metrics_detail {

inline std::string format_double(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

inline bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

inline bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

/// Fixed two-decimal rendering; "-0.00" is printed as "0.00".
inline std::string fixed2(double v) {
    std::string s = format_double("%.2f", v);
    return s == "-0.00" ? "0.00" : s;
}

/// Signed two-decimal rendering; zero is always "+0.00".
inline std::string signed2(double v) {
    std::string s = format_double("%+.2f", v);
    return s == "-0.00" ? "+0.00" : s;
}

} // namespace metrics_detail

inline std::string predictions_header(int k) {
    std::string h = "path,true_label";
    for (int i = 0; i < k; ++i) h += ",p" + std::to_string(i);
    return h;
}

inline std::string predictions_to_csv(std::span<const PredictionRecord> preds, int k) {
    std::string out = predictions_header(k) + "\n";
    for (const auto& r : preds) {
        validate_prediction(r, k);
        out += r.path + "," + std::to_string(r.true_label);
        for (double p : r.probs) out += "," + metrics_detail::format_double("%.17g", p);
        out += "\n";
    }
    return out;
}

/// Parses a predictions file. K is taken from the header; if expected_k is
/// given the header must agree with it.
inline std::vector<PredictionRecord> predictions_from_csv(std::string_view text, int expected_k = 0,
                                                          const std::string& name = "<predictions>") {
    const auto lines = split_lines(text);
    if (lines.empty()) throw DataError(name + ": empty predictions file");
    const auto header = split_fields(lines[0]);
    const int k = static_cast<int>(header.size()) - 2;
    if (k < 1 || lines[0] != predictions_header(k))
        throw DataError(name + ":1: expected header 'path,true_label,p0,...,p{K-1}'");
    if (expected_k > 0 && k != expected_k)
        throw DataError(name + ":1: header declares " + std::to_string(k) + " classes, expected " +
                        std::to_string(expected_k));
    std::vector<PredictionRecord> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string where = name + ":" + std::to_string(i + 1) + ": ";
        const auto f = split_fields(lines[i]);
        if (static_cast<int>(f.size()) != k + 2)
            throw DataError(where + "expected " + std::to_string(k + 2) + " fields, found " + std::to_string(f.size()));
        PredictionRecord r;
        r.path = f[0];
        if (!metrics_detail::parse_int(f[1], r.true_label)) throw DataError(where + "invalid true_label '" + f[1] + "'");
        r.probs.resize(k);
        for (int c = 0; c < k; ++c)
            if (!metrics_detail::parse_double(f[c + 2], r.probs[c]))
                throw DataError(where + "invalid probability '" + f[c + 2] + "'");
        try {
            validate_prediction(r, k);
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path, int expected_k = 0) {
    return predictions_from_csv(read_text_file(path), expected_k, path.string());
}

// ---------------------------------------------------------------------------
// Summary JSON: {"model", "accuracy", "loss", "precision", "recall", "f1"}

inline void validate_summary(const EvalSummary& s, const std::string& context) {
    auto unit = [&](double v, const char* field) {
        if (!(v >= 0.0 && v <= 1.0)) throw DataError(context + ": " + field + " must lie in [0,1]");
    };
    unit(s.accuracy, "accuracy");
    unit(s.precision, "precision");
    unit(s.recall, "recall");
    unit(s.f1, "f1");
    if (!(s.loss >= 0.0) || !std::isfinite(s.loss)) throw DataError(context + ": loss must be finite and >= 0");
}

inline nlohmann::ordered_json summary_to_json(const EvalSummary& s) {
    return {{"model", s.model},       {"accuracy", s.accuracy}, {"loss", s.loss},
            {"precision", s.precision}, {"recall", s.recall},   {"f1", s.f1}};
}

inline EvalSummary summary_from_json(const nlohmann::json& j, const std::string& context = "<summary>") {
    static const std::set<std::string> keys{"model", "accuracy", "loss", "precision", "recall", "f1"};
    if (!j.is_object()) throw DataError(context + ": expected a JSON object");
    for (const auto& [key, value] : j.items())
        if (!keys.count(key)) throw DataError(context + ": unknown key '" + key + "'");
    EvalSummary s;
    try {
        s.model = j.at("model").get<std::string>();
        s.accuracy = j.at("accuracy").get<double>();
        s.loss = j.at("loss").get<double>();
        s.precision = j.at("precision").get<double>();
        s.recall = j.at("recall").get<double>();
        s.f1 = j.at("f1").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(context + ": " + e.what());
    }
    validate_summary(s, context);
    return s;
}

inline void write_summary(const EvalSummary& s, const std::filesystem::path& path) {
    write_text_atomic(path, summary_to_json(s).dump(2) + "\n");
}

inline EvalSummary read_summary(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return summary_from_json(j, path.string());
}

inline nlohmann::ordered_json confusion_to_json(const ConfusionMatrix& cm) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int t = 0; t < cm.classes; ++t) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (int p = 0; p < cm.classes; ++p) row.push_back(cm.at(t, p));
        rows.push_back(std::move(row));
    }
    return {{"classes", cm.classes}, {"counts", std::move(rows)}};
}

// ---------------------------------------------------------------------------
// Comparison report

struct ComparisonRow {
    std::string model;
    EvalSummary without;
    EvalSummary with;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;
};

/// Pairs summaries by model name, in the order of the "without" list.
inline ComparisonReport compare_reports(std::span<const EvalSummary> without, std::span<const EvalSummary> with) {
    if (without.empty() || with.empty()) throw DataError("compare_reports: both summary lists must be non-empty");
    auto index = [](std::span<const EvalSummary> list, const char* side) {
        std::map<std::string, const EvalSummary*> m;
        for (const auto& s : list)
            if (!m.emplace(s.model, &s).second)
                throw DataError(std::string("compare_reports: model '") + s.model + "' appears twice in the " + side +
                                " list");
        return m;
    };
    const auto a = index(without, "without");
    const auto b = index(with, "with");
    std::string only_a, only_b;
    for (const auto& [name, s] : a)
        if (!b.count(name)) only_a += (only_a.empty() ? "" : ", ") + name;
    for (const auto& [name, s] : b)
        if (!a.count(name)) only_b += (only_b.empty() ? "" : ", ") + name;
    if (!only_a.empty() || !only_b.empty())
        throw DataError("compare_reports: model sets differ; only without: [" + only_a + "]; only with: [" + only_b +
                        "]");
    ComparisonReport r;
    for (const auto& s : without) r.rows.push_back({s.model, s, *b.at(s.model)});
    return r;
}

/// "acc / loss / precision / recall / f1" at two decimals.
inline std::string format_metrics(const EvalSummary& s) {
    using metrics_detail::fixed2;
    return fixed2(s.accuracy) + " / " + fixed2(s.loss) + " / " + fixed2(s.precision) + " / " + fixed2(s.recall) +
           " / " + fixed2(s.f1);
}

/// Deltas are computed on the two-decimal values as printed, so each delta
/// equals the difference of the figures shown beside it.
inline std::string format_deltas(const EvalSummary& a, const EvalSummary& b) {
    auto d = [](double x, double y) {
        return metrics_detail::signed2((std::round(y * 100.0) - std::round(x * 100.0)) / 100.0);
    };
    return d(a.accuracy, b.accuracy) + " / " + d(a.loss, b.loss) + " / " + d(a.precision, b.precision) + " / " +
           d(a.recall, b.recall) + " / " + d(a.f1, b.f1);
}

inline std::string render_report_text(const ComparisonReport& r) {
    const std::string cols = "(acc / loss / prec / rec / f1)";
    std::vector<std::array<std::string, 4>> table;
    table.push_back({"Model", "Without preprocessing " + cols, "With preprocessing " + cols, "Delta"});
    for (const auto& row : r.rows)
        table.push_back({row.model, format_metrics(row.without), format_metrics(row.with),
                         format_deltas(row.without, row.with)});
    std::array<std::size_t, 4> width{};
    for (const auto& line : table)
        for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], line[c].size());
    std::string out;
    auto emit = [&](const std::array<std::string, 4>& line) {
        std::string s;
        for (std::size_t c = 0; c < 4; ++c) {
            if (c) s += " | ";
            s += line[c];
            if (c + 1 < 4) s.append(width[c] - line[c].size(), ' ');
        }
        out += s + "\n";
    };
    emit(table[0]);
    std::string rule;
    for (std::size_t c = 0; c < 4; ++c) {
        if (c) rule += "-+-";
        rule.append(width[c], '-');
    }
    out += rule + "\n";
    for (std::size_t i = 1; i < table.size(); ++i) emit(table[i]);
    return out;
}

inline nlohmann::ordered_json render_report_json(const ComparisonReport& r) {
    auto metrics = [](const EvalSummary& s) {
        return nlohmann::ordered_json{{"accuracy", s.accuracy}, {"loss", s.loss},    {"precision", s.precision},
                                      {"recall", s.recall},     {"f1", s.f1}};
    };
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : r.rows) {
        const auto& a = row.without;
        const auto& b = row.with;
        rows.push_back({{"model", row.model},
                        {"without", metrics(a)},
                        {"with", metrics(b)},
                        {"delta",
                         {{"accuracy", b.accuracy - a.accuracy},
                          {"loss", b.loss - a.loss},
                          {"precision", b.precision - a.precision},
                          {"recall", b.recall - a.recall},
                          {"f1", b.f1 - a.f1}}}});
    }
    return {{"rows", std::move(rows)}};
}

// ---------------------------------------------------------------------------
// Training history and curve export

struct EpochMetrics {
    double train_acc = 0.0;
    double train_loss = 0.0;
    double val_acc = 0.0;
    double val_loss = 0.0;

    bool operator==(const EpochMetrics&) const = default;
};

struct HistoryCurve {
    std::string model;
    std::vector<EpochMetrics> epochs;
};

/// Reads `{model, epochs:[{train_acc, train_loss, val_acc, val_loss}]}`.
/// Other top-level keys (for example a config echo) are ignored.
inline HistoryCurve history_from_json(const nlohmann::json& j, const std::string& context = "<history>") {
    HistoryCurve h;
    try {
        if (!j.is_object()) throw DataError(context + ": expected a JSON object");
        h.model = j.at("model").get<std::string>();
        for (const auto& e : j.at("epochs")) {
            h.epochs.push_back({e.at("train_acc").get<double>(), e.at("train_loss").get<double>(),
                                e.at("val_acc").get<double>(), e.at("val_loss").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(context + ": " + e.what());
    }
    if (h.epochs.empty()) throw DataError(context + ": history has no epochs");
    return h;
}

inline HistoryCurve read_history(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return history_from_json(j, path.string());
}

inline constexpr std::string_view kCurvesHeader = "epoch,train_acc,train_loss,val_acc,val_loss";

/// One row per epoch (1-based), values at 6 significant digits.
inline std::string export_curves(const HistoryCurve& h) {
    if (h.epochs.empty()) throw std::invalid_argument("export_curves: history has no epochs");
    using metrics_detail::format_double;
    std::string out(kCurvesHeader);
    out += "\n";
    for (std::size_t i = 0; i < h.epochs.size(); ++i) {
        const auto& e = h.epochs[i];
        out += std::to_string(i + 1) + "," + format_double("%.6g", e.train_acc) + "," +
               format_double("%.6g", e.train_loss) + "," + format_double("%.6g", e.val_acc) + "," +
               format_double("%.6g", e.val_loss) + "\n";
    }
    return out;
}

inline HistoryCurve parse_curves(std::string_view text, const std::string& name = "<curves>") {
    const auto lines = split_lines(text);
    if (lines.empty() || lines[0] != kCurvesHeader)
        throw DataError(name + ":1: expected header '" + std::string(kCurvesHeader) + "'");
    HistoryCurve h;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string where = name + ":" + std::to_string(i + 1) + ": ";
        const auto f = split_fields(lines[i]);
        int epoch = 0;
        if (f.size() != 5 || !metrics_detail::parse_int(f[0], epoch) || epoch != static_cast<int>(i))
            throw DataError(where + "malformed row");
        EpochMetrics e;
        if (!metrics_detail::parse_double(f[1], e.train_acc) || !metrics_detail::parse_double(f[2], e.train_loss) ||
            !metrics_detail::parse_double(f[3], e.val_acc) || !metrics_detail::parse_double(f[4], e.val_loss))
            throw DataError(where + "invalid number");
        h.epochs.push_back(e);
    }
    if (h.epochs.empty()) throw DataError(name + ": no epoch rows");
    return h;
}

} // namespace touchless
