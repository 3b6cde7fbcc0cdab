#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "touchless/metrics.hpp"

using namespace touchless;

namespace {

PredictionRecord one_hot(int k, int truth, int predicted, double mass = 1.0) {
    PredictionRecord r{"p" + std::to_string(truth) + "_" + std::to_string(predicted), truth, std::vector<double>(k, 0.0)};
    if (mass < 1.0)
        for (auto& p : r.probs) p = (1.0 - mass) / (k - 1);
    r.probs[predicted] = mass;
    return r;
}

EvalSummary row(const std::string& model, double a, double l, double p, double r, double f) {
    return {model, a, l, p, r, f};
}

} // namespace

TEST(Confusion, Examples) {
    std::vector<PredictionRecord> all;
    for (int c = 0; c < 3; ++c) all.push_back(one_hot(3, c, c));
    const ConfusionMatrix cm = confusion(all, 3);
    for (int t = 0; t < 3; ++t)
        for (int p = 0; p < 3; ++p) EXPECT_EQ(cm.at(t, p), t == p ? 1u : 0u);
    const std::vector<PredictionRecord> one{one_hot(3, 0, 2)};
    EXPECT_EQ(confusion(one, 3).at(0, 2), 1u);
}

TEST(Confusion, ArgmaxTiesGoToLowestIndex) {
    const std::vector<PredictionRecord> tie{{"t", 2, {0.1, 0.45, 0.45}}};
    EXPECT_EQ(confusion(tie, 3).at(2, 1), 1u);
}

TEST(Confusion, MatchesBruteForceTally) {
    std::mt19937_64 rng(5);
    std::vector<PredictionRecord> preds;
    for (int i = 0; i < 100; ++i) preds.push_back(fixture::random_prediction(7, rng));
    const ConfusionMatrix cm = confusion(preds, 7);
    EXPECT_EQ(cm.total(), 100u);
    for (int t = 0; t < 7; ++t)
        for (int p = 0; p < 7; ++p) {
            std::uint64_t n = 0;
            for (const auto& r : preds) {
                const int arg = static_cast<int>(std::max_element(r.probs.begin(), r.probs.end()) - r.probs.begin());
                n += (r.true_label == t && arg == p);
            }
            EXPECT_EQ(cm.at(t, p), n);
        }
}

TEST(Confusion, ValidationNamesTheRecord) {
    const std::vector<PredictionRecord> short_probs{{"bad.png", 0, {0.5, 0.5}}};
    try {
        confusion(short_probs, 3);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.png"), std::string::npos);
    }
    EXPECT_THROW(confusion(std::vector<PredictionRecord>{{"x", 3, {0.5, 0.25, 0.25}}}, 3), DataError);
    EXPECT_THROW(confusion(std::vector<PredictionRecord>{{"x", 0, {0.5, 0.25, 0.2}}}, 3), DataError);
    EXPECT_THROW(confusion(std::vector<PredictionRecord>{{"x", 0, {1.5, -0.25, -0.25}}}, 3), DataError);
}

TEST(Summarize, PerfectPredictions) {
    std::vector<PredictionRecord> all;
    for (int c = 0; c < 3; ++c) all.push_back(one_hot(3, c, c));
    const EvalSummary s = summarize(all, 3);
    EXPECT_EQ(s.accuracy, 1.0);
    EXPECT_EQ(s.loss, 0.0);
    EXPECT_EQ(s.precision, 1.0);
    EXPECT_EQ(s.recall, 1.0);
    EXPECT_EQ(s.f1, 1.0);
}

TEST(Summarize, UniformProbabilitiesGiveLogK) {
    std::mt19937_64 rng(7);
    std::vector<PredictionRecord> preds;
    for (int i = 0; i < 50; ++i)
        preds.push_back({"u", static_cast<int>(rng() % 200), std::vector<double>(200, 1.0 / 200)});
    EXPECT_NEAR(summarize(preds, 200).loss, std::log(200.0), 1e-12);
}

TEST(Summarize, EmptyInputIsAnError) { EXPECT_THROW(summarize(std::vector<PredictionRecord>{}, 3), DataError); }

TEST(Summarize, ZeroProbabilityIsFloored) {
    const std::vector<PredictionRecord> wrong{one_hot(2, 0, 1)};
    EXPECT_NEAR(summarize(wrong, 2).loss, -std::log(1e-12), 1e-9);
    EXPECT_LE(summarize(wrong, 2).loss, 27.64);
}

TEST(Summarize, AbsentClassesCountAsZero) {
    // Class 2 never occurs and is never predicted: its precision and recall
    // are undefined, counted as 0.
    const std::vector<PredictionRecord> p{one_hot(3, 0, 0), one_hot(3, 1, 1)};
    const EvalSummary s = summarize(p, 3);
    EXPECT_NEAR(s.precision, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(s.recall, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(s.f1, 2.0 / 3.0, 1e-15);
}

TEST(Summarize, MatchesBruteForceOracle) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = 2 + static_cast<int>(rng() % 12);
        std::vector<PredictionRecord> preds;
        for (int i = 0; i < 150; ++i) preds.push_back(fixture::random_prediction(k, rng));
        const EvalSummary s = summarize(preds, k);
        const oracle::Metrics o = oracle::summarize(preds, k);
        EXPECT_NEAR(s.accuracy, o.accuracy, 1e-9);
        EXPECT_NEAR(s.loss, o.loss, 1e-9);
        EXPECT_NEAR(s.precision, o.precision, 1e-9);
        EXPECT_NEAR(s.recall, o.recall, 1e-9);
        EXPECT_NEAR(s.f1, o.f1, 1e-9);
    }
}

TEST(Summarize, MacroF1InvariantUnderRelabeling) {
    std::mt19937_64 rng(13);
    const int k = 9;
    std::vector<PredictionRecord> preds;
    for (int i = 0; i < 200; ++i) preds.push_back(fixture::random_prediction(k, rng));
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto relabeled = preds;
    for (auto& r : relabeled) {
        std::vector<double> p(k);
        for (int c = 0; c < k; ++c) p[perm[c]] = r.probs[c];
        r.probs = p;
        r.true_label = perm[r.true_label];
    }
    EXPECT_NEAR(summarize(preds, k).f1, summarize(relabeled, k).f1, 1e-12);
}

TEST(Summarize, LossDecreasesWhenTrueClassMassGrows) {
    std::mt19937_64 rng(17);
    std::vector<PredictionRecord> preds;
    for (int i = 0; i < 30; ++i) preds.push_back(fixture::random_prediction(5, rng));
    const double before = summarize(preds, 5).loss;
    auto& r = preds[4];
    // Move half of the largest wrong-class mass onto the true class.
    int donor = r.true_label == 0 ? 1 : 0;
    for (int c = 0; c < 5; ++c)
        if (c != r.true_label && r.probs[c] > r.probs[donor]) donor = c;
    const double moved = r.probs[donor] / 2;
    r.probs[donor] -= moved;
    r.probs[r.true_label] += moved;
    EXPECT_LT(summarize(preds, 5).loss, before);
}

TEST(Summarize, MacroF1IsBoundedByMeanOfPrecisionAndRecall) {
    // Per class F1 <= (P + R) / 2, hence macro F1 <= (macro P + macro R) / 2.
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 2 + static_cast<int>(rng() % 20);
        std::vector<PredictionRecord> preds;
        for (int i = 0; i < 60; ++i) preds.push_back(fixture::random_prediction(k, rng, 0.9));
        const EvalSummary s = summarize(preds, k);
        EXPECT_LE(s.f1, (s.precision + s.recall) / 2 + 1e-12);
    }
}

TEST(PredictionsCsv, RoundTripIsExact) {
    std::mt19937_64 rng(23);
    std::vector<PredictionRecord> preds;
    for (int i = 0; i < 40; ++i) preds.push_back(fixture::random_prediction(4, rng));
    const std::string text = predictions_to_csv(preds, 4);
    EXPECT_EQ(text.substr(0, text.find('\n')), "path,true_label,p0,p1,p2,p3");
    const auto back = predictions_from_csv(text, 4);
    ASSERT_EQ(back.size(), preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        EXPECT_EQ(back[i].path, preds[i].path);
        EXPECT_EQ(back[i].true_label, preds[i].true_label);
        EXPECT_EQ(back[i].probs, preds[i].probs);
    }
}

TEST(PredictionsCsv, Errors) {
    auto msg = [](const std::string& text, int k) {
        try {
            predictions_from_csv(text, k, "p.csv");
        } catch (const DataError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(msg("path,label,p0\n", 0).find("header"), std::string::npos);
    EXPECT_NE(msg("path,true_label,p0,p1\na,0,0.5,0.5\n", 3).find("expected 3"), std::string::npos);
    EXPECT_NE(msg("path,true_label,p0,p1\na,0,0.5,0.5\nb,1,0.7,0.7\n", 2).find("p.csv:3"), std::string::npos);
    EXPECT_NE(msg("path,true_label,p0,p1\na,0,0.5\n", 2).find("p.csv:2"), std::string::npos);
    EXPECT_NE(msg("path,true_label,p0,p1\na,zero,0.5,0.5\n", 2).find("true_label"), std::string::npos);
}

TEST(SummaryJson, RoundTripAndValidation) {
    const EvalSummary s = row("VGG-16", 0.98, 0.2, 0.99, 0.93, 0.98);
    EXPECT_EQ(summary_from_json(nlohmann::json::parse(summary_to_json(s).dump())), s);
    auto j = nlohmann::json::parse(summary_to_json(s).dump());
    j["accuracy"] = 1.5;
    EXPECT_THROW(summary_from_json(j), DataError);
    j = nlohmann::json::parse(summary_to_json(s).dump());
    j["epochs"] = 3;
    EXPECT_THROW(summary_from_json(j), DataError);
    j.erase("epochs");
    j.erase("f1");
    EXPECT_THROW(summary_from_json(j), DataError);
}

TEST(Report, IdenticalListsHaveZeroDeltas) {
    const std::vector<EvalSummary> a{row("A", 0.5, 1.0, 0.4, 0.3, 0.35), row("B", 0.1, 2.0, 0.1, 0.1, 0.1)};
    const std::string text = render_report_text(compare_reports(a, a));
    EXPECT_NE(text.find("+0.00 / +0.00 / +0.00 / +0.00 / +0.00"), std::string::npos);
    EXPECT_EQ(text.find("-0.00"), std::string::npos);
}

TEST(Report, VggRowsFromBothTables) {
    const std::vector<EvalSummary> without{row("VGG-16", 0.93, 33.86, 0.95, 0.93, 0.94)};
    const std::vector<EvalSummary> with{row("VGG-16", 0.98, 0.20, 0.99, 0.93, 0.98)};
    const ComparisonReport r = compare_reports(without, with);
    EXPECT_EQ(format_deltas(r.rows[0].without, r.rows[0].with), "+0.05 / -33.66 / +0.04 / +0.00 / +0.04");
    const std::string text = render_report_text(r);
    EXPECT_NE(text.find("VGG-16 | 0.93 / 33.86 / 0.95 / 0.93 / 0.94"), std::string::npos) << text;
    EXPECT_NE(text.find("0.98 / 0.20 / 0.99 / 0.93 / 0.98"), std::string::npos) << text;
    const auto j = render_report_json(r);
    EXPECT_NEAR(j["rows"][0]["delta"]["accuracy"].get<double>(), 0.05, 1e-12);
}

TEST(Report, PairsByNameInWithoutOrder) {
    const std::vector<EvalSummary> a{row("X", 0.1, 1, 0.1, 0.1, 0.1), row("Y", 0.2, 1, 0.2, 0.2, 0.2)};
    const std::vector<EvalSummary> b{row("Y", 0.3, 1, 0.3, 0.3, 0.3), row("X", 0.4, 1, 0.4, 0.4, 0.4)};
    const auto r = compare_reports(a, b);
    EXPECT_EQ(r.rows[0].model, "X");
    EXPECT_EQ(r.rows[0].with.accuracy, 0.4);
}

TEST(Report, MismatchedOrEmptyListsAreErrors) {
    const std::vector<EvalSummary> a{row("X", 0.1, 1, 0.1, 0.1, 0.1), row("Y", 0.2, 1, 0.2, 0.2, 0.2)};
    const std::vector<EvalSummary> b{row("X", 0.1, 1, 0.1, 0.1, 0.1), row("Z", 0.2, 1, 0.2, 0.2, 0.2)};
    try {
        compare_reports(a, b);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        const std::string m = e.what();
        EXPECT_NE(m.find("only without: [Y]"), std::string::npos) << m;
        EXPECT_NE(m.find("only with: [Z]"), std::string::npos) << m;
    }
    EXPECT_THROW(compare_reports({}, {}), DataError);
    EXPECT_THROW(compare_reports(std::vector<EvalSummary>{a[0], a[0]}, a), DataError);
}

TEST(Curves, ExportAndParse) {
    HistoryCurve h{"vgg16", {}};
    for (int e = 0; e < 100; ++e) h.epochs.push_back({0.01 * e, 2.0 - 0.015 * e, 0.009 * e, 2.1 - 0.014 * e});
    const std::string csv = export_curves(h);
    EXPECT_EQ(split_lines(csv).size(), 101u);
    EXPECT_EQ(split_lines(csv)[0], "epoch,train_acc,train_loss,val_acc,val_loss");
    const HistoryCurve back = parse_curves(csv);
    ASSERT_EQ(back.epochs.size(), 100u);
    for (std::size_t i = 0; i < 100; ++i) {
        EXPECT_NEAR(back.epochs[i].train_acc, h.epochs[i].train_acc, 1e-6 * std::abs(h.epochs[i].train_acc) + 1e-15);
        EXPECT_NEAR(back.epochs[i].val_loss, h.epochs[i].val_loss, 1e-6 * std::abs(h.epochs[i].val_loss));
    }
    EXPECT_EQ(export_curves(back), csv);
}

TEST(Curves, SixDigitValuesRoundTripExactly) {
    const HistoryCurve h{"m", {{0.912345, 0.201234, 0.881, 0.35}}};
    const HistoryCurve back = parse_curves(export_curves(h));
    ASSERT_EQ(back.epochs.size(), 1u);
    EXPECT_EQ(back.epochs[0], h.epochs[0]);
}

TEST(Curves, HistoryJsonIgnoresExtraTopLevelKeys) {
    const auto j = nlohmann::json::parse(
        R"({"model":"vgg16","config":{"epochs":1},"epochs":[{"train_acc":0.5,"train_loss":1,"val_acc":0.4,"val_loss":1.2}]})");
    const HistoryCurve h = history_from_json(j);
    EXPECT_EQ(h.model, "vgg16");
    ASSERT_EQ(h.epochs.size(), 1u);
    EXPECT_EQ(h.epochs[0].val_loss, 1.2);
    EXPECT_THROW(history_from_json(nlohmann::json::parse(R"({"model":"m","epochs":[]})")), DataError);
    EXPECT_THROW(history_from_json(nlohmann::json::parse(R"({"model":"m"})")), DataError);
}
