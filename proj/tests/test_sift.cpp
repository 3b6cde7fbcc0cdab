#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "support/fixtures.hpp"
#include "touchless/sift.hpp"

using namespace touchless;

namespace {

Image rotate90(const Image& img) {
    // (x, y) -> (h - 1 - y, x): clockwise quarter turn.
    Image out(img.height(), img.width(), img.channels());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) out.at(img.height() - 1 - y, x) = img.at(x, y);
    return out;
}

double norm(const Descriptor& d) { return std::sqrt(std::inner_product(d.begin(), d.end(), d.begin(), 0.0)); }

/// Nearest descriptor distance from `d` into `set`.
double nearest(const Descriptor& d, const std::vector<Feature>& set) {
    double best = 1e9;
    for (const auto& f : set) best = std::min(best, descriptor_distance(d, f.descriptor));
    return best;
}

} // namespace

TEST(ScaleSpace, LevelStructureAndSigmas) {
    const ScaleSpace ss = build_scale_space(fixture::blob_scene(), {});
    ASSERT_EQ(static_cast<int>(ss.octaves.size()), resolve_octave_count({}, 129, 129));
    EXPECT_EQ(ss.octaves.size(), 4u);  // floor(log2 129) - 3
    for (std::size_t o = 0; o < ss.octaves.size(); ++o) {
        const Octave& oct = ss.octaves[o];
        EXPECT_EQ(oct.gaussians.size(), 6u);
        EXPECT_EQ(oct.dogs.size(), 5u);
        for (int s = 0; s < 6; ++s) EXPECT_NEAR(oct.sigmas[s], 1.6 * std::pow(2.0, o + s / 3.0), 1e-12);
    }
}

TEST(ScaleSpace, ConstantImageHasZeroDog) {
    const ScaleSpace ss = build_scale_space(Image(40, 33, 1, 120), {});
    for (const auto& oct : ss.octaves)
        for (const auto& d : oct.dogs)
            for (double v : d.data()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(ScaleSpace, RejectsSmallImagesAndBadParams) {
    EXPECT_THROW(build_scale_space(Image(15, 40, 1), {}), std::invalid_argument);
    SiftParams p;
    p.contrast_threshold = 0.0;
    EXPECT_THROW(build_scale_space(Image(32, 32, 1), p), std::invalid_argument);
}

TEST(Detect, FlatAndRampImagesHaveNoKeypoints) {
    EXPECT_TRUE(detect_keypoints(build_scale_space(Image(64, 64, 1, 200), {})).empty());
    Image ramp(96, 80, 1);
    for (int y = 0; y < 80; ++y)
        for (int x = 0; x < 96; ++x) ramp.at(x, y) = static_cast<std::uint8_t>(2 * x + y / 2);
    EXPECT_TRUE(detect_keypoints(build_scale_space(ramp, {})).empty());
}

TEST(Detect, StepEdgeIsRejected) {
    Image step(96, 96, 1, 40);
    for (int y = 0; y < 96; ++y)
        for (int x = 48; x < 96; ++x) step.at(x, y) = 200;
    EXPECT_TRUE(detect_keypoints(build_scale_space(step, {})).empty());
}

TEST(Detect, IsotropicBlobIsFoundAtItsCentre) {
    const Image img = fixture::blobs(96, 96, 20, {{48, 48, 4, 4, 200}});
    const auto kps = detect_keypoints(build_scale_space(img, {}));
    ASSERT_FALSE(kps.empty());
    bool near_centre = false;
    for (const auto& k : kps) near_centre |= std::hypot(k.x - 48, k.y - 48) <= 2.0;
    EXPECT_TRUE(near_centre);
}

TEST(Detect, KeypointsLieInsideTheImage) {
    const Image img = fixture::ridge_image(170, 260, 1, 3, 1);
    const auto kps = detect_keypoints(build_scale_space(img, {}));
    EXPECT_FALSE(kps.empty());
    for (const auto& k : kps) {
        EXPECT_GE(k.x, 0.0);
        EXPECT_LT(k.x, 170.0);
        EXPECT_GE(k.y, 0.0);
        EXPECT_LT(k.y, 260.0);
        EXPECT_GT(k.scale, 0.0);
    }
}

TEST(Detect, Deterministic) {
    const Image img = fixture::blob_scene();
    const auto a = extract_features(img);
    const auto b = extract_features(img);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].keypoint.x, b[i].keypoint.x);
        EXPECT_EQ(a[i].descriptor, b[i].descriptor);
    }
}

TEST(Descriptors, UnitNormNonNegative) {
    const auto feats = extract_features(fixture::ridge_image(170, 260, 1, 5, 2));
    ASSERT_FALSE(feats.empty());
    for (const auto& f : feats) {
        EXPECT_NEAR(norm(f.descriptor), 1.0, 1e-6);
        for (double v : f.descriptor) EXPECT_GE(v, 0.0);
        EXPECT_GE(f.keypoint.orientation, 0.0);
        EXPECT_LT(f.keypoint.orientation, 2 * std::numbers::pi);
    }
}

TEST(Descriptors, ClipStageCapsComponentsBeforeRenormalizing) {
    Descriptor d{};
    d[0] = 10.0;
    d[1] = 1.0;
    d[2] = 1.0;
    // After the first normalization component 0 dominates; the clip stage
    // caps it at 0.2, then the final renormalization restores unit norm.
    Descriptor clipped = d;
    sift_detail::l2_normalize(clipped);
    for (auto& v : clipped) v = std::min(v, 0.2);
    EXPECT_LE(*std::max_element(clipped.begin(), clipped.end()), 0.2 + 1e-12);
    sift_detail::normalize_descriptor(d);
    EXPECT_NEAR(norm(d), 1.0, 1e-12);
    const double n = norm(clipped);
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(d[i], clipped[i] / n, 1e-12);
}

TEST(Descriptors, KeypointsNearBorderAreDropped) {
    const ScaleSpace ss = build_scale_space(fixture::blob_scene(), {});
    Keypoint k;
    k.x = 1.0;
    k.y = 1.0;
    k.scale = 8.0;
    k.octave = 0;
    k.layer = 1.0;
    const std::vector<Keypoint> kps{k};
    EXPECT_TRUE(compute_descriptors(ss, kps).empty());
}

TEST(Descriptors, QuarterTurnMatches) {
    const Image img = fixture::blob_scene();
    const auto a = extract_features(img);
    const auto b = extract_features(rotate90(img));
    ASSERT_FALSE(a.empty());
    ASSERT_FALSE(b.empty());
    for (const auto& f : a) EXPECT_LT(nearest(f.descriptor, b), 0.4);
}

TEST(Descriptors, TranslationShiftsMatchedKeypoints) {
    const auto a = extract_features(fixture::blob_scene(149, -5));
    const auto b = extract_features(fixture::blob_scene(149, 5));
    const auto m = match_descriptors(descriptors_of(a), descriptors_of(b));
    ASSERT_FALSE(m.empty());
    for (auto [i, j] : m) {
        EXPECT_NEAR(b[j].keypoint.x - a[i].keypoint.x, 10.0, 1.0);
        EXPECT_NEAR(b[j].keypoint.y - a[i].keypoint.y, 10.0, 1.0);
    }
}

TEST(Descriptors, DoubledImageDoublesScale) {
    const Image img = fixture::blob_scene();
    const auto a = extract_features(img);
    const auto b = extract_features(resize_bilinear(img, 2 * img.width(), 2 * img.height()));
    const auto m = match_descriptors(descriptors_of(a), descriptors_of(b));
    ASSERT_FALSE(m.empty());
    for (auto [i, j] : m) {
        const double ratio = b[j].keypoint.scale / a[i].keypoint.scale;
        EXPECT_GE(ratio, 1.5);
        EXPECT_LE(ratio, 2.5);
    }
}

TEST(Match, EmptyAndSelfMatching) {
    const auto feats = extract_features(fixture::ridge_image(170, 260, 1, 9, 3));
    const auto d = descriptors_of(feats);
    EXPECT_TRUE(match_descriptors(d, {}).empty());
    // Self-matching pairs each descriptor with itself whenever it is distinct
    // from every other one (zero nearest distance passes the ratio test).
    const auto m = match_descriptors(d, d);
    for (auto [i, j] : m) EXPECT_EQ(descriptor_distance(d[i], d[j]), 0.0);
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        bool unique = true;
        for (std::size_t j = 0; j < d.size(); ++j) unique &= (i == j) || descriptor_distance(d[i], d[j]) > 0.0;
        distinct += unique;
    }
    EXPECT_EQ(m.size(), distinct);
}

TEST(Match, AgreesWithBruteForceRatioTest) {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto random_set = [&](int n) {
        std::vector<Descriptor> s(n);
        for (auto& d : s) {
            for (auto& v : d) v = u(rng);
            sift_detail::normalize_descriptor(d);
        }
        return s;
    };
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_set(20), b = random_set(25);
        const auto got = match_descriptors(a, b, 0.9);
        std::vector<std::pair<std::size_t, std::size_t>> want;
        for (std::size_t i = 0; i < a.size(); ++i) {
            std::vector<std::pair<double, std::size_t>> dist;
            for (std::size_t j = 0; j < b.size(); ++j) dist.emplace_back(descriptor_distance(a[i], b[j]), j);
            std::sort(dist.begin(), dist.end());
            if (dist[0].first < 0.9 * dist[1].first) want.emplace_back(i, dist[0].second);
        }
        EXPECT_EQ(got, want);
    }
}

TEST(KeypointDump, FieldsAndOrder) {
    Keypoint k;
    k.x = 1.5;
    k.y = 2.5;
    k.scale = 3.0;
    k.orientation = 0.25;
    k.response = 0.1;
    const std::vector<Keypoint> v{k};
    EXPECT_EQ(keypoints_to_json(v).dump(),
              R"([{"x":1.5,"y":2.5,"scale":3.0,"orientation":0.25,"response":0.1}])");
}
