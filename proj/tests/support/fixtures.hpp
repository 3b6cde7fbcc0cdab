#pragma once

// Synthetic inputs shared by the unit, CLI and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "touchless/image.hpp"
#include "touchless/image_io.hpp"
#include "touchless/metrics.hpp"

namespace fixture {

using touchless::Image;

inline Image random_image(int w, int h, int channels, std::mt19937_64& rng) {
    Image img(w, h, channels);
    for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng() & 0xFF);
    return img;
}

/// Values in {0, 255}; `density` is the probability of 255.
inline Image random_binary(int w, int h, double density, std::mt19937_64& rng) {
    std::bernoulli_distribution on(density);
    Image img(w, h, 1);
    for (auto& v : img.data()) v = on(rng) ? 255 : 0;
    return img;
}

struct Blob {
    double x, y, sx, sy, amplitude;
};

/// Background plus anisotropic Gaussian blobs, saturated to 8 bits.
inline Image blobs(int w, int h, double background, const std::vector<Blob>& list) {
    Image img(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double v = background;
            for (const auto& b : list) {
                const double dx = (x - b.x) / b.sx, dy = (y - b.y) / b.sy;
                v += b.amplitude * std::exp(-0.5 * (dx * dx + dy * dy));
            }
            img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
        }
    return img;
}

/// The three-blob scene used by the feature tests.
inline Image blob_scene(int size = 129, int offset = 0) {
    const double c = (size - 1) / 2.0 + offset;
    return blobs(size, size, 30.0,
                 {{c, c, 6, 3, 180}, {c - 24, c - 14, 2.5, 2.5, 120}, {c + 24, c + 16, 3, 3, -20}});
}

/// Finger-like scene: an elliptical pad of sinusoidal ridges on a dark
/// background. Orientation and frequency vary with `subject`, phase with
/// `sample`, so different inputs never coincide.
inline Image ridge_image(int w, int h, int channels, int subject, int sample, double lo = 40.0, double hi = 220.0) {
    Image img(w, h, channels);
    const double angle = 0.37 * subject;
    const double freq = 0.35 + 0.01 * (subject % 17);
    const double cx = w / 2.0, cy = h / 2.0;
    const double ax = 0.38 * w, ay = 0.42 * h;
    std::mt19937_64 rng(static_cast<std::uint64_t>(subject) * 131 + sample);
    std::normal_distribution<double> noise(0.0, 4.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double ex = (x - cx) / ax, ey = (y - cy) / ay;
            double v = 25.0;
            if (ex * ex + ey * ey < 1.0) {
                const double phase = freq * (x * std::cos(angle) + y * std::sin(angle)) + 0.9 * sample;
                v = lo + (hi - lo) * (0.5 + 0.5 * std::sin(phase));
            }
            v += noise(rng);
            const auto g = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
            if (channels == 1) {
                img.at(x, y) = g;
            } else {
                img.at(x, y, 0) = g;
                img.at(x, y, 1) = static_cast<std::uint8_t>(g * 0.85);
                img.at(x, y, 2) = static_cast<std::uint8_t>(g * 0.7);
            }
        }
    return img;
}

/// Writes a one-directory-per-subject tree of RGB BMP ridge images named
/// `<root>/<subject:03>/<sample>.bmp`.
inline void write_tree(const std::filesystem::path& root, int subjects, int samples, int w = 170, int h = 260) {
    std::filesystem::create_directories(root);
    for (int s = 1; s <= subjects; ++s) {
        char dir[16];
        std::snprintf(dir, sizeof dir, "%03d", s);
        std::filesystem::create_directories(root / dir);
        for (int k = 1; k <= samples; ++k)
            touchless::write_image(ridge_image(w, h, 3, s, k), root / dir / (std::to_string(k) + ".bmp"));
    }
}

/// Random valid prediction over k classes. With probability `hit` the
/// true class receives the largest mass.
inline touchless::PredictionRecord random_prediction(int k, std::mt19937_64& rng, double hit = 0.6) {
    touchless::PredictionRecord r;
    r.path = "img_" + std::to_string(rng() % 1000000) + ".png";
    r.true_label = static_cast<int>(rng() % k);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    r.probs.resize(k);
    double sum = 0.0;
    for (auto& p : r.probs) sum += (p = u(rng));
    if (u(rng) < hit) {
        r.probs[r.true_label] += sum;
        sum *= 2;
    }
    for (auto& p : r.probs) p /= sum;
    return r;
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("touchless-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

} // namespace fixture
