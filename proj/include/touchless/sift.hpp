#pragma once

// Scale-invariant keypoints: Gaussian / difference-of-Gaussian pyramid,
// 26-neighbour extrema with quadratic refinement, contrast and edge
// rejection, dominant orientations and 4x4x8 gradient-histogram
// descriptors. Intensities are processed on the unit scale [0,1].

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "touchless/image.hpp"
#include "touchless/imaging.hpp"

namespace touchless {

struct SiftParams {
    int octaves = 0;  ///< 0 selects floor(log2(min(w, h))) - 3
    int scales_per_octave = 3;
    double sigma0 = 1.6;
    double contrast_threshold = 0.03;
    double edge_ratio_threshold = 10.0;
    double input_blur = 0.5;  ///< blur assumed already present in the input
    bool upsample = false;    ///< prepend a 2x upsampled octave

    void validate() const {
        if (octaves < 0) throw std::invalid_argument("sift: octaves must be >= 0 (0 = automatic)");
        if (scales_per_octave < 1) throw std::invalid_argument("sift: scales_per_octave must be >= 1");
        if (!(sigma0 > 0.0)) throw std::invalid_argument("sift: sigma0 must be > 0");
        if (!(contrast_threshold > 0.0)) throw std::invalid_argument("sift: contrast_threshold must be > 0");
        if (!(edge_ratio_threshold > 0.0)) throw std::invalid_argument("sift: edge_ratio_threshold must be > 0");
        if (!(input_blur >= 0.0)) throw std::invalid_argument("sift: input_blur must be >= 0");
    }
};

struct Keypoint {
    double x = 0.0;            ///< base-image column, subpixel
    double y = 0.0;            ///< base-image row, subpixel
    double scale = 0.0;        ///< sigma in base-image pixels
    double orientation = 0.0;  ///< radians in [0, 2pi), image axes (y down)
    double response = 0.0;     ///< |DoG| at the refined extremum
    int octave = 0;            ///< pyramid octave index the point was found in
    double layer = 0.0;        ///< refined scale level within that octave
};

using Descriptor = std::array<double, 128>;

struct Feature {
    Keypoint keypoint;
    Descriptor descriptor;
};

using FloatPlane = Plane<double>;

struct Octave {
    int exponent = 0;                  ///< octave pixel = 2^exponent base pixels
    std::vector<FloatPlane> gaussians; ///< scales_per_octave + 3 levels
    std::vector<FloatPlane> dogs;      ///< scales_per_octave + 2 levels
    std::vector<double> sigmas;        ///< absolute sigma of each Gaussian level
};

struct ScaleSpace {
    SiftParams params;
    int width = 0;
    int height = 0;
    std::vector<Octave> octaves;
};

namespace sift_detail {

constexpr int kBorder = 5;
constexpr int kMaxRefineSteps = 5;
constexpr int kOrientationBins = 36;
constexpr double kOrientationPeakRatio = 0.8;
constexpr double kOrientationSigmaFactor = 1.5;
constexpr double kOrientationRadiusFactor = 3.0 * kOrientationSigmaFactor;
constexpr int kDescWidth = 4;
constexpr int kDescBins = 8;
constexpr double kDescBinWidthFactor = 3.0;
constexpr double kDescClip = 0.2;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline std::vector<double> gaussian_kernel(double sigma) {
    const int r = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> k(2 * static_cast<std::size_t>(r) + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        sum += k[i + r];
    }
    for (double& v : k) v /= sum;
    return k;
}

/// Separable Gaussian blur, replicate border.
inline FloatPlane blur(const FloatPlane& src, double sigma) {
    const auto k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    const int w = src.width();
    const int h = src.height();
    FloatPlane tmp(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * src.at(std::clamp(x + i, 0, w - 1), y);
            tmp.at(x, y) = acc;
        }
    }
    FloatPlane out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(x, std::clamp(y + i, 0, h - 1));
            out.at(x, y) = acc;
        }
    }
    return out;
}

inline FloatPlane downsample(const FloatPlane& src) {
    FloatPlane out((src.width() + 1) / 2, (src.height() + 1) / 2);
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) out.at(x, y) = src.at(2 * x, 2 * y);
    return out;
}

inline FloatPlane upsample(const FloatPlane& src) {
    const int w = src.width() * 2;
    const int h = src.height() * 2;
    FloatPlane out(w, h);
    for (int y = 0; y < h; ++y) {
        const double sy = std::clamp((y + 0.5) / 2.0 - 0.5, 0.0, src.height() - 1.0);
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, src.height() - 1);
        const double ty = sy - y0;
        for (int x = 0; x < w; ++x) {
            const double sx = std::clamp((x + 0.5) / 2.0 - 0.5, 0.0, src.width() - 1.0);
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, src.width() - 1);
            const double tx = sx - x0;
            out.at(x, y) = (1 - ty) * ((1 - tx) * src.at(x0, y0) + tx * src.at(x1, y0)) +
                           ty * ((1 - tx) * src.at(x0, y1) + tx * src.at(x1, y1));
        }
    }
    return out;
}

/// Solves the 3x3 system a * x = b by Cramer's rule.
inline bool solve3(const std::array<std::array<double, 3>, 3>& a, const std::array<double, 3>& b,
                   std::array<double, 3>& x) {
    auto det3 = [](const std::array<std::array<double, 3>, 3>& m) {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    const double d = det3(a);
    if (std::abs(d) < 1e-15) return false;
    for (int c = 0; c < 3; ++c) {
        auto m = a;
        for (int r = 0; r < 3; ++r) m[r][c] = b[r];
        x[c] = det3(m) / d;
    }
    return true;
}

inline bool is_extremum(const std::vector<FloatPlane>& dogs, int s, int x, int y) {
    const double v = dogs[s].at(x, y);
    const bool is_max = v > 0;
    for (int ds = -1; ds <= 1; ++ds) {
        const FloatPlane& p = dogs[s + ds];
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (ds == 0 && dx == 0 && dy == 0) continue;
                const double n = p.at(x + dx, y + dy);
                if (is_max ? n >= v : n <= v) return false;
            }
        }
    }
    return true;
}

inline double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0) a += kTwoPi;
    if (a >= kTwoPi) a = 0.0;
    return a;
}

inline int octave_levels(const SiftParams& p) { return p.scales_per_octave + 3; }

/// Gaussian level nearest the keypoint's refined layer.
inline const FloatPlane& level_for(const ScaleSpace& ss, const Keypoint& kp) {
    const Octave& o = ss.octaves.at(static_cast<std::size_t>(kp.octave));
    const int idx = std::clamp(static_cast<int>(std::lround(kp.layer)), 0, octave_levels(ss.params) - 1);
    return o.gaussians[idx];
}

inline double octave_sigma(const ScaleSpace& ss, const Keypoint& kp) {
    return ss.params.sigma0 * std::pow(2.0, kp.layer / ss.params.scales_per_octave);
}

inline std::array<double, kOrientationBins> orientation_histogram(const FloatPlane& img, int px, int py,
                                                                  double sigma_oct) {
    std::array<double, kOrientationBins> hist{};
    const double sigma_w = kOrientationSigmaFactor * sigma_oct;
    const int radius = static_cast<int>(std::lround(kOrientationRadiusFactor * sigma_oct));
    const double denom = 2.0 * sigma_w * sigma_w;
    for (int i = -radius; i <= radius; ++i) {
        const int y = py + i;
        if (y < 1 || y > img.height() - 2) continue;
        for (int j = -radius; j <= radius; ++j) {
            const int x = px + j;
            if (x < 1 || x > img.width() - 2) continue;
            const double dx = img.at(x + 1, y) - img.at(x - 1, y);
            const double dy = img.at(x, y + 1) - img.at(x, y - 1);
            const double mag = std::hypot(dx, dy);
            if (mag == 0.0) continue;
            const double ori = wrap_angle(std::atan2(dy, dx));
            int bin = static_cast<int>(std::lround(kOrientationBins * ori / kTwoPi));
            bin %= kOrientationBins;
            hist[bin] += std::exp(-(i * i + j * j) / denom) * mag;
        }
    }
    std::array<double, kOrientationBins> smooth{};
    for (int b = 0; b < kOrientationBins; ++b) {
        auto at = [&](int o) { return hist[(b + o + kOrientationBins) % kOrientationBins]; };
        smooth[b] = (at(-2) + at(2)) * (1.0 / 16) + (at(-1) + at(1)) * (4.0 / 16) + at(0) * (6.0 / 16);
    }
    return smooth;
}

inline void l2_normalize(std::span<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n <= 0.0) return;
    for (double& x : v) x /= n;
}

/// Unit-normalize, clip every component at `clip`, unit-normalize again.
inline void normalize_descriptor(std::span<double> v, double clip = kDescClip) {
    l2_normalize(v);
    for (double& x : v) x = std::min(x, clip);
    l2_normalize(v);
}

} // namespace sift_detail

inline int resolve_octave_count(const SiftParams& p, int width, int height) {
    if (p.octaves > 0) return p.octaves;
    const int m = std::min(width, height);
    const int n = static_cast<int>(std::floor(std::log2(static_cast<double>(m)))) - 3 + (p.upsample ? 1 : 0);
    return std::max(1, n);
}

/// Gaussian and DoG pyramids. Octave o holds scales_per_octave + 3 Gaussian
/// levels at sigma0 * 2^(o + s / scales_per_octave) and their adjacent
/// differences; the next octave starts from level scales_per_octave
/// subsampled by 2.
inline ScaleSpace build_scale_space(const Image& img, const SiftParams& p = {}) {
    p.validate();
    if (img.width() < 16 || img.height() < 16)
        throw std::invalid_argument("sift: image must be at least 16x16");
    const Image gray = to_grayscale(img);

    FloatPlane base(gray.width(), gray.height());
    {
        auto src = gray.data();
        auto dst = base.data();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] / 255.0;
    }
    double present_blur = p.input_blur;
    int exponent = 0;
    if (p.upsample) {
        base = sift_detail::upsample(base);
        present_blur *= 2.0;
        exponent = -1;
    }
    const double init = std::sqrt(std::max(p.sigma0 * p.sigma0 - present_blur * present_blur, 0.01));
    base = sift_detail::blur(base, init);

    const int S = p.scales_per_octave;
    const int levels = S + 3;
    const int count = resolve_octave_count(p, img.width(), img.height());

    ScaleSpace ss{p, img.width(), img.height(), {}};
    for (int o = 0; o < count; ++o, ++exponent) {
        if (std::min(base.width(), base.height()) < 8) break;
        Octave oct;
        oct.exponent = exponent;
        oct.gaussians.reserve(levels);
        oct.gaussians.push_back(std::move(base));
        for (int s = 1; s < levels; ++s) {
            const double prev = p.sigma0 * std::pow(2.0, (s - 1.0) / S);
            const double cur = p.sigma0 * std::pow(2.0, static_cast<double>(s) / S);
            oct.gaussians.push_back(sift_detail::blur(oct.gaussians.back(), std::sqrt(cur * cur - prev * prev)));
        }
        for (int s = 0; s < levels; ++s) oct.sigmas.push_back(p.sigma0 * std::pow(2.0, exponent + static_cast<double>(s) / S));
        for (int s = 0; s + 1 < levels; ++s) {
            const FloatPlane& a = oct.gaussians[s];
            const FloatPlane& b = oct.gaussians[s + 1];
            FloatPlane d(a.width(), a.height());
            for (std::size_t i = 0; i < d.data().size(); ++i) d.data()[i] = b.data()[i] - a.data()[i];
            oct.dogs.push_back(std::move(d));
        }
        base = sift_detail::downsample(oct.gaussians[S]);
        ss.octaves.push_back(std::move(oct));
    }
    return ss;
}

/// Scale-space extrema surviving refinement, contrast and edge tests.
/// Coordinates are in the base-image frame.
inline std::vector<Keypoint> detect_keypoints(const ScaleSpace& ss) {
    using namespace sift_detail;
    const SiftParams& p = ss.params;
    const int S = p.scales_per_octave;
    const double pre_threshold = 0.5 * p.contrast_threshold;
    const double r = p.edge_ratio_threshold;
    const double edge_limit = (r + 1) * (r + 1) / r;

    std::vector<Keypoint> out;
    for (std::size_t oi = 0; oi < ss.octaves.size(); ++oi) {
        const Octave& oct = ss.octaves[oi];
        const auto& dogs = oct.dogs;
        const int w = dogs[0].width();
        const int h = dogs[0].height();
        if (w <= 2 * kBorder || h <= 2 * kBorder) continue;
        const double step = std::pow(2.0, oct.exponent);

        for (int s0 = 1; s0 <= S; ++s0) {
            for (int y0 = kBorder; y0 < h - kBorder; ++y0) {
                for (int x0 = kBorder; x0 < w - kBorder; ++x0) {
                    if (std::abs(dogs[s0].at(x0, y0)) <= pre_threshold) continue;
                    if (!is_extremum(dogs, s0, x0, y0)) continue;

                    int x = x0, y = y0, s = s0;
                    std::array<double, 3> off{};
                    std::array<double, 3> grad{};
                    bool converged = false;
                    for (int step_i = 0; step_i < kMaxRefineSteps; ++step_i) {
                        const FloatPlane& c = dogs[s];
                        const FloatPlane& prev = dogs[s - 1];
                        const FloatPlane& next = dogs[s + 1];
                        const double v = c.at(x, y);
                        grad = {0.5 * (c.at(x + 1, y) - c.at(x - 1, y)),
                                0.5 * (c.at(x, y + 1) - c.at(x, y - 1)),
                                0.5 * (next.at(x, y) - prev.at(x, y))};
                        const double dxx = c.at(x + 1, y) + c.at(x - 1, y) - 2 * v;
                        const double dyy = c.at(x, y + 1) + c.at(x, y - 1) - 2 * v;
                        const double dss = next.at(x, y) + prev.at(x, y) - 2 * v;
                        const double dxy = 0.25 * (c.at(x + 1, y + 1) - c.at(x - 1, y + 1) - c.at(x + 1, y - 1) + c.at(x - 1, y - 1));
                        const double dxs = 0.25 * (next.at(x + 1, y) - next.at(x - 1, y) - prev.at(x + 1, y) + prev.at(x - 1, y));
                        const double dys = 0.25 * (next.at(x, y + 1) - next.at(x, y - 1) - prev.at(x, y + 1) + prev.at(x, y - 1));
                        const std::array<std::array<double, 3>, 3> hess{{{dxx, dxy, dxs}, {dxy, dyy, dys}, {dxs, dys, dss}}};
                        if (!solve3(hess, {-grad[0], -grad[1], -grad[2]}, off)) break;
                        if (std::abs(off[0]) < 0.5 && std::abs(off[1]) < 0.5 && std::abs(off[2]) < 0.5) {
                            converged = true;
                            break;
                        }
                        if (std::abs(off[0]) > w || std::abs(off[1]) > h || std::abs(off[2]) > S + 2) break;
                        x += static_cast<int>(std::lround(off[0]));
                        y += static_cast<int>(std::lround(off[1]));
                        s += static_cast<int>(std::lround(off[2]));
                        if (s < 1 || s > S || x < kBorder || x >= w - kBorder || y < kBorder || y >= h - kBorder) break;
                    }
                    if (!converged) continue;

                    const FloatPlane& c = dogs[s];
                    const double v = c.at(x, y);
                    const double contrast = v + 0.5 * (grad[0] * off[0] + grad[1] * off[1] + grad[2] * off[2]);
                    if (std::abs(contrast) < p.contrast_threshold) continue;

                    const double dxx = c.at(x + 1, y) + c.at(x - 1, y) - 2 * v;
                    const double dyy = c.at(x, y + 1) + c.at(x, y - 1) - 2 * v;
                    const double dxy = 0.25 * (c.at(x + 1, y + 1) - c.at(x - 1, y + 1) - c.at(x + 1, y - 1) + c.at(x - 1, y - 1));
                    const double tr = dxx + dyy;
                    const double det = dxx * dyy - dxy * dxy;
                    if (det <= 0 || tr * tr >= edge_limit * det) continue;

                    Keypoint kp;
                    kp.x = std::clamp((x + off[0]) * step, 0.0, std::nextafter(static_cast<double>(ss.width), 0.0));
                    kp.y = std::clamp((y + off[1]) * step, 0.0, std::nextafter(static_cast<double>(ss.height), 0.0));
                    kp.layer = s + off[2];
                    kp.octave = static_cast<int>(oi);
                    kp.scale = p.sigma0 * std::pow(2.0, oct.exponent + kp.layer / S);
                    kp.response = std::abs(contrast);
                    out.push_back(kp);
                }
            }
        }
    }
    return out;
}

/// Dominant gradient orientations of a keypoint. Every smoothed-histogram
/// peak reaching 0.8 of the maximum is returned (parabolically refined).
inline std::vector<double> keypoint_orientations(const ScaleSpace& ss, const Keypoint& kp) {
    using namespace sift_detail;
    const FloatPlane& img = level_for(ss, kp);
    const double step = std::pow(2.0, ss.octaves[static_cast<std::size_t>(kp.octave)].exponent);
    const int px = static_cast<int>(std::lround(kp.x / step));
    const int py = static_cast<int>(std::lround(kp.y / step));
    const auto hist = orientation_histogram(img, px, py, octave_sigma(ss, kp));
    const double peak = *std::max_element(hist.begin(), hist.end());
    std::vector<double> out;
    if (peak <= 0.0) return out;
    for (int b = 0; b < kOrientationBins; ++b) {
        const double l = hist[(b + kOrientationBins - 1) % kOrientationBins];
        const double c = hist[b];
        const double r = hist[(b + 1) % kOrientationBins];
        if (!(c > l && c > r && c >= kOrientationPeakRatio * peak)) continue;
        const double shift = 0.5 * (l - r) / (l - 2 * c + r);
        out.push_back(wrap_angle(kTwoPi * (b + shift) / kOrientationBins));
    }
    return out;
}

/// Orientation assignment plus 128-dimensional descriptors. Keypoints whose
/// descriptor window leaves the image are dropped; a keypoint with several
/// dominant orientations yields one feature per orientation.
inline std::vector<Feature> compute_descriptors(const ScaleSpace& ss, std::span<const Keypoint> keypoints) {
    using namespace sift_detail;
    constexpr int d = kDescWidth;
    constexpr int n = kDescBins;
    std::vector<Feature> out;
    for (const Keypoint& base_kp : keypoints) {
        if (base_kp.octave < 0 || static_cast<std::size_t>(base_kp.octave) >= ss.octaves.size()) continue;
        const FloatPlane& img = level_for(ss, base_kp);
        const double step = std::pow(2.0, ss.octaves[static_cast<std::size_t>(base_kp.octave)].exponent);
        const int px = static_cast<int>(std::lround(base_kp.x / step));
        const int py = static_cast<int>(std::lround(base_kp.y / step));
        const double hist_width = kDescBinWidthFactor * octave_sigma(ss, base_kp);
        const int radius = static_cast<int>(std::lround(hist_width * std::numbers::sqrt2 * (d + 1) * 0.5));
        if (px - radius < 1 || py - radius < 1 || px + radius > img.width() - 2 || py + radius > img.height() - 2)
            continue;

        for (double theta : keypoint_orientations(ss, base_kp)) {
            Keypoint kp = base_kp;
            kp.orientation = theta;
            const double cos_t = std::cos(theta) / hist_width;
            const double sin_t = std::sin(theta) / hist_width;
            constexpr double exp_scale = -1.0 / (d * d * 0.5);

            std::array<double, (d + 2) * (d + 2) * n> hist{};
            auto cell = [&](int r, int c, int o) -> double& {
                return hist[(static_cast<std::size_t>(r + 1) * (d + 2) + (c + 1)) * n + ((o % n + n) % n)];
            };
            for (int i = -radius; i <= radius; ++i) {
                for (int j = -radius; j <= radius; ++j) {
                    // Sample offset expressed in the keypoint's rotated frame, in bin units.
                    const double c_rot = j * cos_t + i * sin_t;
                    const double r_rot = -j * sin_t + i * cos_t;
                    const double rbin = r_rot + d / 2.0 - 0.5;
                    const double cbin = c_rot + d / 2.0 - 0.5;
                    if (!(rbin > -1 && rbin < d && cbin > -1 && cbin < d)) continue;
                    const int x = px + j;
                    const int y = py + i;
                    const double dx = img.at(x + 1, y) - img.at(x - 1, y);
                    const double dy = img.at(x, y + 1) - img.at(x, y - 1);
                    const double mag = std::hypot(dx, dy) * std::exp((c_rot * c_rot + r_rot * r_rot) * exp_scale);
                    if (mag == 0.0) continue;
                    double obin = wrap_angle(std::atan2(dy, dx) - theta) * n / kTwoPi;

                    const int r0 = static_cast<int>(std::floor(rbin));
                    const int c0 = static_cast<int>(std::floor(cbin));
                    const int o0 = static_cast<int>(std::floor(obin));
                    const double fr = rbin - r0;
                    const double fc = cbin - c0;
                    const double fo = obin - o0;
                    for (int a = 0; a < 2; ++a) {
                        const double wr = a ? fr : 1 - fr;
                        for (int b = 0; b < 2; ++b) {
                            const double wc = b ? fc : 1 - fc;
                            for (int e = 0; e < 2; ++e) {
                                const double wo = e ? fo : 1 - fo;
                                cell(r0 + a, c0 + b, o0 + e) += mag * wr * wc * wo;
                            }
                        }
                    }
                }
            }

            Feature f{kp, {}};
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c)
                    for (int o = 0; o < n; ++o)
                        f.descriptor[(static_cast<std::size_t>(r) * d + c) * n + o] = cell(r, c, o);
            normalize_descriptor(f.descriptor);
            out.push_back(f);
        }
    }
    return out;
}

inline std::vector<Feature> compute_descriptors(const Image& img, std::span<const Keypoint> keypoints,
                                                const SiftParams& p = {}) {
    return compute_descriptors(build_scale_space(img, p), keypoints);
}

/// Detection and description in one call.
inline std::vector<Feature> extract_features(const Image& img, const SiftParams& p = {}) {
    const ScaleSpace ss = build_scale_space(img, p);
    return compute_descriptors(ss, detect_keypoints(ss));
}

inline double descriptor_distance(const Descriptor& a, const Descriptor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return std::sqrt(s);
}

/// Exhaustive nearest-neighbour matching with the ratio test: (i, j) is
/// kept when the nearest distance is below ratio times the second-nearest.
/// With a single candidate the second distance counts as infinite.
inline std::vector<std::pair<std::size_t, std::size_t>> match_descriptors(std::span<const Descriptor> a,
                                                                          std::span<const Descriptor> b,
                                                                          double ratio = 0.75) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (b.empty()) return out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d1 = std::numeric_limits<double>::infinity();
        double d2 = std::numeric_limits<double>::infinity();
        std::size_t best = 0;
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double dist = descriptor_distance(a[i], b[j]);
            if (dist < d1) {
                d2 = d1;
                d1 = dist;
                best = j;
            } else if (dist < d2) {
                d2 = dist;
            }
        }
        if (d1 < ratio * d2) out.emplace_back(i, best);
    }
    return out;
}

inline std::vector<Descriptor> descriptors_of(std::span<const Feature> features) {
    std::vector<Descriptor> out;
    out.reserve(features.size());
    for (const auto& f : features) out.push_back(f.descriptor);
    return out;
}

/// Keypoint dump: [{x, y, scale, orientation, response}, ...]
inline nlohmann::ordered_json keypoints_to_json(std::span<const Keypoint> keypoints) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& k : keypoints) {
        arr.push_back({{"x", k.x}, {"y", k.y}, {"scale", k.scale}, {"orientation", k.orientation}, {"response", k.response}});
    }
    return arr;
}

} // namespace touchless
