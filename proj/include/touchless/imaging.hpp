#pragma once

// Pixel-level primitives shared by the augmentation and enhancement
// pipelines. Every function is pure: inputs are never modified and equal
// inputs give byte-identical outputs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "touchless/image.hpp"

namespace touchless {

namespace detail {

inline std::uint8_t saturate(double v) noexcept {
    const double r = std::round(v);
    if (!(r > 0.0)) return 0;  // also maps NaN to 0
    if (r >= 255.0) return 255;
    return static_cast<std::uint8_t>(r);
}

inline void require_gray(const Image& img, const char* op) {
    if (img.channels() != 1)
        throw std::invalid_argument(std::string(op) + ": expected a 1-channel image");
}

inline Image extract_channel(const Image& img, int c) {
    Image out(img.width(), img.height(), 1);
    auto dst = out.data();
    auto src = img.data();
    const int n = img.channels();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i * n + c];
    return out;
}

inline void insert_channel(Image& img, const Image& plane, int c) {
    auto dst = img.data();
    auto src = plane.data();
    const int n = img.channels();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i * n + c] = src[i];
}

template <typename F>
Image map_values(const Image& img, F&& f) {
    Image out = img;
    for (auto& v : out.data()) v = f(v);
    return out;
}

inline int clamp_index(int i, int n) noexcept { return std::clamp(i, 0, n - 1); }

} // namespace detail

/// ITU-R BT.601 luma. Gray input is returned unchanged.
inline Image to_grayscale(const Image& img) {
    if (img.channels() == 1) return img;
    Image out(img.width(), img.height(), 1);
    auto src = img.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const double luma = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
        dst[i] = detail::saturate(luma);
    }
    return out;
}

/// Min-max contrast stretch to the full [0,255] range. Multi-channel
/// images share one global min/max so hue balance is kept. A constant
/// image is returned unchanged.
inline Image normalize_stretch(const Image& img) {
    const auto [lo_it, hi_it] = std::minmax_element(img.data().begin(), img.data().end());
    const int lo = *lo_it;
    const int hi = *hi_it;
    if (lo == hi) return img;
    const double scale = 255.0 / (hi - lo);
    return detail::map_values(img, [&](std::uint8_t v) { return detail::saturate(scale * (v - lo)); });
}

/// Real-valued interleaved raster produced by unit scaling.
struct UnitRaster {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> values;
};

/// Scales every intensity v to v/255.
inline UnitRaster normalize_unit(const Image& img) {
    UnitRaster out{img.width(), img.height(), img.channels(), {}};
    out.values.reserve(img.data().size());
    for (auto v : img.data()) out.values.push_back(v / 255.0);
    return out;
}

/// Inverse of normalize_unit with saturation.
inline Image quantize(const UnitRaster& r) {
    Image out(r.width, r.height, r.channels);
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = detail::saturate(255.0 * r.values[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Photometric adjustments

/// out = 128 + factor * (v - 128)
struct Contrast {
    double factor = 1.0;
};

/// out = v + delta
struct Brightness {
    double delta = 0.0;
};

/// out_c = gain_c * v_c on RGB data
struct ColorGains {
    std::array<double, 3> gains{1.0, 1.0, 1.0};
};

using PhotometricAdjustment = std::variant<Contrast, Brightness, ColorGains>;

inline Image adjust_contrast(const Image& img, double factor) {
    if (!(factor > 0.0)) throw std::invalid_argument("contrast: factor must be > 0");
    return detail::map_values(img, [&](std::uint8_t v) { return detail::saturate(128.0 + factor * (v - 128.0)); });
}

inline Image adjust_brightness(const Image& img, double delta) {
    if (!std::isfinite(delta)) throw std::invalid_argument("brightness: delta must be finite");
    return detail::map_values(img, [&](std::uint8_t v) { return detail::saturate(v + delta); });
}

inline Image adjust_color(const Image& img, const std::array<double, 3>& gains) {
    if (img.channels() != 3) throw std::invalid_argument("color: expected a 3-channel image");
    for (double g : gains)
        if (!(g >= 0.0) || !std::isfinite(g)) throw std::invalid_argument("color: gains must be finite and >= 0");
    Image out = img;
    auto d = out.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = detail::saturate(gains[i % 3] * d[i]);
    return out;
}

inline Image photometric_adjust(const Image& img, const PhotometricAdjustment& adj) {
    struct Visitor {
        const Image& img;
        Image operator()(const Contrast& c) const { return adjust_contrast(img, c.factor); }
        Image operator()(const Brightness& b) const { return adjust_brightness(img, b.delta); }
        Image operator()(const ColorGains& g) const { return adjust_color(img, g.gains); }
    };
    return std::visit(Visitor{img}, adj);
}

// ---------------------------------------------------------------------------
// Filtering

/// Correlation with replicate-edge padding. Output is unclamped.
inline SignedImage convolve(const Image& img, const Kernel& kernel) {
    detail::require_gray(img, "convolve");
    const int w = img.width();
    const int h = img.height();
    const int r = kernel.radius();
    SignedImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int ky = -r; ky <= r; ++ky) {
                const int sy = detail::clamp_index(y + ky, h);
                for (int kx = -r; kx <= r; ++kx) {
                    const double k = kernel.at(kx + r, ky + r);
                    if (k == 0.0) continue;
                    acc += k * img.at(detail::clamp_index(x + kx, w), sy);
                }
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

/// Raw 4-neighbour Laplacian response.
inline SignedImage laplacian_response(const Image& img) {
    return convolve(img, Kernel::laplacian4());
}

/// Laplacian magnitude re-quantized for display: clamp(round(|response|)).
inline Image laplacian(const Image& img) {
    const SignedImage resp = laplacian_response(img);
    Image out(img.width(), img.height(), 1);
    auto d = out.data();
    auto s = resp.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = detail::saturate(std::abs(s[i]));
    return out;
}

/// Edge sharpening by subtracting the scaled Laplacian response
/// (out = v - amount * lap), so an isolated bright pixel gets brighter and
/// its neighbours darker. Flat regions are fixed points. RGB input is
/// sharpened channel by channel.
inline Image sharpen(const Image& img, double amount) {
    if (!(amount > 0.0)) throw std::invalid_argument("sharpen: amount must be > 0");
    if (img.channels() != 1) {
        Image out = img;
        for (int c = 0; c < img.channels(); ++c)
            detail::insert_channel(out, sharpen(detail::extract_channel(img, c), amount), c);
        return out;
    }
    const SignedImage lap = laplacian_response(img);
    Image out(img.width(), img.height(), 1);
    auto d = out.data();
    auto s = img.data();
    auto l = lap.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = detail::saturate(s[i] - amount * l[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Histogram methods

using Histogram = std::array<std::uint64_t, 256>;

inline Histogram histogram(const Image& img) {
    Histogram h{};
    for (auto v : img.data()) ++h[v];
    return h;
}

struct ClaheParams {
    /// Bin cap as a multiple of the uniform bin height (tile_pixels / 256).
    /// Infinity disables clipping.
    double clip_limit = 2.0;
    int tiles_x = 8;
    int tiles_y = 8;
};

namespace detail {

/// Tile boundaries [start_i, start_{i+1}) splitting n pixels into k tiles.
inline std::vector<int> tile_starts(int n, int k) {
    std::vector<int> s(static_cast<std::size_t>(k) + 1);
    for (int i = 0; i <= k; ++i) s[i] = static_cast<int>(static_cast<long long>(i) * n / k);
    return s;
}

struct AxisWeight {
    int lo;
    int hi;
    double t;  // weight of hi
};

/// Bilinear tile neighbours along one axis; outside the outermost tile
/// centres the edge tile is replicated.
inline std::vector<AxisWeight> axis_weights(int n, const std::vector<int>& starts) {
    const int k = static_cast<int>(starts.size()) - 1;
    std::vector<double> centre(k);
    for (int i = 0; i < k; ++i) centre[i] = (starts[i] + starts[i + 1] - 1) / 2.0;
    std::vector<AxisWeight> out(n);
    int i = 0;
    for (int p = 0; p < n; ++p) {
        if (p <= centre[0]) {
            out[p] = {0, 0, 0.0};
            continue;
        }
        if (p >= centre[k - 1]) {
            out[p] = {k - 1, k - 1, 0.0};
            continue;
        }
        while (centre[i + 1] < p) ++i;
        out[p] = {i, i + 1, (p - centre[i]) / (centre[i + 1] - centre[i])};
    }
    return out;
}

} // namespace detail

/// Contrast-limited adaptive histogram equalization.
///
/// Each tile gets a 256-bin histogram whose bins are capped at
/// clip_limit * tile_pixels / 256; the clipped excess is spread evenly over
/// all bins in one pass. Tile mappings m(v) = round(255 * cdf(v)) are blended
/// bilinearly between the four nearest tile centres.
inline Image clahe(const Image& img, const ClaheParams& p = {}) {
    detail::require_gray(img, "clahe");
    if (p.tiles_x < 1 || p.tiles_y < 1) throw std::invalid_argument("clahe: tile counts must be >= 1");
    if (!(p.clip_limit >= 1.0)) throw std::invalid_argument("clahe: clip_limit must be >= 1");
    if (p.tiles_x > img.width() || p.tiles_y > img.height())
        throw std::invalid_argument("clahe: tile grid exceeds image dimensions");

    const int w = img.width();
    const int h = img.height();
    const auto xs = detail::tile_starts(w, p.tiles_x);
    const auto ys = detail::tile_starts(h, p.tiles_y);

    std::vector<std::array<std::uint8_t, 256>> maps(static_cast<std::size_t>(p.tiles_x) * p.tiles_y);
    for (int ty = 0; ty < p.tiles_y; ++ty) {
        for (int tx = 0; tx < p.tiles_x; ++tx) {
            std::array<double, 256> hist{};
            for (int y = ys[ty]; y < ys[ty + 1]; ++y)
                for (int x = xs[tx]; x < xs[tx + 1]; ++x) hist[img.at(x, y)] += 1.0;
            const double n = static_cast<double>(xs[tx + 1] - xs[tx]) * (ys[ty + 1] - ys[ty]);

            if (std::isfinite(p.clip_limit)) {
                const double limit = p.clip_limit * n / 256.0;
                double excess = 0.0;
                for (double& b : hist) {
                    if (b > limit) {
                        excess += b - limit;
                        b = limit;
                    }
                }
                const double share = excess / 256.0;
                for (double& b : hist) b += share;
            }

            auto& m = maps[static_cast<std::size_t>(ty) * p.tiles_x + tx];
            double cum = 0.0;
            for (int v = 0; v < 256; ++v) {
                cum += hist[v];
                m[v] = detail::saturate(255.0 * cum / n);
            }
        }
    }

    const auto wx = detail::axis_weights(w, xs);
    const auto wy = detail::axis_weights(h, ys);
    auto map_at = [&](int tx, int ty, std::uint8_t v) -> double {
        return maps[static_cast<std::size_t>(ty) * p.tiles_x + tx][v];
    };

    Image out(w, h, 1);
    for (int y = 0; y < h; ++y) {
        const auto& ay = wy[y];
        for (int x = 0; x < w; ++x) {
            const auto& ax = wx[x];
            const std::uint8_t v = img.at(x, y);
            const double top = (1.0 - ax.t) * map_at(ax.lo, ay.lo, v) + ax.t * map_at(ax.hi, ay.lo, v);
            const double bottom = (1.0 - ax.t) * map_at(ax.lo, ay.hi, v) + ax.t * map_at(ax.hi, ay.hi, v);
            out.at(x, y) = detail::saturate((1.0 - ay.t) * top + ay.t * bottom);
        }
    }
    return out;
}

struct ThresholdResult {
    Image binary;   ///< 255 where v > threshold, else 0
    int threshold;  ///< in [0, 255]
};

/// Otsu threshold of a histogram: the t maximizing between-class variance
/// of the split {v <= t} / {v > t}; ties resolve to the smallest t. Returns
/// -1 when every candidate has zero variance (single occupied bin).
inline int otsu_threshold(const Histogram& hist) {
    std::uint64_t n = 0;
    std::uint64_t sum = 0;
    for (int v = 0; v < 256; ++v) {
        n += hist[v];
        sum += static_cast<std::uint64_t>(v) * hist[v];
    }
    // Between-class variance is proportional to d^2 / (n0 * n1) with
    // d = n * s0 - n0 * sum. Candidates are compared by cross-multiplication,
    // exactly in 128-bit integers when the products fit.
    const bool exact = n <= 500000;
    int best_t = -1;
    unsigned __int128 best_num = 0;
    std::uint64_t best_den = 1;
    long double best_val = 0.0L;

    std::uint64_t n0 = 0;
    std::uint64_t s0 = 0;
    for (int t = 0; t < 256; ++t) {
        n0 += hist[t];
        s0 += static_cast<std::uint64_t>(t) * hist[t];
        const std::uint64_t n1 = n - n0;
        if (n0 == 0 || n1 == 0) continue;
        const __int128 d = static_cast<__int128>(n) * s0 - static_cast<__int128>(n0) * sum;
        const unsigned __int128 mag = static_cast<unsigned __int128>(d < 0 ? -d : d);
        const unsigned __int128 num = mag * mag;
        const std::uint64_t den = n0 * n1;
        if (num == 0) continue;
        if (exact) {
            if (best_t < 0 || num * best_den > best_num * den) {
                best_t = t;
                best_num = num;
                best_den = den;
            }
        } else {
            const long double val = static_cast<long double>(num) / static_cast<long double>(den);
            if (best_t < 0 || val > best_val) {
                best_t = t;
                best_val = val;
            }
        }
    }
    return best_t;
}

/// Otsu binarization. A constant image yields t = its value and an
/// all-zero output.
inline ThresholdResult threshold_otsu(const Image& img) {
    detail::require_gray(img, "threshold_otsu");
    int t = otsu_threshold(histogram(img));
    if (t < 0) t = img.data()[0];
    Image out = detail::map_values(img, [t](std::uint8_t v) -> std::uint8_t { return v > t ? 255 : 0; });
    return {std::move(out), t};
}

inline Image invert(const Image& img) {
    return detail::map_values(img, [](std::uint8_t v) -> std::uint8_t { return 255 - v; });
}

// ---------------------------------------------------------------------------
// Morphology and geometry

/// Grayscale dilation: out(p) = max of v(p + o) over the element's offsets o.
/// Pixels outside the image count as 0.
inline Image dilate(const Image& img, const StructuringElement& se, int iterations = 1) {
    detail::require_gray(img, "dilate");
    if (iterations < 1) throw std::invalid_argument("dilate: iterations must be >= 1");
    const int w = img.width();
    const int h = img.height();
    const int r = se.radius();
    std::vector<std::pair<int, int>> offsets;
    for (int j = 0; j < se.size(); ++j)
        for (int i = 0; i < se.size(); ++i)
            if (se.at(i, j)) offsets.emplace_back(i - r, j - r);

    Image src = img;
    for (int it = 0; it < iterations; ++it) {
        Image out(w, h, 1);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                std::uint8_t m = 0;
                for (auto [dx, dy] : offsets) {
                    const int sx = x + dx;
                    const int sy = y + dy;
                    if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
                    m = std::max(m, src.at(sx, sy));
                }
                out.at(x, y) = m;
            }
        }
        src = std::move(out);
    }
    return src;
}

inline Image crop(const Image& img, const Rect& r) {
    if (r.x < 0 || r.y < 0 || r.width < 1 || r.height < 1 ||
        r.x + r.width > img.width() || r.y + r.height > img.height())
        throw std::invalid_argument("crop: rect " + to_string(r) + " outside " +
                                    std::to_string(img.width()) + "x" + std::to_string(img.height()) + " image");
    Image out(r.width, r.height, img.channels());
    const std::size_t row_bytes = static_cast<std::size_t>(r.width) * img.channels();
    auto src = img.data();
    auto dst = out.data();
    for (int y = 0; y < r.height; ++y) {
        const std::size_t from = (static_cast<std::size_t>(r.y + y) * img.width() + r.x) * img.channels();
        std::copy_n(src.begin() + from, row_bytes, dst.begin() + y * row_bytes);
    }
    return out;
}

/// Tight bounding box of the nonzero pixels grown by margin and clamped
/// to the image. An all-zero mask yields the full-image rect.
inline Rect roi_from_mask(const Image& mask, int margin = 8) {
    detail::require_gray(mask, "roi_from_mask");
    if (margin < 0) throw std::invalid_argument("roi_from_mask: margin must be >= 0");
    int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask.at(x, y) == 0) continue;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    }
    if (x1 < 0) return {0, 0, mask.width(), mask.height()};
    x0 = std::max(0, x0 - margin);
    y0 = std::max(0, y0 - margin);
    x1 = std::min(mask.width() - 1, x1 + margin);
    y1 = std::min(mask.height() - 1, y1 + margin);
    return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

/// Bilinear resampling with half-pixel-centre mapping:
/// src = (dst + 0.5) * in / out - 0.5, clamped to the source grid.
inline Image resize_bilinear(const Image& img, int width, int height) {
    if (width < 1 || height < 1) throw std::invalid_argument("resize: target dimensions must be >= 1");
    if (width == img.width() && height == img.height()) return img;
    const int ch = img.channels();
    Image out(width, height, ch);

    auto axis = [](int n_out, int n_in) {
        std::vector<detail::AxisWeight> a(n_out);
        const double scale = static_cast<double>(n_in) / n_out;
        for (int i = 0; i < n_out; ++i) {
            double s = (i + 0.5) * scale - 0.5;
            s = std::clamp(s, 0.0, static_cast<double>(n_in - 1));
            const int lo = static_cast<int>(std::floor(s));
            const int hi = std::min(lo + 1, n_in - 1);
            a[i] = {lo, hi, s - lo};
        }
        return a;
    };
    const auto ax = axis(width, img.width());
    const auto ay = axis(height, img.height());

    for (int y = 0; y < height; ++y) {
        const auto& wy = ay[y];
        for (int x = 0; x < width; ++x) {
            const auto& wx = ax[x];
            for (int c = 0; c < ch; ++c) {
                const double top = (1.0 - wx.t) * img.at(wx.lo, wy.lo, c) + wx.t * img.at(wx.hi, wy.lo, c);
                const double bottom = (1.0 - wx.t) * img.at(wx.lo, wy.hi, c) + wx.t * img.at(wx.hi, wy.hi, c);
                out.at(x, y, c) = detail::saturate((1.0 - wy.t) * top + wy.t * bottom);
            }
        }
    }
    return out;
}

} // namespace touchless
