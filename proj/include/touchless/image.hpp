#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace touchless {

/// Raised for malformed input data (unreadable images, bad manifests,
/// inconsistent prediction files). Parameter mistakes by the caller use
/// std::invalid_argument instead.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Owned 8-bit raster, row-major, interleaved channels (1 = gray, 3 = RGB).
class Image {
public:
    Image() = default;

    Image(int width, int height, int channels, std::uint8_t fill = 0)
        : width_(width), height_(height), channels_(channels) {
        check_shape(width, height, channels);
        data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
    }

    Image(int width, int height, int channels, std::vector<std::uint8_t> data)
        : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
        check_shape(width, height, channels);
        if (data_.size() != static_cast<std::size_t>(width) * height * channels)
            throw std::invalid_argument("Image: data length does not match width*height*channels");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

    std::uint8_t& at(int x, int y, int c = 0) noexcept {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    std::uint8_t at(int x, int y, int c = 0) const noexcept {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    std::span<std::uint8_t> data() noexcept { return data_; }
    std::span<const std::uint8_t> data() const noexcept { return data_; }
    const std::vector<std::uint8_t>& bytes() const noexcept { return data_; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    static void check_shape(int width, int height, int channels) {
        if (width < 1 || height < 1)
            throw std::invalid_argument("Image: dimensions must be >= 1");
        if (channels != 1 && channels != 3)
            throw std::invalid_argument("Image: channels must be 1 or 3");
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Single-channel real-valued raster. Holds unclamped filter responses
/// and unit-scaled intensities.
template <typename T>
class Plane {
public:
    Plane() = default;
    Plane(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(width) * height, fill) {
        if (width < 1 || height < 1)
            throw std::invalid_argument("Plane: dimensions must be >= 1");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    T& at(int x, int y) noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    T at(int x, int y) const noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }

    friend bool operator==(const Plane&, const Plane&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using SignedImage = Plane<double>;
using UnitImage = Plane<double>;

/// Odd-sized square correlation mask.
class Kernel {
public:
    Kernel(int size, std::vector<double> coefficients)
        : size_(size), coefficients_(std::move(coefficients)) {
        if (size < 1 || size % 2 == 0)
            throw std::invalid_argument("Kernel: size must be odd and >= 1");
        if (coefficients_.size() != static_cast<std::size_t>(size) * size)
            throw std::invalid_argument("Kernel: coefficient count must be size*size");
    }

    int size() const noexcept { return size_; }
    int radius() const noexcept { return size_ / 2; }
    double at(int col, int row) const noexcept {
        return coefficients_[static_cast<std::size_t>(row) * size_ + col];
    }
    std::span<const double> coefficients() const noexcept { return coefficients_; }

    static Kernel identity(int size = 3) {
        std::vector<double> c(static_cast<std::size_t>(size) * size, 0.0);
        c[c.size() / 2] = 1.0;
        return Kernel(size, std::move(c));
    }

    /// 4-neighbour Laplacian [[0,1,0],[1,-4,1],[0,1,0]].
    static Kernel laplacian4() {
        return Kernel(3, {0, 1, 0, 1, -4, 1, 0, 1, 0});
    }

private:
    int size_;
    std::vector<double> coefficients_;
};

/// Odd-sized boolean neighbourhood anchored at its center.
class StructuringElement {
public:
    StructuringElement(int size, std::vector<bool> mask)
        : size_(size), mask_(std::move(mask)) {
        if (size < 1 || size % 2 == 0)
            throw std::invalid_argument("StructuringElement: size must be odd and >= 1");
        if (mask_.size() != static_cast<std::size_t>(size) * size)
            throw std::invalid_argument("StructuringElement: mask must have size*size cells");
        if (!mask_[mask_.size() / 2])
            throw std::invalid_argument("StructuringElement: origin cell must be set");
    }

    static StructuringElement square(int size = 3) {
        return StructuringElement(size, std::vector<bool>(static_cast<std::size_t>(size) * size, true));
    }

    static StructuringElement cross(int size = 3) {
        std::vector<bool> m(static_cast<std::size_t>(size) * size, false);
        const int r = size / 2;
        for (int i = 0; i < size; ++i) {
            m[static_cast<std::size_t>(r) * size + i] = true;
            m[static_cast<std::size_t>(i) * size + r] = true;
        }
        return StructuringElement(size, std::move(m));
    }

    int size() const noexcept { return size_; }
    int radius() const noexcept { return size_ / 2; }
    bool at(int col, int row) const noexcept {
        return mask_[static_cast<std::size_t>(row) * size_ + col];
    }

private:
    int size_;
    std::vector<bool> mask_;
};

struct Rect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    friend bool operator==(const Rect&, const Rect&) = default;
};

inline std::string to_string(const Rect& r) {
    return "(" + std::to_string(r.x) + "," + std::to_string(r.y) + "," +
           std::to_string(r.width) + "," + std::to_string(r.height) + ")";
}

} // namespace touchless
