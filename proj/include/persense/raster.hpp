#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace persense {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for malformed raster files; `offset` is the byte (or value index
/// for JSON grids) where parsing failed.
class RasterIoError : public Error {
public:
    RasterIoError(const std::string& what, std::size_t offset)
        : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

struct Point {
    int x = 0;
    int y = 0;
    bool operator==(const Point&) const = default;
};

/// Row-major raster with origin at the top-left; (x, y) = (column, row).
/// `Tag` keeps semantically different rasters from mixing.
template <typename T, typename Tag>
class Raster {
public:
    using value_type = T;

    Raster() = default;
    Raster(int width, int height, T fill = T{}) : width_(width), height_(height) {
        if (width <= 0 || height <= 0) throw Error("raster dimensions must be positive");
        values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }
    Raster(int width, int height, std::vector<T> values)
        : width_(width), height_(height), values_(std::move(values)) {
        if (width <= 0 || height <= 0) throw Error("raster dimensions must be positive");
        if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
            throw Error("raster value count does not match dimensions");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }
    bool contains(Point p) const noexcept { return contains(p.x, p.y); }

    const T& operator()(int x, int y) const { return values_[index(x, y)]; }
    T& operator()(int x, int y) { return values_[index(x, y)]; }
    const T& operator[](Point p) const { return (*this)(p.x, p.y); }
    T& operator[](Point p) { return (*this)(p.x, p.y); }

    std::span<const T> values() const noexcept { return values_; }
    std::span<T> values() noexcept { return values_; }

    template <typename U, typename OtherTag>
    bool same_shape(const Raster<U, OtherTag>& other) const noexcept {
        return width_ == other.width() && height_ == other.height();
    }

    bool operator==(const Raster&) const = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> values_;
};

struct DensityTag {};
struct GrayTag {};
struct BinaryTag {};
struct SimilarityTag {};
struct DistanceTag {};

/// Non-negative object density per pixel.
using DensityMap = Raster<double, DensityTag>;
/// 8-bit intensities.
using GrayImage = Raster<std::uint8_t, GrayTag>;
/// Values restricted to {0, 1}.
using BinaryImage = Raster<std::uint8_t, BinaryTag>;
/// Query-support similarity scores S(x, y).
using SimilarityField = Raster<double, SimilarityTag>;
/// Euclidean distance to the nearest background pixel.
using DistanceField = Raster<double, DistanceTag>;

/// Inclusive pixel box with a detector confidence.
struct BoundingBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;
    double confidence = 1.0;

    bool contains(int x, int y) const noexcept { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
    bool contains(Point p) const noexcept { return contains(p.x, p.y); }
    int box_width() const noexcept { return x1 - x0 + 1; }
    int box_height() const noexcept { return y1 - y0 + 1; }
    double area() const noexcept { return static_cast<double>(box_width()) * box_height(); }
    bool operator==(const BoundingBox&) const = default;
};

/// Decoder output: a binary mask plus its confidence score in [0, 1].
struct Mask {
    BinaryImage bits;
    double score = 0.0;
    bool operator==(const Mask&) const = default;
};

std::size_t foreground_count(const BinaryImage& image);

/// Tight inclusive box around the foreground; throws on an empty image.
BoundingBox tight_box(const BinaryImage& image, double confidence = 1.0);

/// Pixelwise OR; all inputs must share `width` x `height`.
BinaryImage merge_masks(std::span<const Mask> masks, int width, int height);

void validate(const DensityMap& dm);
void validate(const BinaryImage& image);
void validate(const BoundingBox& box, int width, int height);

/// Linear max-normalization with round-half-up; an all-zero map yields an
/// all-zero image.
GrayImage normalize_to_gray(const DensityMap& dm);

/// Pixelwise product of an image with a binary mask.
GrayImage mask_apply(const GrayImage& image, const BinaryImage& mask);

enum class RasterFormat { pgm, png, json_grid };

RasterFormat format_from_path(const std::filesystem::path& path);

using AnyRaster = std::variant<DensityMap, GrayImage>;

/// PGM and PNG decode to GrayImage; JSON grids decode to DensityMap.
AnyRaster read_raster(const std::filesystem::path& path, RasterFormat format);
GrayImage read_gray(const std::filesystem::path& path, RasterFormat format);
DensityMap read_density(const std::filesystem::path& path);

void write_raster(const GrayImage& image, const std::filesystem::path& path, RasterFormat format);
void write_raster(const DensityMap& dm, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const GrayImage& image);
GrayImage decode_png(std::span<const std::uint8_t> bytes);
std::string encode_json_grid(const DensityMap& dm);
DensityMap decode_json_grid(const std::string& text);

}  // namespace persense
