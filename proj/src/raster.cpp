#include "persense/raster.hpp"

#include <png.h>

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace persense {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + path.string());
}

class PgmReader {
public:
    PgmReader(std::span<const std::uint8_t> bytes, std::size_t base) : bytes_(bytes), base_(base) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    long read_int() {
        skip_space_and_comments();
        const std::size_t start = pos_;
        long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > std::numeric_limits<int>::max()) throw RasterIoError("PGM header value too large", base_ + start);
            ++pos_;
        }
        if (pos_ == start) throw RasterIoError("expected integer in PGM header", base_ + start);
        return value;
    }

    std::size_t pos() const { return pos_; }
    std::size_t absolute() const { return base_ + pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t base_;
    std::size_t pos_ = 0;
};

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

}  // namespace

std::size_t foreground_count(const BinaryImage& image) {
    return static_cast<std::size_t>(std::count(image.values().begin(), image.values().end(), std::uint8_t{1}));
}

BoundingBox tight_box(const BinaryImage& image, double confidence) {
    BoundingBox box{image.width(), image.height(), -1, -1, confidence};
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (!image(x, y)) continue;
            box.x0 = std::min(box.x0, x);
            box.y0 = std::min(box.y0, y);
            box.x1 = std::max(box.x1, x);
            box.y1 = std::max(box.y1, y);
        }
    }
    if (box.x1 < 0) throw Error("tight_box of an empty mask");
    return box;
}

BinaryImage merge_masks(std::span<const Mask> masks, int width, int height) {
    BinaryImage merged(width, height, 0);
    for (const auto& mask : masks) {
        if (mask.bits.width() != width || mask.bits.height() != height)
            throw Error("merge_masks: mask dimension mismatch");
        auto out = merged.values();
        auto in = mask.bits.values();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] |= in[i];
    }
    return merged;
}

void validate(const DensityMap& dm) {
    if (dm.empty()) throw Error("density map is empty");
    const auto values = dm.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]) || values[i] < 0.0)
            throw RasterIoError("density values must be finite and non-negative", i);
    }
}

void validate(const BinaryImage& image) {
    const auto values = image.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] > 1) throw RasterIoError("binary image values must be 0 or 1", i);
    }
}

void validate(const BoundingBox& box, int width, int height) {
    if (box.x0 > box.x1 || box.y0 > box.y1) throw Error("bounding box corners out of order");
    if (box.x0 < 0 || box.y0 < 0 || box.x1 >= width || box.y1 >= height)
        throw Error("bounding box outside image bounds");
    if (!(box.confidence >= 0.0 && box.confidence <= 1.0))
        throw Error("bounding box confidence outside [0,1]");
}

GrayImage normalize_to_gray(const DensityMap& dm) {
    validate(dm);
    const double vmax = *std::max_element(dm.values().begin(), dm.values().end());
    GrayImage gray(dm.width(), dm.height(), 0);
    if (vmax <= 0.0) return gray;
    auto out = gray.values();
    const auto in = dm.values();
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double scaled = std::floor(255.0 * (in[i] / vmax) + 0.5);
        out[i] = static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
    }
    return gray;
}

GrayImage mask_apply(const GrayImage& image, const BinaryImage& mask) {
    if (!image.same_shape(mask)) throw Error("mask_apply: dimension mismatch");
    GrayImage out(image.width(), image.height(), 0);
    const auto in = image.values();
    const auto m = mask.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < in.size(); ++i) dst[i] = static_cast<std::uint8_t>(in[i] * (m[i] ? 1 : 0));
    return out;
}

RasterFormat format_from_path(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm") return RasterFormat::pgm;
    if (ext == ".png") return RasterFormat::png;
    if (ext == ".json") return RasterFormat::json_grid;
    throw Error("unrecognized raster extension: " + path.string());
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
    const std::string header =
        "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), image.values().begin(), image.values().end());
    return bytes;
}

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        throw RasterIoError("not a binary PGM (missing P5 magic)", 0);
    PgmReader reader(bytes.subspan(2), 2);
    const long width = reader.read_int();
    const long height = reader.read_int();
    reader.skip_space_and_comments();
    const std::size_t maxval_offset = reader.absolute();
    const long maxval = reader.read_int();
    if (width <= 0 || height <= 0) throw RasterIoError("PGM dimensions must be positive", 2);
    if (maxval != 255) throw RasterIoError("unsupported PGM depth: maxval " + std::to_string(maxval), maxval_offset);
    // exactly one whitespace byte separates maxval from the pixel data
    const std::size_t separator = reader.absolute();
    if (separator >= bytes.size() || !std::isspace(bytes[separator]))
        throw RasterIoError("missing whitespace after PGM maxval", separator);
    const std::size_t data_start = separator + 1;
    const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() < data_start + count) throw RasterIoError("truncated PGM pixel data", bytes.size());
    std::vector<std::uint8_t> values(bytes.begin() + static_cast<std::ptrdiff_t>(data_start),
                                     bytes.begin() + static_cast<std::ptrdiff_t>(data_start + count));
    return GrayImage(static_cast<int>(width), static_cast<int>(height), std::move(values));
}

std::vector<std::uint8_t> encode_png(const GrayImage& image) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width());
    png.height = static_cast<png_uint_32>(image.height());
    png.format = PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.values().data(), 0, nullptr))
        throw Error(std::string("PNG encode failed: ") + png.message);
    std::vector<std::uint8_t> bytes(size);
    if (!png_image_write_to_memory(&png, bytes.data(), &size, 0, image.values().data(), 0, nullptr))
        throw Error(std::string("PNG encode failed: ") + png.message);
    bytes.resize(size);
    return bytes;
}

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 33 || std::memcmp(bytes.data(), kPngSignature, 8) != 0)
        throw RasterIoError("not a PNG file", 0);
    if (std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) throw RasterIoError("PNG missing IHDR", 12);
    const int bit_depth = bytes[24];
    const int color_type = bytes[25];
    if (bit_depth != 8) throw RasterIoError("unsupported PNG bit depth " + std::to_string(bit_depth), 24);
    if (color_type != 0) throw RasterIoError("unsupported PNG color type " + std::to_string(color_type), 25);

    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
        throw RasterIoError(std::string("PNG decode failed: ") + png.message, 0);
    png.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> values(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, values.data(), 0, nullptr)) {
        png_image_free(&png);
        throw RasterIoError(std::string("PNG decode failed: ") + png.message, 33);
    }
    return GrayImage(static_cast<int>(png.width), static_cast<int>(png.height), std::move(values));
}

std::string encode_json_grid(const DensityMap& dm) {
    validate(dm);
    nlohmann::json j;
    j["width"] = dm.width();
    j["height"] = dm.height();
    j["values"] = std::vector<double>(dm.values().begin(), dm.values().end());
    return j.dump();
}

DensityMap decode_json_grid(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw RasterIoError(std::string("malformed JSON grid: ") + e.what(), e.byte);
    }
    if (!j.is_object() || !j.contains("width") || !j.contains("height") || !j.contains("values"))
        throw RasterIoError("JSON grid needs width, height and values", 0);
    if (!j["width"].is_number_integer() || !j["height"].is_number_integer() || !j["values"].is_array())
        throw RasterIoError("JSON grid fields have the wrong type", 0);
    const int width = j["width"].get<int>();
    const int height = j["height"].get<int>();
    if (width <= 0 || height <= 0) throw RasterIoError("JSON grid dimensions must be positive", 0);
    const auto& arr = j["values"];
    const std::size_t expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (arr.size() != expected)
        throw RasterIoError("JSON grid has " + std::to_string(arr.size()) + " values, expected " +
                                std::to_string(expected),
                            std::min(arr.size(), expected));
    std::vector<double> values(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        if (!arr[i].is_number()) throw RasterIoError("JSON grid value is not a number", i);
        values[i] = arr[i].get<double>();
    }
    DensityMap dm(width, height, std::move(values));
    validate(dm);
    return dm;
}

AnyRaster read_raster(const std::filesystem::path& path, RasterFormat format) {
    if (format == RasterFormat::json_grid) return read_density(path);
    return read_gray(path, format);
}

GrayImage read_gray(const std::filesystem::path& path, RasterFormat format) {
    const auto bytes = read_file(path);
    switch (format) {
        case RasterFormat::pgm: return decode_pgm(bytes);
        case RasterFormat::png: return decode_png(bytes);
        case RasterFormat::json_grid: break;
    }
    throw Error("JSON grids hold density maps, not gray images: " + path.string());
}

DensityMap read_density(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return decode_json_grid(std::string(bytes.begin(), bytes.end()));
}

void write_raster(const GrayImage& image, const std::filesystem::path& path, RasterFormat format) {
    switch (format) {
        case RasterFormat::pgm: write_file(path, encode_pgm(image)); return;
        case RasterFormat::png: write_file(path, encode_png(image)); return;
        case RasterFormat::json_grid: break;
    }
    throw Error("gray images are written as PGM or PNG");
}

void write_raster(const DensityMap& dm, const std::filesystem::path& path) {
    const auto text = encode_json_grid(dm);
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace persense
