#include "persense/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace persense {

namespace {

constexpr int kNeighbours8[8][2] = {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}};
constexpr int kNeighbours4[4][2] = {{0, -1}, {-1, 0}, {1, 0}, {0, 1}};

// Felzenszwalb-Huttenlocher lower envelope of parabolas; f holds squared
// distances (or +inf), d receives the 1D squared distance transform.
void squared_edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                    std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    constexpr double inf = std::numeric_limits<double>::infinity();
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -inf;
            z[1] = inf;
            continue;
        }
        double s = 0.0;
        while (true) {
            const int p = v[k];
            s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
            if (s <= z[k] && k > 0) {
                --k;
            } else {
                break;
            }
        }
        if (s <= z[k]) {
            // k == 0 and the new parabola dominates everywhere
            v[0] = q;
            z[0] = -inf;
            z[1] = inf;
            continue;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    if (k < 0) {
        std::fill(d.begin(), d.end(), inf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double diff = q - v[j];
        d[q] = diff * diff + f[v[j]];
    }
}

}  // namespace

BinaryImage threshold_binary(const GrayImage& gray, int threshold) {
    if (threshold < 0 || threshold > 255) throw Error("threshold must lie in [0,255]");
    BinaryImage out(gray.width(), gray.height(), 0);
    const auto in = gray.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < in.size(); ++i) dst[i] = in[i] >= threshold ? 1 : 0;
    return out;
}

BinaryImage erode3x3(const BinaryImage& binary) {
    const int w = binary.width();
    const int h = binary.height();
    BinaryImage out(w, h, 0);
    for (int y = 1; y + 1 < h; ++y) {
        for (int x = 1; x + 1 < w; ++x) {
            std::uint8_t v = 1;
            for (int dy = -1; dy <= 1 && v; ++dy)
                for (int dx = -1; dx <= 1 && v; ++dx) v = binary(x + dx, y + dy);
            out(x, y) = v;
        }
    }
    return out;
}

Contour make_contour(std::vector<Point> pixels, int width, int height) {
    if (pixels.empty()) throw Error("contour needs at least one pixel");
    std::sort(pixels.begin(), pixels.end(), [](Point a, Point b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });

    Contour c;
    c.bounds = BoundingBox{pixels.front().x, pixels.front().y, pixels.front().x, pixels.front().y, 1.0};
    for (const auto p : pixels) {
        c.moments.m00 += 1.0;
        c.moments.m10 += p.x;
        c.moments.m01 += p.y;
        c.bounds.x0 = std::min(c.bounds.x0, p.x);
        c.bounds.x1 = std::max(c.bounds.x1, p.x);
        c.bounds.y1 = std::max(c.bounds.y1, p.y);
    }
    // membership grid local to the bounding box
    const int bw = c.bounds.box_width();
    const int bh = c.bounds.box_height();
    std::vector<std::uint8_t> member(static_cast<std::size_t>(bw) * bh, 0);
    auto is_member = [&](int x, int y) {
        if (x < c.bounds.x0 || x > c.bounds.x1 || y < c.bounds.y0 || y > c.bounds.y1) return false;
        return member[static_cast<std::size_t>(y - c.bounds.y0) * bw + (x - c.bounds.x0)] != 0;
    };
    for (const auto p : pixels) member[static_cast<std::size_t>(p.y - c.bounds.y0) * bw + (p.x - c.bounds.x0)] = 1;
    for (const auto p : pixels) {
        for (const auto& d : kNeighbours4) {
            const int nx = p.x + d[0];
            const int ny = p.y + d[1];
            if (nx < 0 || ny < 0 || nx >= width || ny >= height || !is_member(nx, ny)) {
                c.boundary.push_back(p);
                break;
            }
        }
    }
    c.area = static_cast<double>(pixels.size());
    c.pixels = std::move(pixels);
    return c;
}

std::vector<Contour> find_contours(const BinaryImage& binary) {
    const int w = binary.width();
    const int h = binary.height();
    std::vector<int> label(binary.size(), -1);
    std::vector<Contour> contours;
    std::vector<Point> stack;
    int next = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            if (!binary(x, y) || label[idx] >= 0) continue;
            std::vector<Point> pixels;
            label[idx] = next;
            stack.push_back({x, y});
            while (!stack.empty()) {
                const Point p = stack.back();
                stack.pop_back();
                pixels.push_back(p);
                for (const auto& d : kNeighbours8) {
                    const int nx = p.x + d[0];
                    const int ny = p.y + d[1];
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
                    if (binary(nx, ny) && label[nidx] < 0) {
                        label[nidx] = next;
                        stack.push_back({nx, ny});
                    }
                }
            }
            contours.push_back(make_contour(std::move(pixels), w, h));
            ++next;
        }
    }
    return contours;
}

DistanceField distance_transform(const BinaryImage& binary) {
    // Pad by one background pixel on every side so the exterior counts as background.
    const int w = binary.width() + 2;
    const int h = binary.height() + 2;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> grid(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < binary.height(); ++y)
        for (int x = 0; x < binary.width(); ++x)
            if (binary(x, y)) grid[static_cast<std::size_t>(y + 1) * w + (x + 1)] = inf;

    const int n = std::max(w, h);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);

    f.resize(h);
    d.resize(h);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) f[y] = grid[static_cast<std::size_t>(y) * w + x];
        squared_edt_1d(f, d, v, z);
        for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = d[y];
    }
    f.resize(w);
    d.resize(w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) f[x] = grid[static_cast<std::size_t>(y) * w + x];
        squared_edt_1d(f, d, v, z);
        for (int x = 0; x < w; ++x) grid[static_cast<std::size_t>(y) * w + x] = d[x];
    }

    DistanceField out(binary.width(), binary.height(), 0.0);
    for (int y = 0; y < binary.height(); ++y)
        for (int x = 0; x < binary.width(); ++x)
            out(x, y) = std::sqrt(grid[static_cast<std::size_t>(y + 1) * w + (x + 1)]);
    return out;
}

Centroid centroid(const Contour& contour) {
    const double denom = contour.moments.m00 + kCentroidEpsilon;
    return {contour.moments.m10 / denom, contour.moments.m01 / denom};
}

double std_normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

BinaryImage contour_mask(const Contour& contour, int width, int height) {
    BinaryImage mask(width, height, 0);
    for (const auto p : contour.pixels) mask[p] = 1;
    return mask;
}

}  // namespace persense
