#pragma once

// Slow, obviously-correct reference implementations used by the tests.

#include "persense/idm.hpp"
#include "persense/imgproc.hpp"
#include "persense/ppsm.hpp"
#include "persense/raster.hpp"
#include "persense/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using namespace persense;

struct Component {
    std::vector<Point> pixels;    // raster order
    std::vector<Point> boundary;  // raster order
};

/// Breadth-first flood fill, seeds visited in raster order.
inline std::vector<Component> components(const BinaryImage& img) {
    const int w = img.width();
    const int h = img.height();
    std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
    std::vector<Component> out;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!img(x, y) || label[y * w + x] >= 0) continue;
            const int id = static_cast<int>(out.size());
            out.emplace_back();
            std::deque<Point> queue{{x, y}};
            label[y * w + x] = id;
            while (!queue.empty()) {
                const Point p = queue.front();
                queue.pop_front();
                out.back().pixels.push_back(p);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = p.x + dx;
                        const int ny = p.y + dy;
                        if (!img.contains(nx, ny) || !img(nx, ny) || label[ny * w + nx] >= 0) continue;
                        label[ny * w + nx] = id;
                        queue.push_back({nx, ny});
                    }
                }
            }
        }
    }
    for (auto& c : out) {
        std::sort(c.pixels.begin(), c.pixels.end(),
                  [](Point a, Point b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
        std::set<std::pair<int, int>> members;
        for (auto p : c.pixels) members.insert({p.x, p.y});
        for (auto p : c.pixels) {
            const int n4[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
            for (auto& d : n4) {
                if (!members.count({p.x + d[0], p.y + d[1]})) {
                    c.boundary.push_back(p);
                    break;
                }
            }
        }
    }
    return out;
}

/// Distance to the nearest zero pixel, trying every zero pixel and every
/// pixel of the one-pixel ring around the image.
inline DistanceField distance_transform(const BinaryImage& img) {
    const int w = img.width();
    const int h = img.height();
    std::vector<Point> zeros;
    for (int y = -1; y <= h; ++y)
        for (int x = -1; x <= w; ++x)
            if (!img.contains(x, y) || !img(x, y)) zeros.push_back({x, y});
    DistanceField out(w, h, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!img(x, y)) continue;
            long best = std::numeric_limits<long>::max();
            for (auto z : zeros) {
                const long dx = x - z.x;
                const long dy = y - z.y;
                best = std::min(best, dx * dx + dy * dy);
            }
            out(x, y) = std::sqrt(static_cast<double>(best));
        }
    }
    return out;
}

/// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b, double eps, int depth = 50) {
    auto rule = [&](double lo, double hi, double flo, double fmid, double fhi) {
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    };
    std::function<double(double, double, double, double, double, double, double, int)> rec =
        [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double tol, int d) {
            const double mid = 0.5 * (lo + hi);
            const double lm = 0.5 * (lo + mid);
            const double rm = 0.5 * (mid + hi);
            const double flm = f(lm);
            const double frm = f(rm);
            const double left = rule(lo, mid, flo, flm, fmid);
            const double right = rule(mid, hi, fmid, frm, fhi);
            if (d <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
                return left + right + (left + right - whole) / 15.0;
            return rec(lo, mid, flo, flm, fmid, left, tol / 2.0, d - 1) +
                   rec(mid, hi, fmid, frm, fhi, right, tol / 2.0, d - 1);
        };
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    return rec(a, b, fa, fm, fb, rule(a, b, fa, fm, fb), eps, depth);
}

/// Phi(z) as 1/2 + integral of the normal density from 0 to z.
inline double normal_cdf(double z) {
    const auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); };
    if (z == 0.0) return 0.5;
    const double part = simpson(pdf, 0.0, std::abs(z), 1e-13);
    return z > 0 ? 0.5 + part : 0.5 - part;
}

/// Line-by-line transcription of the selection pseudo-code: one append per
/// admitting box, fixed sqrt(2) normalization.
inline std::vector<Point> ppsm_transcription(const std::vector<CandidatePrompt>& candidate_pp,
                                             const SimilarityField& similarity_matrix, double object_count,
                                             const std::vector<BoundingBox>& grounded_detections) {
    double max_score = -std::numeric_limits<double>::infinity();
    for (double v : similarity_matrix.values()) max_score = std::max(max_score, v);
    std::vector<Point> selected_pp;
    const double sim_threshold = max_score / (object_count / std::numbers::sqrt2);
    for (const auto& pp : candidate_pp) {
        const double pp_similarity = similarity_matrix(pp.x, pp.y);
        for (const auto& box : grounded_detections) {
            const bool within = pp.x >= box.x0 && pp.x <= box.x1 && pp.y >= box.y0 && pp.y <= box.y1;
            if (pp_similarity > sim_threshold && within) selected_pp.push_back({pp.x, pp.y});
        }
    }
    return selected_pp;
}

/// Keeps the first occurrence of every pixel.
inline std::vector<Point> dedupe(const std::vector<Point>& pts) {
    std::set<std::pair<int, int>> seen;
    std::vector<Point> out;
    for (auto p : pts)
        if (seen.insert({p.x, p.y}).second) out.push_back(p);
    return out;
}

/// Random binary image with blobby structure: union of random disks and
/// rectangles over a sparse noise floor.
inline BinaryImage random_binary(CounterRng& rng, int w, int h) {
    BinaryImage img(w, h, 0);
    const double noise = rng.uniform(0.0, 0.3);
    for (auto& v : img.values()) v = rng.bernoulli(noise) ? 1 : 0;
    const int shapes = rng.uniform_int(0, 6);
    for (int s = 0; s < shapes; ++s) {
        const int cx = rng.uniform_int(0, w - 1);
        const int cy = rng.uniform_int(0, h - 1);
        const int r = rng.uniform_int(1, std::max(1, std::min(w, h) / 3));
        const bool disk = rng.bernoulli(0.5);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const bool in = disk ? (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r
                                     : std::abs(x - cx) <= r && std::abs(y - cy) <= r / 2;
                if (in) img(x, y) = 1;
            }
    }
    return img;
}

}  // namespace oracle
