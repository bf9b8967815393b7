#pragma once

#include "persense/raster.hpp"

#include <vector>

namespace persense {

struct Moments {
    double m00 = 0.0;
    double m10 = 0.0;
    double m01 = 0.0;
};

/// One 8-connected foreground component. Pixels are stored in raster order;
/// the boundary holds the pixels with at least one 4-neighbour outside the
/// component (image exterior included), also in raster order.
struct Contour {
    std::vector<Point> pixels;
    std::vector<Point> boundary;
    double area = 0.0;
    Moments moments;
    BoundingBox bounds;
};

struct Centroid {
    double x = 0.0;
    double y = 0.0;
};

/// Additive guard in the moment-centroid denominator.
inline constexpr double kCentroidEpsilon = 1e-5;

/// 1 where gray >= threshold.
BinaryImage threshold_binary(const GrayImage& gray, int threshold);

/// 3x3 min filter; pixels outside the image count as background.
BinaryImage erode3x3(const BinaryImage& binary);

/// External 8-connected components ordered by their first pixel in raster
/// order (smallest row, then smallest column).
std::vector<Contour> find_contours(const BinaryImage& binary);

/// Builds a contour from an explicit pixel set (raster order not required).
Contour make_contour(std::vector<Point> pixels, int width, int height);

/// Exact Euclidean distance from every foreground pixel to the nearest
/// background pixel, with the image exterior treated as background.
DistanceField distance_transform(const BinaryImage& binary);

/// Moment centroid M10/(M00+eps), M01/(M00+eps) with unit intensity.
Centroid centroid(const Contour& contour);

/// Standard normal CDF.
double std_normal_cdf(double z);

/// Rasterizes a contour's pixels into a binary image of the given size.
BinaryImage contour_mask(const Contour& contour, int width, int height);

}  // namespace persense
