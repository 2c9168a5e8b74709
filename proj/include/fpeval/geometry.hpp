#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fpeval/errors.hpp"

namespace fpeval {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// One instance outline. An instance may consist of several disjoint simple
/// polygons; each polygon needs at least 3 vertices with finite coordinates.
struct PolygonSet {
    std::vector<std::vector<Point>> polygons;

    bool empty() const { return polygons.empty(); }
};

/// Axis-aligned box, top-left origin, in pixels.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
};

/// Binary segmentation mask stored as uncompressed run-length counts in
/// column-major scan order. Runs alternate zero-run / one-run; the first run
/// counts zeros and may be 0. Stored runs are always canonical: no
/// zero-length run other than a possible leading one, and decode→encode is
/// the identity.
class BinaryMask {
public:
    BinaryMask() = default;

    /// Builds a mask from run counts. Counts are canonicalized; throws
    /// GeometryError if they do not sum to height×width.
    static BinaryMask from_runs(int height, int width, const std::vector<uint32_t>& runs);

    /// Encodes a dense row-major grid (non-zero byte = set pixel).
    static BinaryMask from_grid(int height, int width, const std::vector<uint8_t>& grid);

    int height() const { return height_; }
    int width() const { return width_; }
    const std::vector<uint32_t>& runs() const { return runs_; }

    /// Count of set pixels (sum of one-runs).
    uint64_t area() const;

    /// Dense row-major expansion, grid[r * width + c].
    std::vector<uint8_t> decode() const;

    bool pixel(int row, int col) const;

    /// Tight bounds of the set pixels; zero-size box at origin for an empty mask.
    BBox bounds() const;

    bool operator==(const BinaryMask& other) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<uint32_t> runs_;
};

/// Overlap ratio |a∧b| / |a∨b| computed directly on the run form.
/// Returns 0 when both masks are empty; throws on dimension mismatch.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

/// Box overlap ratio; 0 when the union is empty.
double bbox_iou(const BBox& a, const BBox& b);

/// Pixel-center rasterization: pixel (r, c) is set iff its center
/// (c + 0.5, r + 0.5) lies inside the even-odd fill of at least one polygon.
BinaryMask rasterize(const PolygonSet& p, int height, int width);

/// Sum over polygons of the absolute shoelace area.
double polygon_area(const PolygonSet& p);

/// Sum of closed-loop edge lengths over all polygons.
double polygon_perimeter(const PolygonSet& p);

/// Perimeter normalized by the perimeter of the equal-area disk:
/// perimeter / sqrt(4π·area). 1 for a disk, larger for intricate outlines.
/// Returns nullopt for zero-area input (the instance is excluded upstream).
std::optional<double> boundary_complexity(const PolygonSet& p);

/// sqrt(instance_area / image_area). Throws if the area is negative or
/// exceeds the image area.
double relative_size(double instance_area, int image_height, int image_width);

/// Vertex count per polygon, skipping polygons with exactly zero area.
std::vector<int> vertices_per_polygon(const PolygonSet& p);

/// Tight bounds of all vertices; zero-size box for an empty set.
BBox polygon_bounds(const PolygonSet& p);

} // namespace fpeval
