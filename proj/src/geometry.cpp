#include "fpeval/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace fpeval {

namespace {

void check_dims(int height, int width) {
    if (height <= 0 || width <= 0) {
        throw GeometryError("mask dimensions must be positive");
    }
}

void check_polygons(const PolygonSet& p) {
    for (const auto& poly : p.polygons) {
        if (poly.size() < 3) {
            throw GeometryError("polygon needs at least 3 vertices");
        }
        for (const auto& v : poly) {
            if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
                throw GeometryError("polygon vertex is not finite");
            }
        }
    }
}

double shoelace_abs(const std::vector<Point>& poly) {
    double twice = 0.0;
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    return std::abs(twice) / 2.0;
}

} // namespace

BinaryMask BinaryMask::from_runs(int height, int width, const std::vector<uint32_t>& runs) {
    check_dims(height, width);
    uint64_t total = 0;
    for (uint32_t r : runs) total += r;
    if (total != static_cast<uint64_t>(height) * static_cast<uint64_t>(width)) {
        throw GeometryError("corrupt mask: run counts do not sum to height*width");
    }

    BinaryMask m;
    m.height_ = height;
    m.width_ = width;
    // Canonicalize: collapse to (value, length) segments, dropping empty runs
    // and merging equal-valued neighbours, then rebuild with a leading
    // zero-run (possibly of length 0).
    std::vector<std::pair<bool, uint64_t>> segments;
    for (size_t i = 0; i < runs.size(); ++i) {
        if (runs[i] == 0) continue;
        const bool value = (i % 2) == 1;
        if (!segments.empty() && segments.back().first == value) {
            segments.back().second += runs[i];
        } else {
            segments.emplace_back(value, runs[i]);
        }
    }
    if (segments.empty() || segments.front().first) {
        m.runs_.push_back(0);
    }
    for (const auto& [value, length] : segments) {
        (void)value;
        m.runs_.push_back(static_cast<uint32_t>(length));
    }
    return m;
}

BinaryMask BinaryMask::from_grid(int height, int width, const std::vector<uint8_t>& grid) {
    check_dims(height, width);
    if (grid.size() != static_cast<size_t>(height) * static_cast<size_t>(width)) {
        throw GeometryError("grid size does not match dimensions");
    }
    BinaryMask m;
    m.height_ = height;
    m.width_ = width;
    uint32_t run = 0;
    bool value = false; // first run counts zeros
    for (int c = 0; c < width; ++c) {
        for (int r = 0; r < height; ++r) {
            const bool bit = grid[static_cast<size_t>(r) * width + c] != 0;
            if (bit == value) {
                ++run;
            } else {
                m.runs_.push_back(run);
                run = 1;
                value = bit;
            }
        }
    }
    m.runs_.push_back(run);
    return m;
}

uint64_t BinaryMask::area() const {
    uint64_t area = 0;
    for (size_t i = 1; i < runs_.size(); i += 2) area += runs_[i];
    return area;
}

std::vector<uint8_t> BinaryMask::decode() const {
    std::vector<uint8_t> grid(static_cast<size_t>(height_) * static_cast<size_t>(width_), 0);
    uint64_t pos = 0;
    for (size_t i = 0; i < runs_.size(); ++i) {
        const bool value = (i % 2) == 1;
        for (uint32_t k = 0; k < runs_[i]; ++k, ++pos) {
            if (value) {
                const int c = static_cast<int>(pos / height_);
                const int r = static_cast<int>(pos % height_);
                grid[static_cast<size_t>(r) * width_ + c] = 1;
            }
        }
    }
    return grid;
}

bool BinaryMask::pixel(int row, int col) const {
    if (row < 0 || row >= height_ || col < 0 || col >= width_) return false;
    const uint64_t idx = static_cast<uint64_t>(col) * height_ + row;
    uint64_t pos = 0;
    for (size_t i = 0; i < runs_.size(); ++i) {
        pos += runs_[i];
        if (idx < pos) return (i % 2) == 1;
    }
    return false;
}

BBox BinaryMask::bounds() const {
    int min_r = height_, max_r = -1, min_c = width_, max_c = -1;
    uint64_t pos = 0;
    for (size_t i = 0; i < runs_.size(); ++i) {
        const uint64_t end = pos + runs_[i];
        if (i % 2 == 1 && runs_[i] > 0) {
            const int c0 = static_cast<int>(pos / height_);
            const int c1 = static_cast<int>((end - 1) / height_);
            min_c = std::min(min_c, c0);
            max_c = std::max(max_c, c1);
            if (c0 == c1) {
                min_r = std::min(min_r, static_cast<int>(pos % height_));
                max_r = std::max(max_r, static_cast<int>((end - 1) % height_));
            } else {
                // run spans full columns in between
                min_r = 0;
                max_r = height_ - 1;
            }
        }
        pos = end;
    }
    if (max_r < 0) return BBox{0, 0, 0, 0};
    return BBox{static_cast<double>(min_c), static_cast<double>(min_r),
                static_cast<double>(max_c - min_c + 1), static_cast<double>(max_r - min_r + 1)};
}

namespace {

uint64_t rle_intersection(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b) {
    uint64_t inter = 0;
    size_t ia = 0, ib = 0;
    uint64_t start_a = 0, start_b = 0;
    while (ia < a.size() && ib < b.size()) {
        const uint64_t end_a = start_a + a[ia];
        const uint64_t end_b = start_b + b[ib];
        if ((ia % 2 == 1) && (ib % 2 == 1)) {
            const uint64_t lo = std::max(start_a, start_b);
            const uint64_t hi = std::min(end_a, end_b);
            if (hi > lo) inter += hi - lo;
        }
        if (end_a <= end_b) {
            start_a = end_a;
            ++ia;
        } else {
            start_b = end_b;
            ++ib;
        }
    }
    return inter;
}

} // namespace

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw GeometryError("mask_iou: dimension mismatch");
    }
    const uint64_t inter = rle_intersection(a.runs(), b.runs());
    const uint64_t uni = a.area() + b.area() - inter;
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double bbox_iou(const BBox& a, const BBox& b) {
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

BinaryMask rasterize(const PolygonSet& p, int height, int width) {
    check_dims(height, width);
    check_polygons(p);

    std::vector<uint8_t> grid(static_cast<size_t>(height) * static_cast<size_t>(width), 0);
    std::vector<double> crossings;
    for (const auto& poly : p.polygons) {
        const size_t n = poly.size();
        for (int r = 0; r < height; ++r) {
            const double y = r + 0.5;
            crossings.clear();
            for (size_t i = 0; i < n; ++i) {
                const Point& a = poly[i];
                const Point& b = poly[(i + 1) % n];
                if (a.y == b.y) continue; // horizontal edge never crosses a center line
                const double y0 = std::min(a.y, b.y);
                const double y1 = std::max(a.y, b.y);
                if (y < y0 || y >= y1) continue; // half-open in y
                const double t = (y - a.y) / (b.y - a.y);
                crossings.push_back(a.x + t * (b.x - a.x));
            }
            if (crossings.empty()) continue;
            std::sort(crossings.begin(), crossings.end());
            for (size_t i = 0; i + 1 < crossings.size(); i += 2) {
                // centers x = c + 0.5 inside [lo, hi)
                const double lo = crossings[i];
                const double hi = crossings[i + 1];
                int c0 = static_cast<int>(std::ceil(lo - 0.5));
                int c1 = static_cast<int>(std::ceil(hi - 0.5)); // exclusive
                c0 = std::max(c0, 0);
                c1 = std::min(c1, width);
                for (int c = c0; c < c1; ++c) {
                    grid[static_cast<size_t>(r) * width + c] = 1;
                }
            }
        }
    }
    return BinaryMask::from_grid(height, width, grid);
}

double polygon_area(const PolygonSet& p) {
    check_polygons(p);
    double area = 0.0;
    for (const auto& poly : p.polygons) area += shoelace_abs(poly);
    return area;
}

double polygon_perimeter(const PolygonSet& p) {
    check_polygons(p);
    double perimeter = 0.0;
    for (const auto& poly : p.polygons) {
        const size_t n = poly.size();
        for (size_t i = 0; i < n; ++i) {
            const Point& a = poly[i];
            const Point& b = poly[(i + 1) % n];
            perimeter += std::hypot(b.x - a.x, b.y - a.y);
        }
    }
    return perimeter;
}

std::optional<double> boundary_complexity(const PolygonSet& p) {
    const double area = polygon_area(p);
    if (area <= 0.0) return std::nullopt;
    return polygon_perimeter(p) / std::sqrt(4.0 * std::numbers::pi * area);
}

double relative_size(double instance_area, int image_height, int image_width) {
    check_dims(image_height, image_width);
    const double image_area = static_cast<double>(image_height) * static_cast<double>(image_width);
    if (!(instance_area >= 0.0) || instance_area > image_area) {
        throw ContractError("relative_size: instance area outside [0, image area]");
    }
    return std::sqrt(instance_area / image_area);
}

std::vector<int> vertices_per_polygon(const PolygonSet& p) {
    check_polygons(p);
    std::vector<int> counts;
    counts.reserve(p.polygons.size());
    for (const auto& poly : p.polygons) {
        if (shoelace_abs(poly) == 0.0) continue;
        counts.push_back(static_cast<int>(poly.size()));
    }
    return counts;
}

BBox polygon_bounds(const PolygonSet& p) {
    if (p.polygons.empty()) return BBox{0, 0, 0, 0};
    double min_x = std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    double max_y = -std::numeric_limits<double>::infinity();
    for (const auto& poly : p.polygons) {
        for (const auto& v : poly) {
            min_x = std::min(min_x, v.x);
            min_y = std::min(min_y, v.y);
            max_x = std::max(max_x, v.x);
            max_y = std::max(max_y, v.y);
        }
    }
    return BBox{min_x, min_y, max_x - min_x, max_y - min_y};
}

} // namespace fpeval
