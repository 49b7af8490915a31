// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "difftext/errors.hpp"
#include "difftext/tensor.hpp"

namespace difftext {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

using Polygon = std::vector<Point>;

// Integer pixel rectangle, origin top-left, half-open [x, x+w) x [y, y+h).
struct Box {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    bool intersects(const Box& o) const {
        return x < o.x + o.w && o.x < x + w && y < o.y + o.h && o.y < y + h;
    }
    bool contains(const Box& o) const {
        return o.x >= x && o.y >= y && o.x + o.w <= x + w && o.y + o.h <= y + h;
    }
    long long area() const { return static_cast<long long>(w) * h; }
    bool operator==(const Box& o) const = default;
};

inline double polygon_area(const Polygon& poly) {
    double acc = 0.0;
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    return std::abs(acc) * 0.5;
}

// Crossing-number test: a point is inside iff a ray cast toward +x crosses an
// odd number of edges. The same convention is used by the rasterizer so pixel
// coverage is consistent everywhere (pixel covered iff its center is inside).
inline bool point_in_polygon(double px, double py, const Polygon& poly) {
    bool inside = false;
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % n];
        if ((a.y > py) != (b.y > py)) {
            const double xint = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y);
            if (px < xint) inside = !inside;
        }
    }
    return inside;
}

// Scanline fill over pixel centers (x + 0.5, y + 0.5).
inline Mask rasterize_polygon(const Polygon& poly, int height, int width) {
    if (poly.size() < 3) throw AnnotationError("rasterize_polygon: need at least 3 vertices");
    Mask mask = Mask::Zero(height, width);
    const size_t n = poly.size();
    std::vector<double> xs;
    for (int y = 0; y < height; ++y) {
        const double cy = y + 0.5;
        xs.clear();
        for (size_t i = 0; i < n; ++i) {
            const Point& a = poly[i];
            const Point& b = poly[(i + 1) % n];
            if ((a.y > cy) != (b.y > cy)) {
                xs.push_back(a.x + (cy - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        std::sort(xs.begin(), xs.end());
        for (size_t i = 0; i + 1 < xs.size(); i += 2) {
            // Covered pixels have xs[i] <= x + 0.5 < xs[i+1].
            int x0 = static_cast<int>(std::ceil(xs[i] - 0.5));
            int x1 = static_cast<int>(std::ceil(xs[i + 1] - 0.5)) - 1;
            x0 = std::max(x0, 0);
            x1 = std::min(x1, width - 1);
            for (int x = x0; x <= x1; ++x) mask(y, x) = 1;
        }
    }
    return mask;
}

inline Box polygon_bbox(const Polygon& poly) {
    double minx = std::numeric_limits<double>::infinity(), miny = minx;
    double maxx = -minx, maxy = -minx;
    for (const Point& p : poly) {
        minx = std::min(minx, p.x);
        miny = std::min(miny, p.y);
        maxx = std::max(maxx, p.x);
        maxy = std::max(maxy, p.y);
    }
    const int x0 = static_cast<int>(std::floor(minx));
    const int y0 = static_cast<int>(std::floor(miny));
    const int x1 = static_cast<int>(std::ceil(maxx));
    const int y1 = static_cast<int>(std::ceil(maxy));
    return Box{x0, y0, x1 - x0, y1 - y0};
}

inline bool polygon_in_bounds(const Polygon& poly, int width, int height) {
    for (const Point& p : poly) {
        if (p.x < 0.0 || p.y < 0.0 || p.x > width || p.y > height) return false;
    }
    return true;
}

namespace detail {
inline double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d) {
    const double d1 = cross(c, d, a);
    const double d2 = cross(c, d, b);
    const double d3 = cross(a, b, c);
    const double d4 = cross(a, b, d);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
           ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}
}  // namespace detail

// A quad is simple when opposite edges do not cross and it has nonzero area.
inline bool quad_is_simple(const Polygon& quad) {
    if (quad.size() != 4) return false;
    if (polygon_area(quad) <= 0.0) return false;
    return !detail::segments_intersect(quad[0], quad[1], quad[2], quad[3]) &&
           !detail::segments_intersect(quad[1], quad[2], quad[3], quad[0]);
}

// IoU on the shared absolute pixel grid (joint bounding box of both polygons).
inline double raster_iou(const Polygon& a, const Polygon& b) {
    Box ba = polygon_bbox(a);
    Box bb = polygon_bbox(b);
    const int x0 = std::min(ba.x, bb.x);
    const int y0 = std::min(ba.y, bb.y);
    const int x1 = std::max(ba.x + ba.w, bb.x + bb.w);
    const int y1 = std::max(ba.y + ba.h, bb.y + bb.h);
    const int w = std::max(1, x1 - x0);
    const int h = std::max(1, y1 - y0);
    auto shift = [&](const Polygon& p) {
        Polygon out = p;
        for (Point& pt : out) {
            pt.x -= x0;
            pt.y -= y0;
        }
        return out;
    };
    const Mask ma = rasterize_polygon(shift(a), h, w);
    const Mask mb = rasterize_polygon(shift(b), h, w);
    long long inter = 0, uni = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const bool pa = ma(y, x) != 0;
            const bool pb = mb(y, x) != 0;
            inter += (pa && pb);
            uni += (pa || pb);
        }
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline std::vector<Point> convex_hull(std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    const size_t n = pts.size();
    if (n < 3) return pts;
    std::vector<Point> hull(2 * n);
    size_t k = 0;
    for (size_t i = 0; i < n; ++i) {
        while (k >= 2 && detail::cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    const size_t lower = k + 1;
    for (size_t i = n - 1; i-- > 0;) {
        while (k >= lower && detail::cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

// Minimum-area enclosing rectangle by rotating calipers over hull edges.
inline Polygon min_area_quad(const Polygon& poly) {
    if (poly.size() < 3) throw AnnotationError("min_area_quad: need at least 3 vertices");
    std::vector<Point> hull = convex_hull(poly);
    if (hull.size() < 3) {
        Box b = polygon_bbox(poly);
        const double x0 = b.x, y0 = b.y, x1 = b.x + std::max(1, b.w), y1 = b.y + std::max(1, b.h);
        return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    }
    double best_area = std::numeric_limits<double>::infinity();
    Polygon best;
    const size_t n = hull.size();
    for (size_t i = 0; i < n; ++i) {
        const Point& a = hull[i];
        const Point& b = hull[(i + 1) % n];
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        if (len == 0.0) continue;
        const double ux = (b.x - a.x) / len, uy = (b.y - a.y) / len;  // edge direction
        const double vx = -uy, vy = ux;                               // normal
        double lo_u = std::numeric_limits<double>::infinity(), hi_u = -lo_u;
        double lo_v = lo_u, hi_v = -lo_u;
        for (const Point& p : hull) {
            const double pu = (p.x - a.x) * ux + (p.y - a.y) * uy;
            const double pv = (p.x - a.x) * vx + (p.y - a.y) * vy;
            lo_u = std::min(lo_u, pu);
            hi_u = std::max(hi_u, pu);
            lo_v = std::min(lo_v, pv);
            hi_v = std::max(hi_v, pv);
        }
        const double area = (hi_u - lo_u) * (hi_v - lo_v);
        if (area < best_area) {
            best_area = area;
            auto corner = [&](double u, double v) {
                return Point{a.x + u * ux + v * vx, a.y + u * uy + v * vy};
            };
            best = {corner(lo_u, lo_v), corner(hi_u, lo_v), corner(hi_u, hi_v), corner(lo_u, hi_v)};
        }
    }
    return best;
}

}  // namespace difftext
