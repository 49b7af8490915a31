// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/placement.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "difftext/errors.hpp"

namespace difftext {

double plane_fit_rms(const std::vector<Eigen::Vector3d>& points) {
    if (points.size() < 3) return 0.0;
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d atz = Eigen::Vector3d::Zero();
    for (const auto& p : points) {
        const Eigen::Vector3d row(p.x(), p.y(), 1.0);
        ata += row * row.transpose();
        atz += row * p.z();
    }
    const Eigen::Vector3d coef = ata.ldlt().solve(atz);
    double sq = 0.0;
    for (const auto& p : points) {
        const double fit = coef.x() * p.x() + coef.y() * p.y() + coef.z();
        sq += (p.z() - fit) * (p.z() - fit);
    }
    return std::sqrt(sq / static_cast<double>(points.size()));
}

Box largest_inscribed_rect(const Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic>& mask) {
    const int h = static_cast<int>(mask.rows());
    const int w = static_cast<int>(mask.cols());
    std::vector<int> heights(static_cast<size_t>(w), 0);
    Box best{0, 0, 0, 0};
    std::vector<int> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) heights[static_cast<size_t>(x)] = mask(y, x) ? heights[static_cast<size_t>(x)] + 1 : 0;
        stack.clear();
        for (int x = 0; x <= w; ++x) {
            const int cur = x < w ? heights[static_cast<size_t>(x)] : 0;
            int start = x;
            while (!stack.empty() && heights[static_cast<size_t>(stack.back())] >= cur) {
                const int top = stack.back();
                stack.pop_back();
                const int rect_h = heights[static_cast<size_t>(top)];
                const int left = stack.empty() ? 0 : stack.back() + 1;
                const int rect_w = x - left;
                if (static_cast<long long>(rect_w) * rect_h > best.area()) {
                    best = Box{left, y - rect_h + 1, rect_w, rect_h};
                }
                start = left;
            }
            (void)start;
            stack.push_back(x);
        }
    }
    return best;
}

std::vector<PlacementRegion> propose_regions(const Eigen::MatrixXi& seg_map,
                                             const Eigen::MatrixXd& depth_map,
                                             const PlacementParams& params) {
    if (seg_map.rows() != depth_map.rows() || seg_map.cols() != depth_map.cols()) {
        throw ShapeError("propose_regions: segmentation/depth dims differ");
    }
    const int h = static_cast<int>(seg_map.rows());
    const int w = static_cast<int>(seg_map.cols());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double d = depth_map(y, x);
            if (!std::isfinite(d) || d <= 0.0) {
                throw DataError("propose_regions: depth values must be finite and positive");
            }
        }
    }

    const double min_area = params.min_area_frac * h * w;

    std::map<int, std::vector<Eigen::Vector3d>> segments;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            segments[seg_map(y, x)].push_back(
                Eigen::Vector3d(static_cast<double>(x), static_cast<double>(y), depth_map(y, x)));
        }
    }

    std::vector<PlacementRegion> regions;
    for (const auto& [id, pixels] : segments) {
        if (static_cast<double>(pixels.size()) < min_area) continue;
        const double rms = plane_fit_rms(pixels);
        if (rms > params.max_residual) continue;

        Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic> mask =
            Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(h, w);
        for (const auto& p : pixels) {
            mask(static_cast<int>(p.y()), static_cast<int>(p.x())) = 1;
        }
        const Box rect = largest_inscribed_rect(mask);
        if (static_cast<double>(rect.area()) < min_area) continue;
        if (rect.h < params.min_height) continue;

        PlacementRegion region;
        const double x0 = rect.x, y0 = rect.y;
        const double x1 = rect.x + rect.w, y1 = rect.y + rect.h;
        region.polygon = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
        region.segment_id = id;
        region.smoothness = rms;
        region.area = static_cast<double>(rect.area());
        regions.push_back(std::move(region));
    }

    std::sort(regions.begin(), regions.end(), [](const PlacementRegion& a, const PlacementRegion& b) {
        if (a.area != b.area) return a.area > b.area;
        if (a.segment_id != b.segment_id) return a.segment_id < b.segment_id;
        if (a.polygon[0].y != b.polygon[0].y) return a.polygon[0].y < b.polygon[0].y;
        return a.polygon[0].x < b.polygon[0].x;
    });
    if (static_cast<int>(regions.size()) > params.max_regions) {
        regions.resize(static_cast<size_t>(params.max_regions));
    }
    return regions;
}

}  // namespace difftext
