// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "difftext/geometry.hpp"

namespace difftext {

// A text placement proposal: the largest axis-aligned rectangle inscribed in
// a segment whose depth is close to planar.
struct PlacementRegion {
    Polygon polygon;     // 4 corners, clockwise from top-left
    int segment_id = 0;
    double smoothness = 0.0;  // RMS residual of the segment's depth plane fit
    double area = 0.0;        // pixels^2
};

struct PlacementParams {
    double min_area_frac = 0.005;  // of the image area
    double max_residual = 0.05;    // on depth normalized to [0, 1]
    int max_regions = 8;
    int min_height = 8;  // rectangles shorter than this cannot host glyphs
};

// Least-squares plane fit z ~ a*x + b*y + c over the given pixels; returns the
// RMS residual. Exposed for the oracle tests.
double plane_fit_rms(const std::vector<Eigen::Vector3d>& points);

// Largest all-ones axis-aligned rectangle in a binary mask (histogram method).
Box largest_inscribed_rect(const Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic>& mask);

// Proposes one region per qualifying segment, sorted by area descending
// (ties: segment id, then top-left corner), capped at max_regions.
std::vector<PlacementRegion> propose_regions(const Eigen::MatrixXi& seg_map,
                                             const Eigen::MatrixXd& depth_map,
                                             const PlacementParams& params);

}  // namespace difftext
