// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "difftext/errors.hpp"

namespace difftext {

// Pixel-space image, planar channels, values in [-1, 1].
template <typename Scalar>
struct PlanarImage {
    using Plane = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    int height = 0;
    int width = 0;
    std::vector<Plane> channels;

    PlanarImage() = default;
    PlanarImage(int h, int w, int c, Scalar fill = Scalar(0)) : height(h), width(w) {
        channels.assign(static_cast<size_t>(c), Plane::Constant(h, w, fill));
    }

    int channel_count() const { return static_cast<int>(channels.size()); }

    Scalar& at(int y, int x, int c) { return channels[static_cast<size_t>(c)](y, x); }
    Scalar at(int y, int x, int c) const { return channels[static_cast<size_t>(c)](y, x); }

    bool same_shape(const PlanarImage& other) const {
        return height == other.height && width == other.width &&
               channels.size() == other.channels.size();
    }

    void clamp(Scalar lo, Scalar hi) {
        for (auto& plane : channels) {
            plane = plane.cwiseMax(lo).cwiseMin(hi);
        }
    }
};

using Image = PlanarImage<double>;

// Channels x (height*width) matrix with row-major spatial flattening (p = y*width + x).
// Used for latent tensors and network feature maps.
struct FeatureMap {
    Eigen::MatrixXd data;
    int height = 0;
    int width = 0;

    FeatureMap() = default;
    FeatureMap(int channels, int h, int w)
        : data(Eigen::MatrixXd::Zero(channels, static_cast<Eigen::Index>(h) * w)),
          height(h),
          width(w) {}

    int channels() const { return static_cast<int>(data.rows()); }
    Eigen::Index positions() const { return data.cols(); }

    bool same_shape(const FeatureMap& other) const {
        return height == other.height && width == other.width && data.rows() == other.data.rows();
    }
};

using Latent = FeatureMap;

// Binary mask at pixel resolution; values are exactly 0 or 1.
using Mask = Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

inline Image feature_to_image(const FeatureMap& f) {
    Image img(f.height, f.width, f.channels());
    for (int c = 0; c < f.channels(); ++c) {
        for (int y = 0; y < f.height; ++y) {
            for (int x = 0; x < f.width; ++x) {
                img.channels[c](y, x) = f.data(c, static_cast<Eigen::Index>(y) * f.width + x);
            }
        }
    }
    return img;
}

inline FeatureMap image_to_feature(const Image& img) {
    FeatureMap f(img.channel_count(), img.height, img.width);
    for (int c = 0; c < img.channel_count(); ++c) {
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                f.data(c, static_cast<Eigen::Index>(y) * img.width + x) = img.channels[c](y, x);
            }
        }
    }
    return f;
}

inline double mse(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ShapeError("mse: image shapes differ");
    double acc = 0.0;
    for (int c = 0; c < a.channel_count(); ++c) {
        acc += (a.channels[c] - b.channels[c]).squaredNorm();
    }
    return acc / (static_cast<double>(a.height) * a.width * a.channel_count());
}

// Peak signal-to-noise ratio for the [-1, 1] value range (peak = 2).
inline double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(4.0 / m);
}

inline Mask downsample_mask_any(const Mask& mask, int factor) {
    if (mask.rows() % factor != 0 || mask.cols() % factor != 0) {
        throw ShapeError("downsample_mask_any: mask dims not divisible by factor " +
                         std::to_string(factor));
    }
    Mask out = Mask::Zero(mask.rows() / factor, mask.cols() / factor);
    for (Eigen::Index y = 0; y < mask.rows(); ++y) {
        for (Eigen::Index x = 0; x < mask.cols(); ++x) {
            if (mask(y, x)) out(y / factor, x / factor) = 1;
        }
    }
    return out;
}

}  // namespace difftext
