// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>

#include "difftext/tensor.hpp"

namespace difftext {

// Lossless image files. The writer emits uncompressed deflate blocks so output
// bytes depend only on pixel content, never on a compressor version.

// 1 channel -> 8-bit grayscale, 3 channels -> 8-bit RGB. Values mapped from [-1, 1].
void write_png(const std::filesystem::path& path, const Image& image);

// Depth maps: values in [0, 1] stored as 16-bit grayscale.
void write_png_gray16(const std::filesystem::path& path, const Eigen::MatrixXd& values);

// Segmentation maps: integer labels in [0, 255] stored as 8-bit grayscale.
void write_png_labels(const std::filesystem::path& path, const Eigen::MatrixXi& labels);

// Reads 8/16-bit gray, RGB or RGBA (alpha dropped) into [-1, 1] planes.
Image read_png(const std::filesystem::path& path);

// Reads a depth map normalized to [0, 1] (16-bit preferred, 8-bit accepted).
Eigen::MatrixXd read_png_gray(const std::filesystem::path& path);

// Reads an integer label map from the first channel.
Eigen::MatrixXi read_png_labels(const std::filesystem::path& path);

}  // namespace difftext
