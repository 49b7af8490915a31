// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include "difftext/dataset.hpp"
#include "difftext/geometry.hpp"
#include "difftext/nn.hpp"
#include "difftext/tensor.hpp"

namespace difftext {

struct DetectionScore {
    double precision = 0.0;
    double recall = 0.0;
    double hmean = 0.0;
    long long matches = 0;
    long long predictions = 0;
    long long ground_truths = 0;
};

// Greedy one-to-one matching by descending rasterized IoU, aggregated over
// images. Conventions: P = 0 with no predictions; R = 1 when both sides are
// empty, 0 when only the ground truth is; H = 0 when P + R = 0.
DetectionScore match_and_score(const std::vector<std::vector<Polygon>>& predictions,
                               const std::vector<std::vector<Polygon>>& ground_truth,
                               double iou_threshold);

// Exhaustive maximum-cardinality matching for small instances; the test
// oracle for the greedy matcher.
long long max_matching_oracle(const std::vector<Polygon>& predictions,
                              const std::vector<Polygon>& ground_truth, double iou_threshold);

struct ProbeConfig {
    int base_width = 8;
    double threshold = 0.5;      // pixel-probability cut
    int min_component_area = 6;  // pixels
    double pos_weight = 3.0;     // positive-class weight in the BCE loss
};

struct ProbeTrainConfig {
    int steps = 400;
    int batch_size = 8;
    double learning_rate = 2e-3;
    uint64_t seed = 0;
};

// Tiny pixel classifier + binarization + connected components, a minimal echo
// of segmentation-based detection.
class DetectorProbe {
public:
    DetectorProbe() = default;
    DetectorProbe(const ProbeConfig& config, Rng& rng);

    Eigen::MatrixXd pixel_probs(const Image& image);  // h x w in (0, 1)
    std::vector<Polygon> predict(const Image& image);

    // Training path: BCE with logits against a rasterized instance mask.
    // Loss and accumulated gradients are both multiplied by `scale`.
    double train_step_loss_and_backward(const Image& image, const Mask& target, double scale = 1.0);

    nn::ParamRefs params();
    const ProbeConfig& config() const { return m_config; }

    void save(const std::filesystem::path& path) const;
    static DetectorProbe load_file(const std::filesystem::path& path);

private:
    FeatureMap logits(const Image& image);

    ProbeConfig m_config;
    nn::Conv2d m_conv1, m_conv2, m_conv3, m_head;
    nn::Silu m_act1, m_act2, m_act3;
};

struct ProbeTrainResult {
    std::vector<double> loss_history;
};

ProbeTrainResult train_probe(DetectorProbe& probe, const std::filesystem::path& manifest_path,
                             const ProbeTrainConfig& config);

// Scores probe predictions against manifest ground truth. Prediction runs
// per image and may be parallelized; aggregation order is fixed.
DetectionScore evaluate_probe(DetectorProbe& probe, const std::filesystem::path& manifest_path,
                              double iou_threshold, int threads = 1);

}  // namespace difftext
