// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "difftext/condition.hpp"
#include "difftext/geometry.hpp"
#include "difftext/nn.hpp"
#include "difftext/tensor.hpp"

namespace difftext {

// A rendered text region with its recognition verdict.
struct GeneratedInstance {
    std::string image_id;
    Polygon polygon;          // full-image coordinates
    std::string text;         // intended transcription
    std::string recognized;
    double confidence = 0.0;  // in [0, 1]
    bool kept = false;
};

// Pluggable recognizer contract; third-party recognizers wrap behind this.
class Recognizer {
public:
    virtual ~Recognizer() = default;
    virtual std::pair<std::string, double> recognize(const Image& patch) const = 0;
    virtual int input_size() const = 0;
    virtual uint64_t charset_hash() const = 0;
};

// Axis-aligned bbox crop of the polygon, resized into a square patch with
// aspect-preserving bilinear scaling; leftover rows/columns split evenly
// (extra pixel goes to the bottom/right) and filled with mid-gray.
Image extract_patch(const Image& image, const Polygon& polygon, int out_size);

// Scale factor and scaled dims used by extract_patch; exposed for the
// arithmetic oracle tests.
struct PatchLayout {
    double scale = 1.0;
    int scaled_w = 0, scaled_h = 0;
    int pad_left = 0, pad_top = 0;
};
PatchLayout patch_layout(int bbox_w, int bbox_h, int out_size);

using RecognizeFn =
    std::function<std::pair<std::string, double>(const GeneratedInstance&, size_t index)>;

// Records (recognized, confidence) on every instance and partitions by the
// threshold, preserving input order in both lists.
std::pair<std::vector<GeneratedInstance>, std::vector<GeneratedInstance>> filter_instances(
    std::vector<GeneratedInstance> instances, const RecognizeFn& recognize, double threshold);

struct ToyRecognizerConfig {
    int input_size = 32;
    int positions = 10;  // per-character slots, padding included
    int base_width = 8;
};

// Small CNN word classifier: per-position character logits over the charset.
// Confidence is the geometric mean of per-position max probabilities.
class ToyRecognizer : public Recognizer {
public:
    ToyRecognizer() = default;
    ToyRecognizer(const ToyRecognizerConfig& config, const Charset& charset, Rng& rng);

    std::pair<std::string, double> recognize(const Image& patch) const override;
    int input_size() const override { return m_config.input_size; }
    uint64_t charset_hash() const override { return m_charset.hash(); }

    const ToyRecognizerConfig& config() const { return m_config; }
    const Charset& charset() const { return m_charset; }

    nn::ParamRefs params();
    void save(const std::filesystem::path& path) const;
    static ToyRecognizer load_file(const std::filesystem::path& path);

    // Per-position class probabilities (vocab x positions).
    Eigen::MatrixXd position_probs(const Image& patch) const;

private:
    friend std::vector<double> train_toy_recognizer(
        ToyRecognizer&, const std::vector<std::pair<Image, std::string>>&, int, double, uint64_t);

    Eigen::MatrixXd logits(const Image& patch) const;

    ToyRecognizerConfig m_config;
    Charset m_charset;
    mutable nn::Conv2d m_conv1, m_conv2, m_conv3;
    mutable nn::Silu m_act1, m_act2, m_act3;
    mutable nn::Linear m_fc;
};

// Cross-entropy training on (patch, word) pairs. Returns the loss history.
std::vector<double> train_toy_recognizer(ToyRecognizer& model,
                                         const std::vector<std::pair<Image, std::string>>& corpus,
                                         int steps, double learning_rate, uint64_t seed);

// Top-1 word accuracy over a labeled set.
double recognizer_accuracy(const ToyRecognizer& model,
                           const std::vector<std::pair<Image, std::string>>& corpus);

}  // namespace difftext
