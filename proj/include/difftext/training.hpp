// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "difftext/bundle.hpp"
#include "difftext/geometry.hpp"
#include "difftext/tensor.hpp"

namespace difftext {

// Masked training pair built from one annotated instance. The masked image
// equals the original everywhere outside the polygon; inside it holds the
// fill value (mid-gray 0 in [-1, 1] space).
struct MaskedPair {
    Image original;
    Image masked;
    Mask mask;
    std::string text;
};

constexpr double kMaskFill = 0.0;

MaskedPair make_masked_pair(const Image& image, const Polygon& polygon, const std::string& text,
                            double fill = kMaskFill);

// One annotation line: {"image": ..., "polygon": [[x, y], ...], "text": ...}.
struct TrainInstance {
    std::string image;
    Polygon polygon;
    std::string text;
};

std::vector<TrainInstance> load_annotations(const std::filesystem::path& jsonl_path);

// Square window of `size` px around the polygon, clamped in-bounds, with the
// polygon translated into window coordinates. One training pair per instance.
MaskedPair build_instance_pair(const Image& image, const Polygon& polygon, const std::string& text,
                               int size);

// Squared-error noise objective, averaged over elements. Zero iff the
// prediction equals the sampled noise exactly.
double noise_loss(const Latent& eps_pred, const Latent& eps);

// One optimizer step over a batch. Timesteps are drawn uniformly from [1, T];
// the loss is the mean squared error between sampled and predicted noise.
// Returns the pre-update loss. Non-finite losses abort with diagnostics.
double training_step(const std::vector<const MaskedPair*>& batch, ModelBundle& bundle,
                     nn::AdamW& optimizer, const nn::ParamRefs& trainable, Rng& rng);

struct TrainingRun {
    std::vector<double> loss_history;
};

TrainingRun run_training(ModelBundle& bundle, const std::vector<MaskedPair>& pairs,
                         const TrainConfig& config);

// Convenience wrapper: loads images + annotations, builds pairs, trains, and
// writes the bundle checkpoint (with config, freeze policy and loss history).
TrainingRun run_training_from_files(ModelBundle& bundle, const std::filesystem::path& image_dir,
                                    const std::filesystem::path& annotations,
                                    const TrainConfig& config,
                                    const std::filesystem::path& checkpoint_out);

}  // namespace difftext
