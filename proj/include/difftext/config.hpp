// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>

#include "difftext/autoencoder.hpp"
#include "difftext/bundle.hpp"
#include "difftext/condition.hpp"
#include "difftext/crops.hpp"
#include "difftext/denoiser.hpp"
#include "difftext/placement.hpp"
#include "difftext/probe.hpp"
#include "difftext/recognizer.hpp"
#include "difftext/sampler.hpp"

namespace difftext {

struct RecognizerGateConfig {
    double threshold = 0.9;
    bool require_match = false;  // optional transcript-agreement gate
};

struct RecognizerTrainConfig {
    int steps = 1200;
    double learning_rate = 1e-3;
    int per_word = 6;
};

// One document, keys namespaced per module. Unknown keys are rejected.
struct PipelineConfig {
    uint64_t seed = 0;
    bool deterministic = true;
    int threads = 1;
    std::string charset = Charset{}.chars;
    bool keep_unlabeled_pixels = false;  // leave discarded renders in place
    bool emit_discarded = false;         // record discarded instances too

    AutoencoderConfig autoencoder;
    AutoencoderTrainConfig autoencoder_training;
    ConditionEncoderConfig condition;
    DenoiserConfig denoiser;
    ScheduleParams schedule;
    TrainConfig training;
    PlacementParams placement;
    CropParams crops;
    SamplerParams sampler;
    ToyRecognizerConfig recognizer;
    RecognizerGateConfig gate;
    RecognizerTrainConfig recognizer_training;
    ProbeConfig probe;
    ProbeTrainConfig probe_training;

    nlohmann::json to_json() const;
    static PipelineConfig from_json(const nlohmann::json& j);  // strict

    static PipelineConfig load_file(const std::filesystem::path& path);

    // Applies "dotted.path=json-value" overrides, then revalidates strictly.
    static PipelineConfig with_overrides(nlohmann::json base,
                                         const std::vector<std::string>& overrides);

    Charset charset_object() const;
    std::string hash_hex() const;
};

}  // namespace difftext
