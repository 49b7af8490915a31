// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "difftext/autoencoder.hpp"
#include "difftext/checkpoint.hpp"
#include "difftext/condition.hpp"
#include "difftext/denoiser.hpp"
#include "difftext/schedule.hpp"

namespace difftext {

struct ScheduleParams {
    int total_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
};

// Optimizer settings mirror AdamW. The paper profile is kept verbatim for
// provenance; the desk profile is sized for CPU runs.
struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 1e-2;
    int batch_size = 8;
    int epochs = 1;
    int steps = 2000;  // > 0 overrides the epoch count
    int image_size = 64;
    uint64_t seed = 0;
    bool freeze_autoencoder = true;
    bool freeze_condition_encoder = false;

    static TrainConfig desk_profile();
    static TrainConfig paper_profile();

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

// Every model the generator needs, plus the schedule and charset they were
// built with. Saved and loaded as a single checkpoint.
struct ModelBundle {
    AutoencoderConfig ae_config;
    ConditionEncoderConfig cond_config;
    DenoiserConfig den_config;
    ScheduleParams schedule_params;
    Charset charset;

    ConvAutoencoder autoencoder;
    ConditionEncoder condition;
    ConditionalDenoiser denoiser;
    NoiseSchedule schedule;

    static ModelBundle create(const AutoencoderConfig& ae, const ConditionEncoderConfig& cond,
                              const DenoiserConfig& den, const ScheduleParams& sched,
                              const Charset& charset, uint64_t seed);

    void save(const std::filesystem::path& path, const TrainConfig& train_config,
              const std::vector<double>& loss_history) const;
    static ModelBundle load_file(const std::filesystem::path& path);
};

// Standalone autoencoder checkpoints, used between the train-autoencoder and
// train-denoiser stages.
void save_autoencoder_checkpoint(const ConvAutoencoder& model, const std::filesystem::path& path,
                                 const std::vector<double>& loss_history);
ConvAutoencoder load_autoencoder_checkpoint(const std::filesystem::path& path);

}  // namespace difftext
