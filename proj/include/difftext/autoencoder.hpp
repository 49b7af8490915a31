// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "difftext/nn.hpp"
#include "difftext/rng.hpp"
#include "difftext/tensor.hpp"

namespace difftext {

struct AutoencoderConfig {
    int in_channels = 3;
    int latent_channels = 4;
    int factor = 4;  // spatial downsampling, power of two
    int base_width = 16;
    double latent_scale = 1.0;
};

struct AutoencoderTrainConfig {
    int steps = 500;
    int batch_size = 8;
    double learning_rate = 1e-3;
    uint64_t seed = 0;
};

// Plain deterministic convolutional autoencoder (no KL term). Stands in for
// the frozen VAE of the full-scale pipeline; diffusion only needs a decodable
// latent.
class ConvAutoencoder {
public:
    ConvAutoencoder() = default;
    ConvAutoencoder(const AutoencoderConfig& config, Rng& rng);

    Latent encode(const Image& image);
    Image decode(const Latent& latent);

    // Training path: full round trip with cached activations.
    Image forward_train(const Image& image);
    void backward(const Image& grad_recon);

    nn::ParamRefs params();
    const AutoencoderConfig& config() const { return m_config; }

    // The scale applies symmetrically in encode/decode, so it can be retuned
    // after reconstruction training to normalize the latent magnitude seen by
    // the diffusion process.
    void set_latent_scale(double scale) { m_config.latent_scale = scale; }

private:
    FeatureMap encode_feature(const FeatureMap& x);
    FeatureMap decode_feature(const FeatureMap& z);

    AutoencoderConfig m_config;
    int m_levels = 2;

    nn::Conv2d m_enc_stem;
    std::vector<nn::Conv2d> m_enc_down;
    nn::Conv2d m_enc_head;
    std::vector<nn::Silu> m_enc_act;

    nn::Conv2d m_dec_stem;
    std::vector<nn::Conv2d> m_dec_up_conv;
    std::vector<nn::Upsample2x> m_dec_up;
    nn::Conv2d m_dec_head;
    std::vector<nn::Silu> m_dec_act;
    nn::TanhLayer m_out_act;
};

// Returns the per-step reconstruction loss history.
std::vector<double> train_autoencoder(ConvAutoencoder& model, const std::vector<Image>& corpus,
                                      const AutoencoderTrainConfig& config);

}  // namespace difftext
