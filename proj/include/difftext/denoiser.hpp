// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include "difftext/nn.hpp"
#include "difftext/rng.hpp"
#include "difftext/tensor.hpp"

namespace difftext {

struct DenoiserConfig {
    int latent_channels = 4;
    int cond_dim = 64;
    int base_width = 16;  // level-2 width is double
    int temb_dim = 32;
};

// Inputs to the noise predictor: noised latent, masked-background latent and
// the mask at latent resolution, concatenated along channels (2*C + 1 total),
// plus the timestep and the text embedding.
struct DenoiserInput {
    Latent z_t;
    Latent z_b;
    FeatureMap mask_latent;     // single channel, values in {0, 1}
    int t = 1;
    Eigen::MatrixXd cond;       // seq_len x dim
};

// Two-level encoder/decoder UNet with a skip connection and one
// cross-attention block per level. Sized to run acceptance training on CPU.
class ConditionalDenoiser {
public:
    ConditionalDenoiser() = default;
    ConditionalDenoiser(const DenoiserConfig& config, Rng& rng);

    // ctx is dim x seq_len (condition tokens as columns).
    FeatureMap forward(const FeatureMap& z_concat, int t, const Eigen::MatrixXd& ctx);

    // Accumulates parameter gradients; adds the condition gradient into gctx
    // when non-null so a co-trained text encoder can continue the chain.
    void backward(const FeatureMap& g_eps, Eigen::MatrixXd* gctx);

    nn::ParamRefs params();
    const DenoiserConfig& config() const { return m_config; }
    int input_channels() const { return 2 * m_config.latent_channels + 1; }

private:
    struct ResBlock {
        nn::Conv2d conv1, conv2;
        nn::Linear time_proj;
        nn::Silu act1, act2;

        void init(const std::string& name, int channels, int temb_dim, Rng& rng);
        FeatureMap forward(const FeatureMap& x, const Eigen::MatrixXd& temb);
        FeatureMap backward(const FeatureMap& gy, Eigen::MatrixXd& gtemb);
        void collect(nn::ParamRefs& out);
    };

    DenoiserConfig m_config;

    nn::Linear m_temb_fc1, m_temb_fc2;
    nn::Silu m_temb_act;
    Eigen::MatrixXd m_temb;  // cached per forward

    nn::Conv2d m_stem;
    ResBlock m_res1;
    nn::Attention m_attn1;
    nn::Conv2d m_down;
    ResBlock m_res2;
    nn::Attention m_attn2;
    nn::Upsample2x m_up;
    nn::Conv2d m_up_conv;
    nn::Conv2d m_fuse;
    ResBlock m_res3;
    nn::Silu m_head_act;
    nn::Conv2d m_head;

    FeatureMap m_skip;  // level-1 features carried across the U
};

// Validates the spec-level input contract and runs the network.
Latent predict_noise(ConditionalDenoiser& model, const DenoiserInput& input);

// Builds the channel concatenation [z_t | z_b | mask].
FeatureMap concat_denoiser_input(const Latent& z_t, const Latent& z_b,
                                 const FeatureMap& mask_latent);

}  // namespace difftext
