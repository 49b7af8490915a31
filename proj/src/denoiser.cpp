// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/denoiser.hpp"

#include <string>

#include "difftext/errors.hpp"

namespace difftext {

void ConditionalDenoiser::ResBlock::init(const std::string& name, int channels, int temb_dim,
                                         Rng& rng) {
    conv1.init(name + ".conv1", channels, channels, 3, 1, 1, rng);
    conv2.init(name + ".conv2", channels, channels, 3, 1, 1, rng);
    time_proj.init(name + ".time_proj", temb_dim, channels, rng);
}

FeatureMap ConditionalDenoiser::ResBlock::forward(const FeatureMap& x,
                                                  const Eigen::MatrixXd& temb) {
    FeatureMap h = conv1.forward(act1.forward(x));
    h.data.colwise() += time_proj.forward(temb).col(0);
    FeatureMap out = conv2.forward(act2.forward(h));
    out.data += x.data;
    return out;
}

FeatureMap ConditionalDenoiser::ResBlock::backward(const FeatureMap& gy, Eigen::MatrixXd& gtemb) {
    FeatureMap gh = act2.backward(conv2.backward(gy));
    gtemb += time_proj.backward(gh.data.rowwise().sum());
    FeatureMap gx = act1.backward(conv1.backward(gh));
    gx.data += gy.data;
    return gx;
}

void ConditionalDenoiser::ResBlock::collect(nn::ParamRefs& out) {
    conv1.collect(out);
    conv2.collect(out);
    time_proj.collect(out);
}

ConditionalDenoiser::ConditionalDenoiser(const DenoiserConfig& config, Rng& rng)
    : m_config(config) {
    const int c1 = config.base_width;
    const int c2 = config.base_width * 2;
    m_temb_fc1.init("unet.temb.fc1", config.temb_dim, config.temb_dim, rng);
    m_temb_fc2.init("unet.temb.fc2", config.temb_dim, config.temb_dim, rng);
    m_stem.init("unet.stem", input_channels(), c1, 3, 1, 1, rng);
    m_res1.init("unet.res1", c1, config.temb_dim, rng);
    m_attn1.init("unet.attn1", c1, config.cond_dim, c1, rng);
    m_down.init("unet.down", c1, c2, 3, 2, 1, rng);
    m_res2.init("unet.res2", c2, config.temb_dim, rng);
    m_attn2.init("unet.attn2", c2, config.cond_dim, c2, rng);
    m_up_conv.init("unet.up_conv", c2, c1, 3, 1, 1, rng);
    m_fuse.init("unet.fuse", 2 * c1, c1, 3, 1, 1, rng);
    m_res3.init("unet.res3", c1, config.temb_dim, rng);
    m_head.init("unet.head", c1, config.latent_channels, 3, 1, 1, rng, 0.1);
}

FeatureMap ConditionalDenoiser::forward(const FeatureMap& z_concat, int t,
                                        const Eigen::MatrixXd& ctx) {
    if (z_concat.channels() != input_channels()) {
        throw ShapeError("denoiser: expected " + std::to_string(input_channels()) +
                         " input channels, got " + std::to_string(z_concat.channels()));
    }
    if (t < 1) throw IndexError("denoiser: timestep must be >= 1");
    if (z_concat.height % 2 != 0 || z_concat.width % 2 != 0) {
        throw ShapeError("denoiser: latent dims must be even for the downsampling level");
    }

    const Eigen::MatrixXd sincos = nn::timestep_embedding(t, m_config.temb_dim);
    m_temb = m_temb_fc2.forward(m_temb_act.forward(m_temb_fc1.forward(sincos)));

    FeatureMap h = m_stem.forward(z_concat);
    h = m_res1.forward(h, m_temb);
    h.data = m_attn1.forward(h.data, ctx);
    m_skip = h;

    FeatureMap d = m_down.forward(h);
    d = m_res2.forward(d, m_temb);
    d.data = m_attn2.forward(d.data, ctx);

    FeatureMap u = m_up.forward(d);
    u = m_up_conv.forward(u);
    u = m_fuse.forward(nn::concat_channels(u, m_skip));
    u = m_res3.forward(u, m_temb);
    return m_head.forward(m_head_act.forward(u));
}

void ConditionalDenoiser::backward(const FeatureMap& g_eps, Eigen::MatrixXd* gctx) {
    Eigen::MatrixXd gtemb = Eigen::MatrixXd::Zero(m_config.temb_dim, 1);
    Eigen::MatrixXd gcond;

    FeatureMap g = m_head_act.backward(m_head.backward(g_eps));
    g = m_res3.backward(g, gtemb);
    g = m_fuse.backward(g);
    FeatureMap gu, gskip;
    nn::split_channels(g, m_config.base_width, gu, gskip);
    gu = m_up_conv.backward(gu);
    FeatureMap gd = m_up.backward(gu);

    gd.data = m_attn2.backward(gd.data, gcond);
    gd = m_res2.backward(gd, gtemb);
    FeatureMap gh = m_down.backward(gd);
    gh.data += gskip.data;

    gh.data = m_attn1.backward(gh.data, gcond);
    gh = m_res1.backward(gh, gtemb);
    m_stem.backward(gh);

    m_temb_fc1.backward(m_temb_act.backward(m_temb_fc2.backward(gtemb)));
    if (gctx != nullptr) {
        if (gctx->size() == 0) *gctx = Eigen::MatrixXd::Zero(gcond.rows(), gcond.cols());
        *gctx += gcond;
    }
}

nn::ParamRefs ConditionalDenoiser::params() {
    nn::ParamRefs out;
    m_temb_fc1.collect(out);
    m_temb_fc2.collect(out);
    m_stem.collect(out);
    m_res1.collect(out);
    m_attn1.collect(out);
    m_down.collect(out);
    m_res2.collect(out);
    m_attn2.collect(out);
    m_up_conv.collect(out);
    m_fuse.collect(out);
    m_res3.collect(out);
    m_head.collect(out);
    return out;
}

FeatureMap concat_denoiser_input(const Latent& z_t, const Latent& z_b,
                                 const FeatureMap& mask_latent) {
    if (!z_t.same_shape(z_b)) throw ShapeError("denoiser input: z_t/z_b shape mismatch");
    if (mask_latent.channels() != 1 || mask_latent.height != z_t.height ||
        mask_latent.width != z_t.width) {
        throw ShapeError("denoiser input: mask_latent must be 1 channel at latent resolution");
    }
    return nn::concat_channels(nn::concat_channels(z_t, z_b), mask_latent);
}

Latent predict_noise(ConditionalDenoiser& model, const DenoiserInput& input) {
    const FeatureMap z = concat_denoiser_input(input.z_t, input.z_b, input.mask_latent);
    if (input.cond.cols() != model.config().cond_dim) {
        throw ShapeError("predict_noise: condition width mismatch");
    }
    FeatureMap out = model.forward(z, input.t, input.cond.transpose());
    Latent eps = input.z_t;
    eps.data = out.data;
    return eps;
}

}  // namespace difftext
