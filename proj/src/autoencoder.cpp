// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/autoencoder.hpp"

#include <cmath>
#include <string>

#include "difftext/errors.hpp"

namespace difftext {

namespace {
int levels_for_factor(int factor) {
    if (factor < 2 || (factor & (factor - 1)) != 0) {
        throw ConfigError("autoencoder factor must be a power of two >= 2, got " +
                          std::to_string(factor));
    }
    int levels = 0;
    while ((1 << levels) < factor) ++levels;
    return levels;
}
}  // namespace

ConvAutoencoder::ConvAutoencoder(const AutoencoderConfig& config, Rng& rng) : m_config(config) {
    m_levels = levels_for_factor(config.factor);
    const int cap = config.base_width * 2;
    std::vector<int> widths(static_cast<size_t>(m_levels) + 1);
    widths[0] = config.base_width;
    for (int l = 1; l <= m_levels; ++l) widths[static_cast<size_t>(l)] = std::min(widths[l - 1] * 2, cap);

    m_enc_stem.init("ae.enc.stem", config.in_channels, widths[0], 3, 1, 1, rng);
    m_enc_down.resize(static_cast<size_t>(m_levels));
    for (int l = 0; l < m_levels; ++l) {
        m_enc_down[static_cast<size_t>(l)].init("ae.enc.down" + std::to_string(l), widths[l],
                                                widths[l + 1], 3, 2, 1, rng);
    }
    m_enc_head.init("ae.enc.head", widths[static_cast<size_t>(m_levels)], config.latent_channels, 3,
                    1, 1, rng);
    m_enc_act.resize(static_cast<size_t>(m_levels) + 1);

    m_dec_stem.init("ae.dec.stem", config.latent_channels, widths[static_cast<size_t>(m_levels)], 3,
                    1, 1, rng);
    m_dec_up_conv.resize(static_cast<size_t>(m_levels));
    m_dec_up.resize(static_cast<size_t>(m_levels));
    for (int l = 0; l < m_levels; ++l) {
        // Mirrors the encoder: level l upsamples from widths[levels-l] to widths[levels-l-1].
        m_dec_up_conv[static_cast<size_t>(l)].init("ae.dec.up" + std::to_string(l),
                                                   widths[static_cast<size_t>(m_levels - l)],
                                                   widths[static_cast<size_t>(m_levels - l - 1)], 3,
                                                   1, 1, rng);
    }
    m_dec_head.init("ae.dec.head", widths[0], config.in_channels, 3, 1, 1, rng);
    m_dec_act.resize(static_cast<size_t>(m_levels) + 1);
}

FeatureMap ConvAutoencoder::encode_feature(const FeatureMap& x) {
    FeatureMap h = m_enc_stem.forward(x);
    for (int l = 0; l < m_levels; ++l) {
        h = m_enc_down[static_cast<size_t>(l)].forward(m_enc_act[static_cast<size_t>(l)].forward(h));
    }
    h = m_enc_head.forward(m_enc_act[static_cast<size_t>(m_levels)].forward(h));
    h.data *= m_config.latent_scale;
    return h;
}

FeatureMap ConvAutoencoder::decode_feature(const FeatureMap& z) {
    FeatureMap h = z;
    h.data /= m_config.latent_scale;
    h = m_dec_stem.forward(h);
    for (int l = 0; l < m_levels; ++l) {
        h = m_dec_up[static_cast<size_t>(l)].forward(m_dec_act[static_cast<size_t>(l)].forward(h));
        h = m_dec_up_conv[static_cast<size_t>(l)].forward(h);
    }
    h = m_dec_head.forward(m_dec_act[static_cast<size_t>(m_levels)].forward(h));
    h.data = m_out_act.forward(h.data);
    return h;
}

Latent ConvAutoencoder::encode(const Image& image) {
    if (image.channel_count() != m_config.in_channels) {
        throw ShapeError("encode: expected " + std::to_string(m_config.in_channels) + " channels");
    }
    if (image.height % m_config.factor != 0 || image.width % m_config.factor != 0) {
        throw ShapeError("encode: image dims " + std::to_string(image.height) + "x" +
                         std::to_string(image.width) + " not divisible by factor " +
                         std::to_string(m_config.factor));
    }
    return encode_feature(image_to_feature(image));
}

Image ConvAutoencoder::decode(const Latent& latent) {
    if (latent.channels() != m_config.latent_channels) {
        throw ShapeError("decode: expected " + std::to_string(m_config.latent_channels) +
                         " latent channels, got " + std::to_string(latent.channels()));
    }
    Image out = feature_to_image(decode_feature(latent));
    out.clamp(-1.0, 1.0);
    return out;
}

Image ConvAutoencoder::forward_train(const Image& image) {
    return feature_to_image(decode_feature(encode(image)));
}

void ConvAutoencoder::backward(const Image& grad_recon) {
    FeatureMap g = image_to_feature(grad_recon);
    g.data = m_out_act.backward(g.data);
    g = m_dec_head.backward(g);
    g = m_dec_act[static_cast<size_t>(m_levels)].backward(g);
    for (int l = m_levels - 1; l >= 0; --l) {
        g = m_dec_up_conv[static_cast<size_t>(l)].backward(g);
        g = m_dec_up[static_cast<size_t>(l)].backward(g);
        g = m_dec_act[static_cast<size_t>(l)].backward(g);
    }
    g = m_dec_stem.backward(g);
    g.data /= m_config.latent_scale;

    g.data *= m_config.latent_scale;  // encoder head scale
    g = m_enc_head.backward(g);
    g = m_enc_act[static_cast<size_t>(m_levels)].backward(g);
    for (int l = m_levels - 1; l >= 0; --l) {
        g = m_enc_act[static_cast<size_t>(l)].backward(m_enc_down[static_cast<size_t>(l)].backward(g));
    }
    m_enc_stem.backward(g);
}

nn::ParamRefs ConvAutoencoder::params() {
    nn::ParamRefs out;
    m_enc_stem.collect(out);
    for (auto& c : m_enc_down) c.collect(out);
    m_enc_head.collect(out);
    m_dec_stem.collect(out);
    for (auto& c : m_dec_up_conv) c.collect(out);
    m_dec_head.collect(out);
    return out;
}

std::vector<double> train_autoencoder(ConvAutoencoder& model, const std::vector<Image>& corpus,
                                      const AutoencoderTrainConfig& config) {
    if (corpus.empty()) throw ConfigError("train_autoencoder: empty corpus");
    nn::AdamW opt;
    opt.lr = config.learning_rate;
    nn::ParamRefs params = model.params();
    Rng rng(derive_seed(config.seed, {0xae}));

    std::vector<double> history;
    history.reserve(static_cast<size_t>(config.steps));
    for (int step = 0; step < config.steps; ++step) {
        opt.zero_grad(params);
        double loss = 0.0;
        const int batch = std::min<int>(config.batch_size, static_cast<int>(corpus.size()));
        for (int b = 0; b < batch; ++b) {
            const Image& target = corpus[static_cast<size_t>(rng.uniform_int(
                0, static_cast<int>(corpus.size()) - 1))];
            const Image recon = model.forward_train(target);
            const double numel =
                static_cast<double>(target.height) * target.width * target.channel_count();
            Image grad(target.height, target.width, target.channel_count());
            for (int c = 0; c < target.channel_count(); ++c) {
                const auto diff = recon.channels[static_cast<size_t>(c)] -
                                  target.channels[static_cast<size_t>(c)];
                loss += diff.squaredNorm() / numel / batch;
                grad.channels[static_cast<size_t>(c)] = 2.0 * diff / numel / batch;
            }
            model.backward(grad);
        }
        if (!std::isfinite(loss)) {
            throw DivergenceError("train_autoencoder: non-finite loss at step " +
                                  std::to_string(step));
        }
        history.push_back(loss);
        opt.step(params);
    }
    return history;
}

}  // namespace difftext
