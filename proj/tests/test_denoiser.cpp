// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "difftext/condition.hpp"
#include "difftext/denoiser.hpp"
#include "difftext/errors.hpp"

using namespace difftext;

namespace {

FeatureMap random_feature(int ch, int h, int w, uint64_t seed) {
    FeatureMap f(ch, h, w);
    Rng rng(seed);
    for (Eigen::Index r = 0; r < f.data.rows(); ++r) {
        for (Eigen::Index c = 0; c < f.data.cols(); ++c) f.data(r, c) = rng.normal();
    }
    return f;
}

DenoiserConfig micro_config() {
    DenoiserConfig cfg;
    cfg.latent_channels = 4;
    cfg.cond_dim = 8;
    cfg.base_width = 6;
    cfg.temb_dim = 8;
    return cfg;
}

DenoiserInput micro_input(const DenoiserConfig& cfg, uint64_t seed) {
    DenoiserInput in;
    in.z_t = random_feature(cfg.latent_channels, 4, 4, seed);
    in.z_b = random_feature(cfg.latent_channels, 4, 4, seed + 1);
    in.mask_latent = FeatureMap(1, 4, 4);
    in.mask_latent.data.setZero();
    in.mask_latent.data.block(0, 5, 1, 6).setOnes();
    in.t = 3;
    in.cond = Eigen::MatrixXd::Zero(4, cfg.cond_dim);
    Rng rng(seed + 2);
    for (Eigen::Index r = 0; r < in.cond.rows(); ++r) {
        for (Eigen::Index c = 0; c < in.cond.cols(); ++c) in.cond(r, c) = rng.normal();
    }
    return in;
}

}  // namespace

TEST_CASE("predicted noise has the z_t shape and is deterministic") {
    const DenoiserConfig cfg = micro_config();
    Rng rng(1);
    ConditionalDenoiser model(cfg, rng);
    const DenoiserInput in = micro_input(cfg, 10);
    const Latent a = predict_noise(model, in);
    CHECK(a.height == in.z_t.height);
    CHECK(a.width == in.z_t.width);
    CHECK(a.channels() == in.z_t.channels());
    CHECK(a.data.allFinite());
    const Latent b = predict_noise(model, in);
    CHECK((a.data - b.data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("channel and shape mismatches are rejected") {
    const DenoiserConfig cfg = micro_config();
    Rng rng(2);
    ConditionalDenoiser model(cfg, rng);
    DenoiserInput in = micro_input(cfg, 20);
    in.z_b = random_feature(cfg.latent_channels, 4, 6, 21);
    CHECK_THROWS_AS(predict_noise(model, in), ShapeError);

    DenoiserInput in2 = micro_input(cfg, 22);
    in2.mask_latent = FeatureMap(2, 4, 4);
    CHECK_THROWS_AS(predict_noise(model, in2), ShapeError);

    DenoiserInput in3 = micro_input(cfg, 23);
    in3.t = 0;
    CHECK_THROWS_AS(predict_noise(model, in3), IndexError);

    DenoiserInput in4 = micro_input(cfg, 24);
    in4.cond = Eigen::MatrixXd::Zero(4, cfg.cond_dim + 1);
    CHECK_THROWS_AS(predict_noise(model, in4), ShapeError);
}

TEST_CASE("conditioning changes the output") {
    const DenoiserConfig cfg = micro_config();
    Rng rng(3);
    ConditionalDenoiser model(cfg, rng);
    DenoiserInput in = micro_input(cfg, 30);
    const Latent a = predict_noise(model, in);
    in.cond.setZero();
    const Latent b = predict_noise(model, in);
    CHECK((a.data - b.data).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("distinct timesteps change the output") {
    const DenoiserConfig cfg = micro_config();
    Rng rng(4);
    ConditionalDenoiser model(cfg, rng);
    DenoiserInput in = micro_input(cfg, 40);
    const Latent a = predict_noise(model, in);
    in.t = 900;
    const Latent b = predict_noise(model, in);
    CHECK((a.data - b.data).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("joint denoiser + condition encoder gradients match finite differences") {
    // Micro version of the acceptance gradient check (latent 4x4, D=8, L=4).
    const DenoiserConfig cfg = micro_config();
    ConditionEncoderConfig ccfg;
    ccfg.seq_len = 4;
    ccfg.dim = cfg.cond_dim;
    Rng rng(5);
    ConditionalDenoiser model(cfg, rng);
    Rng crng(6);
    ConditionEncoder cond(ccfg, Charset{}, crng);

    const std::vector<int> tokens = tokenize("ab", Charset{}, ccfg.seq_len);
    const FeatureMap z = concat_denoiser_input(random_feature(4, 4, 4, 50),
                                               random_feature(4, 4, 4, 51), [] {
                                                   FeatureMap m(1, 4, 4);
                                                   m.data.setZero();
                                                   m.data.block(0, 4, 1, 8).setOnes();
                                                   return m;
                                               }());
    const FeatureMap eps_target = random_feature(4, 4, 4, 52);
    const int t = 7;

    auto loss = [&] {
        const Eigen::MatrixXd ctx = cond.forward(tokens);
        const FeatureMap pred = model.forward(z, t, ctx);
        return (pred.data - eps_target.data).squaredNorm() / pred.data.size();
    };

    nn::ParamRefs params = model.params();
    const nn::ParamRefs cparams = cond.params();
    params.insert(params.end(), cparams.begin(), cparams.end());
    for (nn::Param* p : params) p->grad.setZero();

    const Eigen::MatrixXd ctx = cond.forward(tokens);
    const FeatureMap pred = model.forward(z, t, ctx);
    FeatureMap g = pred;
    g.data = 2.0 * (pred.data - eps_target.data) / pred.data.size();
    Eigen::MatrixXd gctx;
    model.backward(g, &gctx);
    cond.backward(gctx);

    CHECK(nn::max_grad_rel_error(params, loss) < 1e-3);
}
