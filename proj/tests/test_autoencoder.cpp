// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "difftext/autoencoder.hpp"
#include "difftext/errors.hpp"

using namespace difftext;

namespace {

Image random_image(int h, int w, int c, uint64_t seed) {
    Image img(h, w, c);
    Rng rng(seed);
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) img.at(y, x, ch) = rng.uniform() * 2.0 - 1.0;
        }
    }
    return img;
}

ConvAutoencoder make_model(uint64_t seed, AutoencoderConfig cfg = {}) {
    Rng rng(seed);
    return ConvAutoencoder(cfg, rng);
}

}  // namespace

TEST_CASE("encode maps 64x64x3 to 16x16x4 with the default factor") {
    ConvAutoencoder model = make_model(1);
    const Image img = random_image(64, 64, 3, 2);
    const Latent z = model.encode(img);
    CHECK(z.channels() == 4);
    CHECK(z.height == 16);
    CHECK(z.width == 16);
}

TEST_CASE("encode and decode are deterministic") {
    ConvAutoencoder model = make_model(1);
    const Image img = random_image(64, 64, 3, 2);
    const Latent a = model.encode(img);
    const Latent b = model.encode(img);
    CHECK((a.data - b.data).cwiseAbs().maxCoeff() == 0.0);
    const Image da = model.decode(a);
    const Image db = model.decode(b);
    for (int c = 0; c < 3; ++c) {
        CHECK((da.channels[c] - db.channels[c]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("decode of a zero latent yields a valid in-range image") {
    ConvAutoencoder model = make_model(3);
    Latent z(4, 16, 16);
    const Image img = model.decode(z);
    CHECK(img.height == 64);
    CHECK(img.width == 64);
    CHECK(img.channel_count() == 3);
    for (int c = 0; c < 3; ++c) {
        CHECK(img.channels[c].maxCoeff() <= 1.0);
        CHECK(img.channels[c].minCoeff() >= -1.0);
    }
}

TEST_CASE("indivisible dimensions are rejected") {
    ConvAutoencoder model = make_model(4);
    CHECK_THROWS_AS(model.encode(random_image(63, 64, 3, 5)), ShapeError);
    CHECK_THROWS_AS(model.encode(random_image(64, 62, 3, 6)), ShapeError);
    Latent bad(3, 16, 16);
    CHECK_THROWS_AS(model.decode(bad), ShapeError);
}

TEST_CASE("shape round trip holds for varying sizes") {
    ConvAutoencoder model = make_model(7);
    for (int size : {16, 32, 64}) {
        const Image img = random_image(size, size, 3, 70 + size);
        const Image rec = model.decode(model.encode(img));
        CHECK(rec.height == img.height);
        CHECK(rec.width == img.width);
        CHECK(rec.channel_count() == img.channel_count());
    }
}

TEST_CASE("round-trip gradients match finite differences on a micro model") {
    AutoencoderConfig cfg;
    cfg.in_channels = 1;
    cfg.latent_channels = 2;
    cfg.factor = 2;
    cfg.base_width = 3;
    ConvAutoencoder model = make_model(11, cfg);
    const Image target = random_image(8, 8, 1, 12);

    auto loss = [&] {
        const Image rec = model.forward_train(target);
        return mse(rec, target);
    };
    nn::ParamRefs params = model.params();
    for (nn::Param* p : params) p->grad.setZero();
    const Image rec = model.forward_train(target);
    Image grad(8, 8, 1);
    grad.channels[0] = 2.0 * (rec.channels[0] - target.channels[0]) / 64.0;
    model.backward(grad);
    CHECK(nn::max_grad_rel_error(params, loss) < 1e-4);
}

TEST_CASE("training on constant images drives the loss toward zero") {
    AutoencoderConfig cfg;
    cfg.base_width = 8;
    ConvAutoencoder model = make_model(13, cfg);
    std::vector<Image> corpus(4, Image(16, 16, 3, 0.25));
    AutoencoderTrainConfig tc;
    tc.steps = 300;
    tc.batch_size = 4;
    tc.learning_rate = 3e-3;
    tc.seed = 1;
    const std::vector<double> history = train_autoencoder(model, corpus, tc);
    CHECK(history.back() < 0.01);
    CHECK(history.back() < 0.5 * history.front());
}

TEST_CASE("fixed seeds give bit-identical loss histories") {
    auto run = [] {
        AutoencoderConfig cfg;
        cfg.base_width = 4;
        ConvAutoencoder model = make_model(17, cfg);
        std::vector<Image> corpus;
        for (int i = 0; i < 4; ++i) corpus.push_back(random_image(16, 16, 3, 100 + i));
        AutoencoderTrainConfig tc;
        tc.steps = 25;
        tc.seed = 9;
        return train_autoencoder(model, corpus, tc);
    };
    const auto a = run();
    const auto b = run();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("empty corpus is a config error") {
    ConvAutoencoder model = make_model(19);
    CHECK_THROWS_AS(train_autoencoder(model, {}, AutoencoderTrainConfig{}), ConfigError);
}
