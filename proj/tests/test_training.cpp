// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "difftext/training.hpp"

using namespace difftext;
namespace fs = std::filesystem;

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

ModelBundle micro_bundle(uint64_t seed) {
    AutoencoderConfig ae;
    ae.base_width = 4;
    ConditionEncoderConfig cond;
    cond.seq_len = 8;
    cond.dim = 8;
    DenoiserConfig den;
    den.cond_dim = 8;
    den.base_width = 6;
    den.temb_dim = 8;
    ScheduleParams sched;
    sched.total_steps = 100;
    return ModelBundle::create(ae, cond, den, sched, Charset{}, seed);
}

std::vector<MaskedPair> tiny_pairs(int count) {
    std::vector<MaskedPair> pairs;
    for (int i = 0; i < count; ++i) {
        const Image img = random_image(16, 16, 3, 500 + static_cast<uint64_t>(i));
        const Polygon poly = {{4, 4}, {12, 4}, {12, 10}, {4, 10}};
        pairs.push_back(make_masked_pair(img, poly, "w" + std::to_string(i)));
    }
    return pairs;
}

Latent random_latent(int ch, int h, int w, uint64_t seed) {
    Latent z(ch, h, w);
    Rng rng(seed);
    for (Eigen::Index r = 0; r < z.data.rows(); ++r) {
        for (Eigen::Index c = 0; c < z.data.cols(); ++c) z.data(r, c) = rng.normal();
    }
    return z;
}

}  // namespace

TEST_CASE("full-image rectangle masks everything with the fill value") {
    const Image img = random_image(16, 16, 3, 1);
    const Polygon full = {{0, 0}, {16, 0}, {16, 16}, {0, 16}};
    const MaskedPair pair = make_masked_pair(img, full, "w");
    long long sum = 0;
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            sum += pair.mask(y, x);
            for (int c = 0; c < 3; ++c) CHECK(pair.masked.at(y, x, c) == kMaskFill);
        }
    }
    CHECK(sum == 256);
}

TEST_CASE("zero-area polygons are invalid annotations") {
    const Image img = random_image(16, 16, 3, 2);
    CHECK_THROWS_AS(make_masked_pair(img, {{2, 2}, {8, 2}, {14, 2}}, "w"), AnnotationError);
    CHECK_THROWS_AS(make_masked_pair(img, {{2, 2}, {8, 2}}, "w"), AnnotationError);
    CHECK_THROWS_AS(make_masked_pair(img, {{-4, 2}, {8, 2}, {8, 8}}, "w"), AnnotationError);
}

TEST_CASE("quarter-box mask count matches the point-in-polygon oracle") {
    const Image img = random_image(64, 64, 3, 3);
    const Polygon box = {{16, 16}, {48, 16}, {48, 48}, {16, 48}};
    const MaskedPair pair = make_masked_pair(img, box, "w");
    long long sum = 0;
    long long oracle = 0;
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            sum += pair.mask(y, x);
            oracle += point_in_polygon(x + 0.5, y + 0.5, box) ? 1 : 0;
        }
    }
    CHECK(sum == 1024);
    CHECK(sum == oracle);
}

TEST_CASE("pixels outside the polygon are never altered") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const Image img = random_image(32, 32, 3, 600 + static_cast<uint64_t>(trial));
        const double cx = 8 + rng.uniform() * 16;
        const double cy = 8 + rng.uniform() * 16;
        Polygon poly;
        for (int i = 0; i < 5; ++i) {
            const double ang = 2.0 * 3.14159265358979 * i / 5;
            poly.push_back({cx + (2 + rng.uniform() * 5) * std::cos(ang),
                            cy + (2 + rng.uniform() * 5) * std::sin(ang)});
        }
        const MaskedPair pair = make_masked_pair(img, poly, "w");
        for (int y = 0; y < 32; ++y) {
            for (int x = 0; x < 32; ++x) {
                if (!pair.mask(y, x)) {
                    for (int c = 0; c < 3; ++c) {
                        CHECK(pair.masked.at(y, x, c) == img.at(y, x, c));
                    }
                }
            }
        }
        // Original input untouched by construction (copied), masked == original off-mask.
        CHECK(mse(pair.original, img) == 0.0);
    }
}

TEST_CASE("noise loss is zero for a perfect stub and ~4 for a sign-flipped stub") {
    const Latent eps = random_latent(4, 16, 16, 7);
    CHECK(noise_loss(eps, eps) == 0.0);
    Latent flipped = eps;
    flipped.data = -eps.data;
    // E|eps - (-eps)|^2 = 4 E[eps^2]; the sample mean concentrates near 4.
    CHECK(noise_loss(flipped, eps) == doctest::Approx(4.0).epsilon(0.15));
    CHECK(noise_loss(eps, flipped) >= 0.0);
}

TEST_CASE("training steps reduce the loss on a tiny corpus") {
    ModelBundle bundle = micro_bundle(11);
    const std::vector<MaskedPair> pairs = tiny_pairs(4);
    TrainConfig cfg;
    cfg.steps = 60;
    cfg.batch_size = 4;
    cfg.learning_rate = 2e-3;
    cfg.seed = 5;
    const TrainingRun run = run_training(bundle, pairs, cfg);
    REQUIRE(run.loss_history.size() == 60);
    const double head = std::accumulate(run.loss_history.begin(), run.loss_history.begin() + 10, 0.0) / 10;
    const double tail = std::accumulate(run.loss_history.end() - 10, run.loss_history.end(), 0.0) / 10;
    CHECK(tail < head);
}

TEST_CASE("freeze policy keeps autoencoder parameters bit-identical") {
    ModelBundle bundle = micro_bundle(13);
    std::vector<Eigen::MatrixXd> before;
    for (nn::Param* p : bundle.autoencoder.params()) before.push_back(p->value);
    TrainConfig cfg;
    cfg.steps = 10;
    cfg.batch_size = 2;
    cfg.seed = 6;
    run_training(bundle, tiny_pairs(2), cfg);
    const nn::ParamRefs after = bundle.autoencoder.params();
    for (size_t i = 0; i < after.size(); ++i) {
        CHECK((after[i]->value - before[i]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("unfreezing the autoencoder is rejected as unsupported") {
    ModelBundle bundle = micro_bundle(14);
    TrainConfig cfg;
    cfg.freeze_autoencoder = false;
    CHECK_THROWS_AS(run_training(bundle, tiny_pairs(1), cfg), ConfigError);
}

TEST_CASE("frozen condition encoder parameters stay fixed when requested") {
    ModelBundle bundle = micro_bundle(15);
    std::vector<Eigen::MatrixXd> before;
    for (nn::Param* p : bundle.condition.params()) before.push_back(p->value);
    TrainConfig cfg;
    cfg.steps = 10;
    cfg.batch_size = 2;
    cfg.seed = 7;
    cfg.freeze_condition_encoder = true;
    run_training(bundle, tiny_pairs(2), cfg);
    const nn::ParamRefs after = bundle.condition.params();
    for (size_t i = 0; i < after.size(); ++i) {
        CHECK((after[i]->value - before[i]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("two runs with the same seed produce byte-identical checkpoints") {
    const fs::path dir = fs::temp_directory_path() / "difftext_train_test";
    fs::create_directories(dir);
    auto run = [&](const fs::path& out) {
        ModelBundle bundle = micro_bundle(17);
        TrainConfig cfg;
        cfg.steps = 12;
        cfg.batch_size = 2;
        cfg.seed = 9;
        const TrainingRun r = run_training(bundle, tiny_pairs(3), cfg);
        bundle.save(out, cfg, r.loss_history);
    };
    run(dir / "a.ckpt");
    run(dir / "b.ckpt");
    CHECK(file_hash_hex(dir / "a.ckpt") == file_hash_hex(dir / "b.ckpt"));

    std::ifstream fa(dir / "a.ckpt", std::ios::binary), fb(dir / "b.ckpt", std::ios::binary);
    const std::vector<char> ba{std::istreambuf_iterator<char>(fa), std::istreambuf_iterator<char>()};
    const std::vector<char> bb{std::istreambuf_iterator<char>(fb), std::istreambuf_iterator<char>()};
    CHECK(ba == bb);
}

TEST_CASE("bundle checkpoints round-trip bit-exactly") {
    const fs::path dir = fs::temp_directory_path() / "difftext_train_test";
    fs::create_directories(dir);
    ModelBundle bundle = micro_bundle(19);
    bundle.save(dir / "rt.ckpt", TrainConfig{}, {0.5, 0.25});
    ModelBundle loaded = ModelBundle::load_file(dir / "rt.ckpt");

    const Image img = random_image(16, 16, 3, 23);
    const Latent a = bundle.autoencoder.encode(img);
    const Latent b = loaded.autoencoder.encode(img);
    CHECK((a.data - b.data).cwiseAbs().maxCoeff() == 0.0);

    const TextCondition ca = bundle.condition.encode("cat");
    const TextCondition cb = loaded.condition.encode("cat");
    CHECK((ca.embedding - cb.embedding).cwiseAbs().maxCoeff() == 0.0);

    CHECK(loaded.schedule_params.total_steps == 100);
    CHECK(loaded.charset.hash() == bundle.charset.hash());
}

TEST_CASE("a poisoned parameter aborts with a divergence error") {
    ModelBundle bundle = micro_bundle(21);
    bundle.denoiser.params()[0]->value(0, 0) = std::numeric_limits<double>::quiet_NaN();
    TrainConfig cfg;
    cfg.steps = 1;
    cfg.batch_size = 1;
    CHECK_THROWS_AS(run_training(bundle, tiny_pairs(1), cfg), DivergenceError);
}

TEST_CASE("empty datasets and batches are config errors") {
    ModelBundle bundle = micro_bundle(23);
    CHECK_THROWS_AS(run_training(bundle, {}, TrainConfig{}), ConfigError);
}

TEST_CASE("paper profile records the published hyperparameters") {
    const TrainConfig paper = TrainConfig::paper_profile();
    CHECK(paper.learning_rate == 1e-5);
    CHECK(paper.beta1 == 0.9);
    CHECK(paper.beta2 == 0.999);
    CHECK(paper.weight_decay == 1e-2);
    CHECK(paper.batch_size == 24);
    CHECK(paper.epochs == 20);
    CHECK(paper.image_size == 512);
    const nlohmann::json j = paper.to_json();
    CHECK(j["learning_rate"] == 1e-5);
    CHECK(j["batch_size"] == 24);
    CHECK(j["epochs"] == 20);
    CHECK(j["image_size"] == 512);
}

TEST_CASE("annotation jsonl loader reports parse errors with line numbers") {
    const fs::path dir = fs::temp_directory_path() / "difftext_train_test";
    fs::create_directories(dir);
    const fs::path good = dir / "good.jsonl";
    std::ofstream(good) << R"({"image":"a.png","polygon":[[0,0],[4,0],[4,4],[0,4]],"text":"hi"})"
                        << "\n";
    const auto instances = load_annotations(good);
    REQUIRE(instances.size() == 1);
    CHECK(instances[0].image == "a.png");
    CHECK(instances[0].polygon.size() == 4);
    CHECK(instances[0].text == "hi");

    const fs::path bad = dir / "bad.jsonl";
    std::ofstream(bad) << R"({"image":"a.png"})" << "\n" << "{not json}" << "\n";
    try {
        load_annotations(bad);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
}
