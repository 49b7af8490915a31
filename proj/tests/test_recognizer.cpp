// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "difftext/recognizer.hpp"
#include "difftext/toydata.hpp"

using namespace difftext;

namespace {

Image random_image(int h, int w, uint64_t seed) {
    Image img(h, w, 3);
    Rng rng(seed);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) img.at(y, x, c) = rng.uniform() * 2.0 - 1.0;
        }
    }
    return img;
}

std::vector<GeneratedInstance> instances_with_conf(const std::vector<double>& confs) {
    std::vector<GeneratedInstance> out(confs.size());
    for (size_t i = 0; i < confs.size(); ++i) {
        out[i].text = "w" + std::to_string(i);
        out[i].polygon = {{0, 0}, {4, 0}, {4, 4}, {0, 4}};
    }
    return out;
}

RecognizeFn fixed_confidences(const std::vector<double>& confs) {
    return [confs](const GeneratedInstance& inst, size_t i) {
        return std::make_pair(inst.text, confs[i]);
    };
}

}  // namespace

TEST_CASE("patch layout of a 20x10 bbox into 32x32") {
    const PatchLayout l = patch_layout(20, 10, 32);
    CHECK(l.scale == doctest::Approx(1.6));
    CHECK(l.scaled_w == 32);
    CHECK(l.scaled_h == 16);
    CHECK(l.pad_top == 8);   // 16 leftover rows split evenly
    CHECK(l.pad_left == 0);
}

TEST_CASE("extract_patch of the full image is the resized image") {
    const Image img = random_image(16, 16, 1);
    const Polygon full = {{0, 0}, {16, 0}, {16, 16}, {0, 16}};
    const Image patch = extract_patch(img, full, 32);
    CHECK(patch.height == 32);
    CHECK(patch.width == 32);
    // Square source: no padding anywhere, corners map to corners.
    CHECK(patch.at(0, 0, 0) == doctest::Approx(img.at(0, 0, 0)));
    CHECK(patch.at(31, 31, 2) == doctest::Approx(img.at(15, 15, 2)));
}

TEST_CASE("extract_patch pads the short side with mid-gray") {
    const Image img = random_image(32, 32, 2);
    const Polygon wide = {{4, 8}, {24, 8}, {24, 18}, {4, 18}};  // 20x10 bbox
    const Image patch = extract_patch(img, wide, 32);
    for (int x = 0; x < 32; ++x) {
        for (int c = 0; c < 3; ++c) {
            CHECK(patch.at(0, x, c) == 0.0);
            CHECK(patch.at(7, x, c) == 0.0);
            CHECK(patch.at(24, x, c) == 0.0);
            CHECK(patch.at(31, x, c) == 0.0);
        }
    }
}

TEST_CASE("extract_patch is deterministic and validates input") {
    const Image img = random_image(32, 32, 3);
    const Polygon poly = {{2, 2}, {20, 4}, {18, 20}, {3, 16}};
    const Image a = extract_patch(img, poly, 32);
    const Image b = extract_patch(img, poly, 32);
    CHECK(mse(a, b) == 0.0);
    CHECK_THROWS_AS(extract_patch(img, {{0, 0}, {5, 0}, {10, 0}}, 32), AnnotationError);
    CHECK_THROWS_AS(extract_patch(img, {{-5, 0}, {5, 0}, {5, 5}}, 32), AnnotationError);
}

TEST_CASE("filter boundaries: zero keeps everything, one discards sub-one") {
    const std::vector<double> confs{0.1, 0.5, 0.99, 0.0};
    auto [k0, d0] = filter_instances(instances_with_conf(confs), fixed_confidences(confs), 0.0);
    CHECK(k0.size() == 4);
    CHECK(d0.empty());
    auto [k1, d1] = filter_instances(instances_with_conf(confs), fixed_confidences(confs), 1.0);
    CHECK(k1.empty());
    CHECK(d1.size() == 4);
    for (const auto& inst : d1) {
        CHECK_FALSE(inst.kept);
        CHECK(inst.recognized == inst.text);
    }
    CHECK_THROWS_AS(filter_instances({}, fixed_confidences({}), 1.5), ConfigError);
}

TEST_CASE("filter monotonicity over random instance sets") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = rng.uniform_int(0, 10);
        std::vector<double> confs;
        for (int i = 0; i < n; ++i) confs.push_back(rng.uniform());
        const double t1 = rng.uniform();
        const double t2 = t1 + (1.0 - t1) * rng.uniform();
        auto [k1, d1] = filter_instances(instances_with_conf(confs), fixed_confidences(confs), t1);
        auto [k2, d2] = filter_instances(instances_with_conf(confs), fixed_confidences(confs), t2);
        CHECK(k2.size() <= k1.size());
        CHECK(k1.size() + d1.size() == static_cast<size_t>(n));
        // kept(t2) is a subset of kept(t1): every kept-at-t2 text appears kept at t1.
        for (const auto& inst : k2) {
            CHECK(std::any_of(k1.begin(), k1.end(),
                              [&](const auto& other) { return other.text == inst.text; }));
        }
        // Input order preserved within each list.
        for (size_t i = 1; i < k1.size(); ++i) CHECK(k1[i - 1].text < k1[i].text);
    }
}

TEST_CASE("filtering never mutates polygons") {
    const std::vector<double> confs{0.3, 0.8};
    auto inst = instances_with_conf(confs);
    const Polygon before = inst[0].polygon;
    auto [kept, discarded] = filter_instances(inst, fixed_confidences(confs), 0.5);
    REQUIRE(kept.size() == 1);
    REQUIRE(discarded.size() == 1);
    for (size_t i = 0; i < before.size(); ++i) {
        CHECK(discarded[0].polygon[i].x == before[i].x);
        CHECK(discarded[0].polygon[i].y == before[i].y);
    }
}

TEST_CASE("single-word recognizer memorizes its class") {
    Rng rng(7);
    ToyRecognizerConfig cfg;
    cfg.base_width = 4;
    cfg.positions = 6;
    ToyRecognizer model(cfg, Charset{}, rng);
    const auto corpus = toydata::recognizer_corpus({"cat"}, 8, 32, 3);
    train_toy_recognizer(model, corpus, 150, 2e-3, 11);
    CHECK(recognizer_accuracy(model, corpus) == doctest::Approx(1.0));
    const auto [text, conf] = model.recognize(corpus[0].first);
    CHECK(text == "cat");
    CHECK(conf > 0.5);
    CHECK(conf <= 1.0);
}

TEST_CASE("ten-word recognizer reaches held-in accuracy 0.95") {
    Rng rng(9);
    ToyRecognizerConfig cfg;
    cfg.base_width = 6;
    ToyRecognizer model(cfg, Charset{}, rng);
    const std::vector<std::string> words{"cat", "dog", "sun", "box", "red",
                                         "sky", "car", "zip", "oak", "ant"};
    const auto corpus = toydata::recognizer_corpus(words, 4, 32, 5);
    train_toy_recognizer(model, corpus, 600, 2e-3, 13);
    CHECK(recognizer_accuracy(model, corpus) >= 0.95);
}

TEST_CASE("training determinism and empty-corpus rejection") {
    auto run = [] {
        Rng rng(15);
        ToyRecognizerConfig cfg;
        cfg.base_width = 4;
        ToyRecognizer model(cfg, Charset{}, rng);
        const auto corpus = toydata::recognizer_corpus({"cat", "dog"}, 2, 32, 7);
        return train_toy_recognizer(model, corpus, 30, 1e-3, 17);
    };
    const auto a = run();
    const auto b = run();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    Rng rng(16);
    ToyRecognizer model(ToyRecognizerConfig{}, Charset{}, rng);
    CHECK_THROWS_AS(train_toy_recognizer(model, {}, 10, 1e-3, 1), ConfigError);
}

TEST_CASE("recognizer checkpoints round-trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "difftext_rec_test";
    fs::create_directories(dir);
    Rng rng(19);
    ToyRecognizerConfig cfg;
    cfg.base_width = 4;
    ToyRecognizer model(cfg, Charset{}, rng);
    model.save(dir / "rec.ckpt");
    ToyRecognizer loaded = ToyRecognizer::load_file(dir / "rec.ckpt");
    const Image patch = random_image(32, 32, 20);
    const auto a = model.recognize(patch);
    const auto b = loaded.recognize(patch);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    CHECK(loaded.charset_hash() == model.charset_hash());
}
