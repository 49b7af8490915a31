// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "difftext/probe.hpp"
#include "difftext/toydata.hpp"

using namespace difftext;
namespace fs = std::filesystem;

namespace {

Polygon rect(double x, double y, double w, double h) {
    return {{x, y}, {x + w, y}, {x + w, y + h}, {x, y + h}};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "difftext_probe_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("exact predictions score P=R=H=1") {
    const std::vector<std::vector<Polygon>> gt = {{rect(2, 2, 10, 6), rect(20, 10, 8, 8)}};
    const DetectionScore s = match_and_score(gt, gt, 0.5);
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);
    CHECK(s.hmean == 1.0);
}

TEST_CASE("no predictions against non-empty ground truth scores zero") {
    const std::vector<std::vector<Polygon>> preds = {{}};
    const std::vector<std::vector<Polygon>> gt = {{rect(2, 2, 10, 6)}};
    const DetectionScore s = match_and_score(preds, gt, 0.5);
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 0.0);
    CHECK(s.hmean == 0.0);
}

TEST_CASE("both sides empty scores recall 1 by convention") {
    const std::vector<std::vector<Polygon>> none = {{}};
    const DetectionScore s = match_and_score(none, none, 0.5);
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 1.0);
    CHECK(s.hmean == 0.0);
}

TEST_CASE("the worked example: two matches at IoU 0.6 plus one spurious") {
    const std::vector<std::vector<Polygon>> gt = {{rect(0, 0, 8, 8), rect(20, 0, 8, 8)}};
    const std::vector<std::vector<Polygon>> preds = {
        {rect(0, 2, 8, 8), rect(20, 2, 8, 8), rect(40, 40, 8, 8)}};
    CHECK(raster_iou(preds[0][0], gt[0][0]) == doctest::Approx(0.6));
    const DetectionScore s = match_and_score(preds, gt, 0.5);
    CHECK(s.precision == doctest::Approx(2.0 / 3.0));
    CHECK(s.recall == doctest::Approx(1.0));
    CHECK(s.hmean == doctest::Approx(0.8));
    CHECK(s.matches == max_matching_oracle(preds[0], gt[0], 0.5));
}

TEST_CASE("greedy matching agrees with the brute-force oracle on random cases") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Polygon> preds, gts;
        const int np = rng.uniform_int(0, 5);
        const int ng = rng.uniform_int(0, 5);
        for (int i = 0; i < np; ++i) {
            preds.push_back(rect(rng.uniform_int(0, 24), rng.uniform_int(0, 24),
                                 rng.uniform_int(4, 12), rng.uniform_int(4, 12)));
        }
        for (int i = 0; i < ng; ++i) {
            gts.push_back(rect(rng.uniform_int(0, 24), rng.uniform_int(0, 24),
                               rng.uniform_int(4, 12), rng.uniform_int(4, 12)));
        }
        const DetectionScore s = match_and_score({preds}, {gts}, 0.5);
        CHECK(s.matches == max_matching_oracle(preds, gts, 0.5));
    }
}

TEST_CASE("harmonic-mean identities hold") {
    Rng rng(5);
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<Polygon> preds, gts;
        for (int i = rng.uniform_int(0, 4); i > 0; --i) {
            preds.push_back(rect(rng.uniform_int(0, 30), rng.uniform_int(0, 30),
                                 rng.uniform_int(3, 10), rng.uniform_int(3, 10)));
        }
        for (int i = rng.uniform_int(0, 4); i > 0; --i) {
            gts.push_back(rect(rng.uniform_int(0, 30), rng.uniform_int(0, 30),
                               rng.uniform_int(3, 10), rng.uniform_int(3, 10)));
        }
        const DetectionScore s = match_and_score({preds}, {gts}, 0.5);
        CHECK(s.hmean <= std::max(s.precision, s.recall) + 1e-12);
        CHECK(s.hmean <= 2.0 * std::min(s.precision, s.recall) + 1e-12);
    }
}

TEST_CASE("scoring is invariant to image relabeling and vertex rotation") {
    std::vector<std::vector<Polygon>> preds = {{rect(0, 0, 8, 8)}, {rect(10, 10, 6, 6)}};
    std::vector<std::vector<Polygon>> gts = {{rect(1, 1, 8, 8)}, {rect(10, 10, 6, 6)}};
    const DetectionScore a = match_and_score(preds, gts, 0.5);
    std::swap(preds[0], preds[1]);
    std::swap(gts[0], gts[1]);
    const DetectionScore b = match_and_score(preds, gts, 0.5);
    CHECK(a.hmean == b.hmean);

    std::rotate(preds[0][0].begin(), preds[0][0].begin() + 2, preds[0][0].end());
    const DetectionScore c = match_and_score(preds, gts, 0.5);
    CHECK(c.hmean == b.hmean);
}

TEST_CASE("invalid polygons and thresholds are rejected") {
    CHECK_THROWS_AS(match_and_score({{rect(0, 0, 4, 4)}}, {{}}, 0.0), ConfigError);
    CHECK_THROWS_AS(match_and_score({{{{0, 0}, {4, 0}}}}, {{}}, 0.5), AnnotationError);
    CHECK_THROWS_AS(match_and_score({{{{0, 0}, {4, 0}, {8, 0}}}}, {{}}, 0.5), AnnotationError);
}

TEST_CASE("probe training memorizes a small drawn set") {
    const fs::path dir = fresh_dir("memorize");
    const auto set = toydata::detection_set(toydata::default_words(), 20, 48, 3);
    const fs::path manifest = toydata::write_labeled_manifest(dir, set);

    Rng rng(7);
    ProbeConfig cfg;
    DetectorProbe probe(cfg, rng);

    // Untrained probe: nothing scores.
    const DetectionScore before = evaluate_probe(probe, manifest, 0.5);
    CHECK(before.hmean <= 0.1);

    ProbeTrainConfig tc;
    tc.steps = 250;
    tc.seed = 5;
    const auto result = train_probe(probe, manifest, tc);
    CHECK(result.loss_history.back() < result.loss_history.front());

    const DetectionScore after = evaluate_probe(probe, manifest, 0.5);
    CHECK(after.hmean >= 0.9);
}

TEST_CASE("probe training is deterministic and checkpoints round-trip") {
    const fs::path dir = fresh_dir("determinism");
    const auto set = toydata::detection_set(toydata::default_words(), 6, 48, 11);
    const fs::path manifest = toydata::write_labeled_manifest(dir, set);

    auto run = [&](const fs::path& out) {
        Rng rng(13);
        DetectorProbe probe(ProbeConfig{}, rng);
        ProbeTrainConfig tc;
        tc.steps = 20;
        tc.seed = 17;
        train_probe(probe, manifest, tc);
        probe.save(out);
    };
    run(dir / "a.ckpt");
    run(dir / "b.ckpt");
    std::ifstream fa(dir / "a.ckpt", std::ios::binary), fb(dir / "b.ckpt", std::ios::binary);
    const std::string sa{std::istreambuf_iterator<char>(fa), std::istreambuf_iterator<char>()};
    const std::string sb{std::istreambuf_iterator<char>(fb), std::istreambuf_iterator<char>()};
    CHECK(sa == sb);

    DetectorProbe loaded = DetectorProbe::load_file(dir / "a.ckpt");
    const auto set2 = toydata::detection_set(toydata::default_words(), 1, 48, 19);
    DetectorProbe original = DetectorProbe::load_file(dir / "b.ckpt");
    CHECK((loaded.pixel_probs(set2[0].image) - original.pixel_probs(set2[0].image))
              .cwiseAbs()
              .maxCoeff() == 0.0);
}

TEST_CASE("empty manifests are a config error for probe training") {
    const fs::path dir = fresh_dir("empty");
    std::ofstream(dir / "manifest.jsonl");
    Rng rng(23);
    DetectorProbe probe(ProbeConfig{}, rng);
    CHECK_THROWS_AS(train_probe(probe, dir / "manifest.jsonl", ProbeTrainConfig{}), ConfigError);
}
