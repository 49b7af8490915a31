// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "difftext/crops.hpp"

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

PlacementRegion region_at(double x, double y, double w, double h, int id = 0) {
    PlacementRegion r;
    r.polygon = {{x, y}, {x + w, y}, {x + w, y + h}, {x, y + h}};
    r.segment_id = id;
    r.area = w * h;
    return r;
}

WordSource words_abc(uint64_t seed = 1) {
    return WordSource({"cat", "dog", "sun", "box", "fox", "jam"}, Charset{}, 16, seed);
}

// The expand-snap-clamp rule recomputed independently.
Box crop_box_oracle(const Box& bbox, int margin, int snap, int img_w, int img_h) {
    auto fdiv = [](int v, int m) { return static_cast<int>(std::floor(double(v) / m)) * m; };
    auto cdiv = [](int v, int m) { return static_cast<int>(std::ceil(double(v) / m)) * m; };
    int x0 = std::max(0, fdiv(bbox.x - margin, snap));
    int y0 = std::max(0, fdiv(bbox.y - margin, snap));
    int x1 = std::min(img_w, cdiv(bbox.x + bbox.w + margin, snap));
    int y1 = std::min(img_h, cdiv(bbox.y + bbox.h + margin, snap));
    int w = x1 - x0, h = y1 - y0;
    w -= w % snap;
    h -= h % snap;
    return Box{x0, y0, w, h};
}

}  // namespace

TEST_CASE("expand-snap-clamp reproduces the worked example") {
    const Box out = expand_snap_clamp(Box{5, 5, 20, 10}, 8, 4, 64, 64);
    CHECK(out == Box{0, 0, 36, 24});
    CHECK(out == crop_box_oracle(Box{5, 5, 20, 10}, 8, 4, 64, 64));
}

TEST_CASE("expand-snap-clamp agrees with the oracle on random boxes") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const Box bbox{rng.uniform_int(0, 50), rng.uniform_int(0, 50), rng.uniform_int(1, 30),
                       rng.uniform_int(1, 14)};
        const int margin = rng.uniform_int(0, 12);
        const int snap = 1 << rng.uniform_int(0, 3);
        const Box got = expand_snap_clamp(bbox, margin, snap, 64, 64);
        CHECK(got == crop_box_oracle(bbox, margin, snap, 64, 64));
        CHECK(got.w % snap == 0);
        CHECK(got.h % snap == 0);
        CHECK(expand_snap_clamp(got, 0, snap, 64, 64) == got);  // idempotent
    }
}

TEST_CASE("no regions means no jobs") {
    WordSource words = words_abc();
    const auto jobs = make_crop_jobs("img", 64, 64, {}, words, CropParams{}, 1, 0);
    CHECK(jobs.empty());
}

TEST_CASE("six candidates cap at four largest-area-first with overlaps skipped") {
    std::vector<PlacementRegion> regions;
    // Three big disjoint regions, one overlapping the biggest, two small ones.
    regions.push_back(region_at(0, 0, 24, 12, 0));
    regions.push_back(region_at(2, 2, 22, 10, 1));   // overlaps the first after margins
    regions.push_back(region_at(64, 0, 24, 12, 2));
    regions.push_back(region_at(0, 64, 24, 12, 3));
    regions.push_back(region_at(64, 64, 20, 10, 4));
    regions.push_back(region_at(100, 100, 16, 8, 5));

    WordSource words = words_abc();
    CropParams params;
    params.max_jobs = 4;
    const auto jobs = make_crop_jobs("img", 128, 128, regions, words, params, 7, 0);
    REQUIRE(jobs.size() == 4);
    for (size_t i = 0; i < jobs.size(); ++i) {
        for (size_t j = i + 1; j < jobs.size(); ++j) {
            CHECK_FALSE(jobs[i].crop_box.intersects(jobs[j].crop_box));
        }
        CHECK(jobs[i].crop_box.w % params.snap == 0);
        CHECK(jobs[i].crop_box.h % params.snap == 0);
        // region_local within crop bounds
        for (const Point& p : jobs[i].region_local) {
            CHECK(p.x >= 0.0);
            CHECK(p.y >= 0.0);
            CHECK(p.x <= jobs[i].crop_box.w);
            CHECK(p.y <= jobs[i].crop_box.h);
        }
    }
    // Largest first.
    for (size_t i = 0; i + 1 < jobs.size(); ++i) {
        CHECK(polygon_area(jobs[i].region_local) >= polygon_area(jobs[i + 1].region_local));
    }
}

TEST_CASE("jobs are assigned distinct deterministic seeds and words round-robin") {
    std::vector<PlacementRegion> regions;
    regions.push_back(region_at(0, 0, 24, 12));
    regions.push_back(region_at(64, 0, 24, 12));
    regions.push_back(region_at(0, 64, 24, 12));

    WordSource w1 = words_abc(9);
    const auto a = make_crop_jobs("img", 128, 128, regions, w1, CropParams{}, 3, 5);
    WordSource w2 = words_abc(9);
    const auto b = make_crop_jobs("img", 128, 128, regions, w2, CropParams{}, 3, 5);
    REQUIRE(a.size() == 3);
    REQUIRE(b.size() == 3);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].seed == b[i].seed);
        CHECK(a[i].text == b[i].text);
    }
    CHECK(a[0].seed != a[1].seed);
    CHECK(a[1].seed != a[2].seed);
}

TEST_CASE("word source filters to the charset and cycles") {
    WordSource source({"ok", "no!", "UPPER", "toolongforthelimit", ""}, Charset{}, 8, 1);
    // "no!" has a non-charset char, the long one exceeds 8, the empty is dropped;
    // "UPPER" case-folds to "upper".
    CHECK(source.size() == 2);
    const std::string first = source.next();
    const std::string second = source.next();
    CHECK(source.next() == first);
    CHECK(first != second);
    CHECK_THROWS_AS(WordSource({"!!", "??"}, Charset{}, 8, 1), ConfigError);
}

TEST_CASE("paste_back is an identity for the original content") {
    const Image img = random_image(32, 40, 11);
    CropJob job;
    job.crop_box = Box{8, 4, 16, 24};
    const Image crop = crop_image(img, job.crop_box);
    const Image out = paste_back(img, job, crop);
    CHECK(mse(out, img) == 0.0);
}

TEST_CASE("paste_back leaves everything outside the crop untouched") {
    const Image img = random_image(32, 40, 12);
    CropJob job;
    job.crop_box = Box{16, 8, 8, 16};
    Image gen(16, 8, 3, 0.7);
    const Image out = paste_back(img, job, gen);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 40; ++x) {
            const bool inside = x >= 16 && x < 24 && y >= 8 && y < 24;
            for (int c = 0; c < 3; ++c) {
                if (inside) {
                    CHECK(out.at(y, x, c) == 0.7);
                } else {
                    CHECK(out.at(y, x, c) == img.at(y, x, c));
                }
            }
        }
    }
    Image wrong(15, 8, 3);
    CHECK_THROWS_AS(paste_back(img, job, wrong), ShapeError);
}

TEST_CASE("disjoint pastes commute") {
    const Image img = random_image(48, 48, 13);
    CropJob a;
    a.crop_box = Box{0, 0, 16, 16};
    CropJob b;
    b.crop_box = Box{24, 24, 16, 16};
    Image ga(16, 16, 3, 0.3);
    Image gb(16, 16, 3, -0.6);
    const Image ab = paste_back(paste_back(img, a, ga), b, gb);
    const Image ba = paste_back(paste_back(img, b, gb), a, ga);
    // Brute-force pixel comparison.
    for (int c = 0; c < 3; ++c) {
        CHECK((ab.channels[c] - ba.channels[c]).cwiseAbs().maxCoeff() == 0.0);
    }
}
