// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/verify.hpp"

#include <cmath>
#include <functional>

#include "difftext/crops.hpp"
#include "difftext/nn.hpp"
#include "difftext/placement.hpp"
#include "difftext/probe.hpp"
#include "difftext/recognizer.hpp"
#include "difftext/schedule.hpp"
#include "difftext/training.hpp"

namespace difftext {

namespace {

struct Check {
    std::string name;
    std::function<void()> body;  // throws std::runtime_error on failure
};

void expect(bool ok, const std::string& message) {
    if (!ok) throw std::runtime_error(message);
}

Latent random_latent(int ch, int h, int w, uint64_t seed) {
    Latent z(ch, h, w);
    Rng rng(seed);
    for (Eigen::Index r = 0; r < z.data.rows(); ++r) {
        for (Eigen::Index c = 0; c < z.data.cols(); ++c) z.data(r, c) = rng.normal();
    }
    return z;
}

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

void check_schedule_laws() {
    Rng rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        const int total = rng.uniform_int(1, 64);
        const double b0 = 1e-5 + rng.uniform() * 0.4;
        const double b1 = b0 + rng.uniform() * (0.98 - b0);
        const NoiseSchedule s = build_schedule(total, b0, b1);
        double prev = 1.0;
        for (int t = 1; t <= total; ++t) {
            expect(s.alpha_at(t) == 1.0 - s.beta_at(t), "alpha != 1 - beta");
            expect(s.alpha_bar_at(t) == prev * s.alpha_at(t), "alpha_bar recurrence broken");
            expect(s.alpha_bar_at(t) > 0.0 && s.alpha_bar_at(t) <= 1.0, "alpha_bar out of (0, 1]");
            if (t > 1) expect(s.alpha_bar_at(t) < prev, "alpha_bar not strictly decreasing");
            prev = s.alpha_bar_at(t);
        }
    }
}

void check_forward_cases() {
    const NoiseSchedule s = default_schedule();
    const Latent x0 = random_latent(2, 4, 4, 7);
    Latent zero = x0;
    zero.data.setZero();
    for (int t : {1, 500, 1000}) {
        const auto a = forward_diffuse(x0, t, zero, s);
        expect((a.x_t.data - std::sqrt(s.alpha_bar_at(t)) * x0.data).cwiseAbs().maxCoeff() == 0.0,
               "zero-noise case broken");
        const Latent eps = random_latent(2, 4, 4, 100 + static_cast<uint64_t>(t));
        const auto b = forward_diffuse(zero, t, eps, s);
        expect((b.x_t.data - std::sqrt(1.0 - s.alpha_bar_at(t)) * eps.data).cwiseAbs().maxCoeff() ==
                   0.0,
               "zero-signal case broken");
    }
}

void check_single_step_inversion() {
    const NoiseSchedule s = default_schedule();
    const Latent x0 = random_latent(4, 4, 4, 11);
    const Latent eps = random_latent(4, 4, 4, 12);
    const auto sample = forward_diffuse(x0, 1, eps, s);
    const Latent rec = denoise_step(sample.x_t, eps, 1, s);
    expect((rec.data - x0.data).cwiseAbs().maxCoeff() < 1e-5, "t=1 inversion above tolerance");
}

void check_chain_inversion() {
    const NoiseSchedule s = default_schedule();
    const Latent x0 = random_latent(1, 4, 4, 31);
    const Latent eps = random_latent(1, 4, 4, 32);
    Latent x = forward_diffuse(x0, s.steps(), eps, s).x_t;
    for (int t = s.steps(); t >= 1; --t) {
        Latent eps_true = x;
        const double abar = s.alpha_bar_at(t);
        eps_true.data = (x.data - std::sqrt(abar) * x0.data) / std::sqrt(1.0 - abar);
        x = denoise_step(x, eps_true, t, s);
    }
    expect((x.data - x0.data).cwiseAbs().maxCoeff() < 1e-3, "chain inversion above tolerance");
}

void check_mc_moments() {
    const NoiseSchedule s = default_schedule();
    const Latent x0 = random_latent(1, 2, 2, 3);
    const int draws = 3000;
    for (int t : {1, 500, 1000}) {
        const double abar = s.alpha_bar_at(t);
        Eigen::ArrayXd mean = Eigen::ArrayXd::Zero(4);
        Eigen::ArrayXd sq = Eigen::ArrayXd::Zero(4);
        Rng rng(900 + static_cast<uint64_t>(t));
        for (int d = 0; d < draws; ++d) {
            const Latent eps = random_latent(1, 2, 2, rng.next_u64());
            const auto sample = forward_diffuse(x0, t, eps, s);
            mean += sample.x_t.data.row(0).transpose().array();
            sq += sample.x_t.data.row(0).transpose().array().square();
        }
        mean /= draws;
        sq = sq / draws - mean.square();
        const double se_mean = std::sqrt((1.0 - abar) / draws);
        const double se_var = (1.0 - abar) * std::sqrt(2.0 / (draws - 1));
        for (int i = 0; i < 4; ++i) {
            expect(std::abs(mean(i) - std::sqrt(abar) * x0.data(0, i)) < 4.0 * se_mean,
                   "MC mean outside band");
            expect(std::abs(sq(i) - (1.0 - abar)) < 4.0 * se_var, "MC variance outside band");
        }
    }
}

void check_tokenize_laws() {
    const Charset cs;
    const auto empty = tokenize("", cs, 8);
    for (int id : empty) expect(id == Charset::pad_id, "empty string not all pads");
    const auto toks = tokenize("abcdefghij", cs, 8);
    expect(static_cast<int>(toks.size()) == 8, "truncation length wrong");
    expect(tokenize("CAT", cs, 4) == tokenize("cat", cs, 4), "case folding broken");
    expect(tokenize("a!c", cs, 4)[1] == Charset::unk_id, "unknown char not UNK");
}

void check_timestep_embedding() {
    const Eigen::VectorXd at0 = nn::timestep_embedding(0, 16);
    for (int i = 0; i < 8; ++i) {
        expect(at0(i) == 0.0, "sin(0) not 0");
        expect(at0(8 + i) == 1.0, "cos(0) not 1");
    }
    expect((nn::timestep_embedding(1, 16) - nn::timestep_embedding(2, 16)).norm() > 0.0,
           "t=1 and t=2 embeddings collide");
}

void check_raster_oracle() {
    const Polygon box = {{16, 16}, {48, 16}, {48, 48}, {16, 48}};
    const Mask m = rasterize_polygon(box, 64, 64);
    long long sum = 0;
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            expect(static_cast<bool>(m(y, x)) == point_in_polygon(x + 0.5, y + 0.5, box),
                   "rasterizer disagrees with the point oracle");
            sum += m(y, x);
        }
    }
    expect(sum == 1024, "quarter box count != 1024");
}

void check_masked_pair_locality() {
    const Image img = random_image(32, 32, 41);
    const Polygon poly = {{6, 6}, {20, 8}, {18, 22}, {5, 18}};
    const MaskedPair pair = make_masked_pair(img, poly, "w");
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            for (int c = 0; c < 3; ++c) {
                if (pair.mask(y, x)) {
                    expect(pair.masked.at(y, x, c) == kMaskFill, "fill value wrong");
                } else {
                    expect(pair.masked.at(y, x, c) == img.at(y, x, c), "outside pixel altered");
                }
            }
        }
    }
}

void check_crop_arithmetic() {
    const Box oracle = expand_snap_clamp(Box{5, 5, 20, 10}, 8, 4, 64, 64);
    expect(oracle == Box{0, 0, 36, 24}, "expand-snap-clamp oracle case wrong");
    Rng rng(55);
    for (int trial = 0; trial < 100; ++trial) {
        const Box bbox{rng.uniform_int(0, 40), rng.uniform_int(0, 40), rng.uniform_int(1, 20),
                       rng.uniform_int(1, 20)};
        const Box snapped = expand_snap_clamp(bbox, rng.uniform_int(0, 10), 8, 64, 64);
        expect(snapped.w % 8 == 0 && snapped.h % 8 == 0, "snapped box not divisible");
        expect(expand_snap_clamp(snapped, 0, 8, 64, 64) == snapped, "snapping not idempotent");
    }
}

void check_paste_locality() {
    const Image img = random_image(32, 32, 61);
    CropJob job;
    job.crop_box = Box{8, 8, 16, 8};
    const Image crop = crop_image(img, job.crop_box);
    const Image same = paste_back(img, job, crop);
    expect(mse(same, img) == 0.0, "identity paste changed pixels");

    Image other = crop;
    other.channels[0].setConstant(0.5);
    const Image pasted = paste_back(img, job, other);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            const bool inside =
                x >= 8 && x < 24 && y >= 8 && y < 16;
            if (!inside) {
                for (int c = 0; c < 3; ++c) {
                    expect(pasted.at(y, x, c) == img.at(y, x, c), "outside-crop pixel altered");
                }
            }
        }
    }
}

void check_filter_laws() {
    Rng rng(71);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = rng.uniform_int(0, 12);
        std::vector<GeneratedInstance> instances(static_cast<size_t>(n));
        std::vector<double> confs(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) confs[static_cast<size_t>(i)] = rng.uniform();
        const RecognizeFn fn = [&](const GeneratedInstance&, size_t i) {
            return std::make_pair(std::string("w"), confs[i]);
        };
        const double t1 = rng.uniform();
        const double t2 = t1 + (1.0 - t1) * rng.uniform();
        const auto [k1, d1] = filter_instances(instances, fn, t1);
        const auto [k2, d2] = filter_instances(instances, fn, t2);
        expect(k1.size() + d1.size() == static_cast<size_t>(n), "partition lost instances");
        expect(k2.size() <= k1.size(), "kept set not monotone in threshold");
        const auto [k0, d0] = filter_instances(instances, fn, 0.0);
        expect(k0.size() == static_cast<size_t>(n), "threshold 0 discarded something");
        bool all_below_one = true;
        for (double c : confs) all_below_one = all_below_one && c < 1.0;
        if (all_below_one) {
            const auto [kall, dall] = filter_instances(instances, fn, 1.0);
            expect(kall.empty(), "threshold 1 kept a sub-1 confidence");
        }
        for (const auto& inst : k1) expect(inst.kept, "kept flag unset on kept instance");
        for (const auto& inst : d1) expect(!inst.kept, "kept flag set on discarded instance");
    }
}

void check_matcher() {
    // Two 8x8 gt boxes matched at IoU 0.6 plus one spurious prediction.
    const std::vector<std::vector<Polygon>> gts = {
        {{{0, 0}, {8, 0}, {8, 8}, {0, 8}}, {{20, 0}, {28, 0}, {28, 8}, {20, 8}}}};
    const std::vector<std::vector<Polygon>> preds = {
        {{{0, 2}, {8, 2}, {8, 10}, {0, 10}},
         {{20, 2}, {28, 2}, {28, 10}, {20, 10}},
         {{40, 40}, {48, 40}, {48, 48}, {40, 48}}}};
    const DetectionScore s = match_and_score(preds, gts, 0.5);
    expect(std::abs(s.precision - 2.0 / 3.0) < 1e-12, "P != 2/3");
    expect(std::abs(s.recall - 1.0) < 1e-12, "R != 1");
    expect(std::abs(s.hmean - 0.8) < 1e-12, "H != 0.8");
    expect(s.matches == max_matching_oracle(preds[0], gts[0], 0.5), "greedy != brute force");

    Rng rng(81);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Polygon> p, g;
        for (int i = rng.uniform_int(0, 4); i > 0; --i) {
            const double x = rng.uniform_int(0, 30), y = rng.uniform_int(0, 30);
            const double w = rng.uniform_int(4, 10), h = rng.uniform_int(4, 10);
            p.push_back({{x, y}, {x + w, y}, {x + w, y + h}, {x, y + h}});
        }
        for (int i = rng.uniform_int(0, 4); i > 0; --i) {
            const double x = rng.uniform_int(0, 30), y = rng.uniform_int(0, 30);
            const double w = rng.uniform_int(4, 10), h = rng.uniform_int(4, 10);
            g.push_back({{x, y}, {x + w, y}, {x + w, y + h}, {x, y + h}});
        }
        const DetectionScore sc = match_and_score({p}, {g}, 0.5);
        expect(sc.matches == max_matching_oracle(p, g, 0.5), "greedy != brute force (random)");
        expect(sc.hmean <= std::max(sc.precision, sc.recall) + 1e-12, "H > max(P, R)");
        expect(sc.hmean <= 2 * std::min(sc.precision, sc.recall) + 1e-12, "H > min(2P, 2R)");
    }
}

void check_placement() {
    const int n = 32;
    Eigen::MatrixXi seg = Eigen::MatrixXi::Zero(n, n);
    Eigen::MatrixXd depth(n, n);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) depth(y, x) = 0.3 + 0.002 * x + 0.001 * y;
    }
    PlacementParams params;
    const auto planar = propose_regions(seg, depth, params);
    expect(!planar.empty(), "planar segment produced no region");
    expect(planar[0].smoothness < 1e-9, "planar residual not ~0");

    Eigen::MatrixXi seg2(n, n);
    Eigen::MatrixXd depth2(n, n);
    Rng rng(91);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            seg2(y, x) = x < n / 2 ? 0 : 1;
            depth2(y, x) = x < n / 2 ? 0.4 + 0.001 * y : 0.2 + 0.6 * rng.uniform();
        }
    }
    PlacementParams tight;
    tight.max_residual = 0.02;
    const auto picked = propose_regions(seg2, depth2, tight);
    expect(!picked.empty(), "planar half not selected");
    for (const auto& region : picked) {
        expect(region.segment_id == 0, "noisy segment leaked through");
        expect(polygon_in_bounds(region.polygon, n, n), "region out of bounds");
        expect(quad_is_simple(region.polygon), "region quad not simple");
    }
}

}  // namespace

std::vector<VerifyResult> run_verification() {
    const std::vector<Check> checks = {
        {"schedule-laws", check_schedule_laws},
        {"forward-diffuse-zero-cases", check_forward_cases},
        {"single-step-inversion", check_single_step_inversion},
        {"chain-inversion", check_chain_inversion},
        {"monte-carlo-moments", check_mc_moments},
        {"tokenize-laws", check_tokenize_laws},
        {"timestep-embedding", check_timestep_embedding},
        {"raster-oracle", check_raster_oracle},
        {"masked-pair-locality", check_masked_pair_locality},
        {"crop-arithmetic", check_crop_arithmetic},
        {"paste-locality", check_paste_locality},
        {"filter-laws", check_filter_laws},
        {"matcher-laws", check_matcher},
        {"placement-laws", check_placement},
    };
    std::vector<VerifyResult> results;
    results.reserve(checks.size());
    for (const Check& check : checks) {
        VerifyResult r;
        r.name = check.name;
        try {
            check.body();
            r.passed = true;
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail = e.what();
        }
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace difftext
