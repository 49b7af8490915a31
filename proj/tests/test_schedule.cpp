// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "difftext/rng.hpp"
#include "difftext/schedule.hpp"

using namespace difftext;

namespace {

// Independent cumulative-product oracle over the linear beta grid.
Eigen::ArrayXd alpha_bar_oracle(int total, double beta_start, double beta_end) {
    Eigen::ArrayXd out(total);
    double prod = 1.0;
    for (int i = 0; i < total; ++i) {
        const double beta =
            total == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (total - 1);
        prod *= 1.0 - beta;
        out(i) = prod;
    }
    return out;
}

Latent make_latent(int channels, int h, int w, uint64_t seed) {
    Latent z(channels, h, w);
    Rng rng(seed);
    for (Eigen::Index r = 0; r < z.data.rows(); ++r) {
        for (Eigen::Index c = 0; c < z.data.cols(); ++c) z.data(r, c) = rng.normal();
    }
    return z;
}

}  // namespace

TEST_CASE("single-step schedule") {
    const NoiseSchedule s = build_schedule(1, 0.1, 0.1);
    CHECK(s.steps() == 1);
    CHECK(s.beta_at(1) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(s.alpha_at(1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.alpha_bar_at(1) == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("two-step cumulative product matches loop oracle") {
    const NoiseSchedule s = build_schedule(2, 0.1, 0.3);
    const Eigen::ArrayXd oracle = alpha_bar_oracle(2, 0.1, 0.3);
    CHECK(s.alpha_bar_at(1) == doctest::Approx(oracle(0)).epsilon(1e-14));
    CHECK(s.alpha_bar_at(2) == doctest::Approx(oracle(1)).epsilon(1e-14));
    // Frozen oracle values.
    CHECK(s.alpha_bar_at(1) == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(s.alpha_bar_at(2) == doctest::Approx(0.63).epsilon(1e-14));
}

TEST_CASE("default 1000-step schedule") {
    const NoiseSchedule s = default_schedule();
    REQUIRE(s.steps() == 1000);
    const Eigen::ArrayXd oracle = alpha_bar_oracle(1000, 1e-4, 0.02);
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.alpha_bar_at(t) == doctest::Approx(oracle(t - 1)).epsilon(1e-9));
        if (t > 1) CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
    }
    CHECK(s.alpha_bar_at(1000) < 1e-3);
    // Terminal value recorded by the oracle run before the main build.
    CHECK(s.alpha_bar_at(1000) == doctest::Approx(4.0358297653756754e-05).epsilon(1e-9));
}

TEST_CASE("schedule laws hold over random valid endpoints") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const int total = rng.uniform_int(1, 64);
        double b0 = 1e-5 + rng.uniform() * 0.4;
        double b1 = b0 + rng.uniform() * (0.98 - b0);
        const NoiseSchedule s = build_schedule(total, b0, b1);
        for (int t = 1; t <= total; ++t) {
            CHECK(s.alpha_at(t) == 1.0 - s.beta_at(t));  // exact
            const double prev = t == 1 ? 1.0 : s.alpha_bar_at(t - 1);
            CHECK(s.alpha_bar_at(t) == prev * s.alpha_at(t));  // exact recurrence
            CHECK(s.alpha_bar_at(t) > 0.0);
            CHECK(s.alpha_bar_at(t) <= 1.0);
            if (t > 1) {
                CHECK(s.beta_at(t) >= s.beta_at(t - 1));
                CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
            }
        }
    }
}

TEST_CASE("invalid schedule parameters are rejected") {
    CHECK_THROWS_AS(build_schedule(0, 0.1, 0.2), ScheduleError);
    CHECK_THROWS_AS(build_schedule(10, 0.0, 0.2), ScheduleError);
    CHECK_THROWS_AS(build_schedule(10, 0.3, 0.2), ScheduleError);
    CHECK_THROWS_AS(build_schedule(10, 0.1, 1.0), ScheduleError);
    CHECK_THROWS_AS(build_schedule(10, -0.1, 0.2), ScheduleError);
}

TEST_CASE("forward_diffuse zero-noise and zero-signal cases") {
    const NoiseSchedule s = build_schedule(10, 0.05, 0.2);
    const Latent x0 = make_latent(2, 4, 4, 7);
    Latent zeros = x0;
    zeros.data.setZero();

    for (int t : {1, 5, 10}) {
        const DiffusionSample a = forward_diffuse(x0, t, zeros, s);
        CHECK((a.x_t.data - std::sqrt(s.alpha_bar_at(t)) * x0.data).cwiseAbs().maxCoeff() == 0.0);

        const Latent eps = make_latent(2, 4, 4, 100 + t);
        const DiffusionSample b = forward_diffuse(zeros, t, eps, s);
        CHECK((b.x_t.data - std::sqrt(1.0 - s.alpha_bar_at(t)) * eps.data).cwiseAbs().maxCoeff() ==
              0.0);
    }
}

TEST_CASE("forward_diffuse rejects bad shapes and timesteps") {
    const NoiseSchedule s = build_schedule(10, 0.05, 0.2);
    const Latent x0 = make_latent(2, 4, 4, 7);
    const Latent bad = make_latent(2, 4, 6, 8);
    CHECK_THROWS_AS(forward_diffuse(x0, 1, bad, s), ShapeError);
    CHECK_THROWS_AS(forward_diffuse(x0, 0, x0, s), IndexError);
    CHECK_THROWS_AS(forward_diffuse(x0, 11, x0, s), IndexError);
}

TEST_CASE("closed form matches sequential one-step noising statistics") {
    // Quick Monte-Carlo variant; the acceptance suite runs the full-size check.
    const NoiseSchedule s = default_schedule();
    const Latent x0 = make_latent(1, 4, 4, 3);
    const int draws = 4000;
    for (int t : {1, 500, 1000}) {
        const double abar = s.alpha_bar_at(t);
        Eigen::ArrayXd mean = Eigen::ArrayXd::Zero(16);
        Eigen::ArrayXd sq = Eigen::ArrayXd::Zero(16);
        Rng rng(900 + t);
        for (int d = 0; d < draws; ++d) {
            const Latent eps = make_latent(1, 4, 4, rng.next_u64());
            const DiffusionSample sample = forward_diffuse(x0, t, eps, s);
            mean += sample.x_t.data.row(0).transpose().array();
            sq += sample.x_t.data.row(0).transpose().array().square();
        }
        mean /= draws;
        sq = sq / draws - mean.square();
        const double se_mean = std::sqrt((1.0 - abar) / draws);
        const double se_var = (1.0 - abar) * std::sqrt(2.0 / (draws - 1));
        for (int i = 0; i < 16; ++i) {
            CHECK(std::abs(mean(i) - std::sqrt(abar) * x0.data(0, i)) < 4.0 * se_mean);
            CHECK(std::abs(sq(i) - (1.0 - abar)) < 4.0 * se_var);
        }
    }
}

TEST_CASE("denoise_step inverts forward_diffuse exactly at t=1") {
    const NoiseSchedule s = default_schedule();
    const Latent x0 = make_latent(4, 4, 4, 11);
    const Latent eps = make_latent(4, 4, 4, 12);
    const DiffusionSample sample = forward_diffuse(x0, 1, eps, s);
    const Latent rec = denoise_step(sample.x_t, eps, 1, s);
    CHECK((rec.data - x0.data).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("denoise_step is deterministic without noise") {
    const NoiseSchedule s = default_schedule();
    const Latent x = make_latent(4, 4, 4, 21);
    const Latent e = make_latent(4, 4, 4, 22);
    const Latent a = denoise_step(x, e, 700, s);
    const Latent b = denoise_step(x, e, 700, s);
    CHECK((a.data - b.data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("denoise_step rejects t=0 and shape mismatches") {
    const NoiseSchedule s = default_schedule();
    const Latent x = make_latent(4, 4, 4, 21);
    CHECK_THROWS_AS(denoise_step(x, x, 0, s), IndexError);
    const Latent bad = make_latent(4, 4, 6, 23);
    CHECK_THROWS_AS(denoise_step(x, bad, 5, s), ShapeError);
}

TEST_CASE("full deterministic chain with the true-eps oracle reconstructs x0") {
    const NoiseSchedule s = default_schedule();
    const Latent x0 = make_latent(1, 4, 4, 31);
    const Latent eps = make_latent(1, 4, 4, 32);
    Latent x = forward_diffuse(x0, s.steps(), eps, s).x_t;
    for (int t = s.steps(); t >= 1; --t) {
        // Oracle denoiser: the eps consistent with the memorized x0.
        Latent eps_true = x;
        const double abar = s.alpha_bar_at(t);
        eps_true.data = (x.data - std::sqrt(abar) * x0.data) / std::sqrt(1.0 - abar);
        x = denoise_step(x, eps_true, t, s);
    }
    CHECK((x.data - x0.data).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("strided schedule preserves alpha_bar at picked timesteps") {
    const NoiseSchedule full = default_schedule();
    const StridedSchedule sub = strided_schedule(full, 50);
    REQUIRE(sub.timesteps.size() == 50);
    CHECK(sub.timesteps.back() == 1000);
    double prev = 1.0;
    for (int k = 1; k <= 50; ++k) {
        const int t = sub.timesteps[static_cast<size_t>(k) - 1];
        CHECK(sub.schedule.alpha_bar_at(k) == doctest::Approx(full.alpha_bar_at(t)).epsilon(1e-12));
        CHECK(sub.schedule.alpha_at(k) ==
              doctest::Approx(full.alpha_bar_at(t) / prev).epsilon(1e-12));
        prev = full.alpha_bar_at(t);
        if (k > 1) CHECK(sub.timesteps[static_cast<size_t>(k) - 1] > sub.timesteps[static_cast<size_t>(k) - 2]);
    }
}

TEST_CASE("strided chain with the true-eps oracle also reconstructs x0") {
    const NoiseSchedule full = default_schedule();
    const StridedSchedule sub = strided_schedule(full, 25);
    const Latent x0 = make_latent(1, 4, 4, 41);
    const Latent eps = make_latent(1, 4, 4, 42);
    Latent x = forward_diffuse(x0, full.steps(), eps, full).x_t;
    for (int k = static_cast<int>(sub.timesteps.size()); k >= 1; --k) {
        Latent eps_true = x;
        const double abar = sub.schedule.alpha_bar_at(k);
        eps_true.data = (x.data - std::sqrt(abar) * x0.data) / std::sqrt(1.0 - abar);
        x = denoise_step(x, eps_true, k, sub.schedule);
    }
    CHECK((x.data - x0.data).cwiseAbs().maxCoeff() < 1e-3);
}
