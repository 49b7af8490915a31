// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "difftext/errors.hpp"
#include "difftext/tensor.hpp"

namespace difftext {

// Per-timestep noising coefficients. Arrays are 0-indexed; timestep t in [1, T]
// maps to index t-1. All schedule math is 64-bit.
struct NoiseSchedule {
    Eigen::ArrayXd beta;       // beta[t-1] in (0, 1)
    Eigen::ArrayXd alpha;      // 1 - beta
    Eigen::ArrayXd alpha_bar;  // running product of alpha

    int steps() const { return static_cast<int>(beta.size()); }

    double beta_at(int t) const { return beta(check(t)); }
    double alpha_at(int t) const { return alpha(check(t)); }
    double alpha_bar_at(int t) const { return alpha_bar(check(t)); }

private:
    int check(int t) const {
        if (t < 1 || t > steps()) {
            throw IndexError("timestep " + std::to_string(t) + " outside [1, " +
                             std::to_string(steps()) + "]");
        }
        return t - 1;
    }
};

struct DiffusionSample {
    Latent x_t;
    Latent eps;
    int t = 0;
};

inline NoiseSchedule build_schedule(int total_steps, double beta_start, double beta_end) {
    if (total_steps < 1) throw ScheduleError("build_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw ScheduleError("build_schedule: need 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.beta = Eigen::ArrayXd::LinSpaced(total_steps, beta_start, beta_end);
    s.alpha = 1.0 - s.beta;
    s.alpha_bar = Eigen::ArrayXd(total_steps);
    double prod = 1.0;
    for (int i = 0; i < total_steps; ++i) {
        prod *= s.alpha(i);
        s.alpha_bar(i) = prod;
    }
    return s;
}

// Conventional DDPM endpoints; the linear shape is the only stated constraint.
inline NoiseSchedule default_schedule(int total_steps = 1000) {
    return build_schedule(total_steps, 1e-4, 0.02);
}

// Closed-form forward noising: x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
inline DiffusionSample forward_diffuse(const Latent& x0, int t, const Latent& eps,
                                       const NoiseSchedule& schedule) {
    if (!x0.same_shape(eps)) throw ShapeError("forward_diffuse: x0/eps shape mismatch");
    const double abar = schedule.alpha_bar_at(t);
    DiffusionSample out;
    out.x_t = x0;
    out.x_t.data = std::sqrt(abar) * x0.data + std::sqrt(1.0 - abar) * eps.data;
    out.eps = eps;
    out.t = t;
    return out;
}

// Ancestral DDPM posterior step with variance beta_t:
//   x_{t-1} = (x_t - beta_t / sqrt(1 - abar_t) * eps_pred) / sqrt(alpha_t) + sqrt(beta_t) z
// No noise is added at t = 1, and passing no noise makes the step deterministic.
inline Latent denoise_step(const Latent& x_t, const Latent& eps_pred, int t,
                           const NoiseSchedule& schedule,
                           const Latent* noise = nullptr) {
    if (!x_t.same_shape(eps_pred)) throw ShapeError("denoise_step: x_t/eps_pred shape mismatch");
    const double beta = schedule.beta_at(t);
    const double alpha = schedule.alpha_at(t);
    const double abar = schedule.alpha_bar_at(t);
    Latent out = x_t;
    out.data = (x_t.data - (beta / std::sqrt(1.0 - abar)) * eps_pred.data) / std::sqrt(alpha);
    if (t > 1 && noise != nullptr) {
        if (!x_t.same_shape(*noise)) throw ShapeError("denoise_step: noise shape mismatch");
        out.data += std::sqrt(beta) * noise->data;
    }
    return out;
}

// Evenly strided subset of timesteps ending at T. The derived schedule satisfies
// alpha_bar'[k] == alpha_bar[t_k] exactly, so denoise_step works unchanged on it;
// `timesteps[k-1]` maps derived step k back to the original timestep for the model.
struct StridedSchedule {
    NoiseSchedule schedule;
    std::vector<int> timesteps;  // ascending, timesteps[k-1] = original t for derived step k
};

inline StridedSchedule strided_schedule(const NoiseSchedule& full, int num_steps) {
    const int total = full.steps();
    if (num_steps < 1) throw ScheduleError("strided_schedule: num_steps must be >= 1");
    num_steps = std::min(num_steps, total);
    StridedSchedule out;
    out.timesteps.resize(num_steps);
    for (int k = 1; k <= num_steps; ++k) {
        out.timesteps[k - 1] = static_cast<int>(
            std::llround(static_cast<double>(k) * total / num_steps));
    }
    out.timesteps.back() = total;
    for (int k = 1; k < num_steps; ++k) {
        out.timesteps[k] = std::max(out.timesteps[k], out.timesteps[k - 1] + 1);
    }
    out.schedule.alpha_bar = Eigen::ArrayXd(num_steps);
    out.schedule.alpha = Eigen::ArrayXd(num_steps);
    out.schedule.beta = Eigen::ArrayXd(num_steps);
    double prev_abar = 1.0;
    for (int k = 0; k < num_steps; ++k) {
        const double abar = full.alpha_bar_at(out.timesteps[k]);
        out.schedule.alpha_bar(k) = abar;
        out.schedule.alpha(k) = abar / prev_abar;
        out.schedule.beta(k) = 1.0 - out.schedule.alpha(k);
        prev_abar = abar;
    }
    return out;
}

}  // namespace difftext
