// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/sampler.hpp"

#include <atomic>
#include <thread>

#include "difftext/errors.hpp"
#include "difftext/training.hpp"

namespace difftext {

namespace {

FeatureMap mask_to_latent(const Mask& mask, int factor) {
    const Mask small = downsample_mask_any(mask, factor);
    FeatureMap out(1, static_cast<int>(small.rows()), static_cast<int>(small.cols()));
    for (Eigen::Index y = 0; y < small.rows(); ++y) {
        for (Eigen::Index x = 0; x < small.cols(); ++x) {
            out.data(0, y * small.cols() + x) = small(y, x) ? 1.0 : 0.0;
        }
    }
    return out;
}

}  // namespace

Image inpaint(const Image& crop, const Mask& mask, const std::string& text, ModelBundle& bundle,
              int steps, uint64_t seed, bool deterministic) {
    if (mask.rows() != crop.height || mask.cols() != crop.width) {
        throw ShapeError("inpaint: mask dims do not match the crop");
    }
    if (steps < 1) throw ConfigError("inpaint: steps must be >= 1");
    if (crop.height % bundle.ae_config.factor != 0 || crop.width % bundle.ae_config.factor != 0) {
        throw ShapeError("inpaint: crop dims must divide by the autoencoder factor");
    }
    if (mask.sum() == 0) return crop;  // nothing to inpaint

    // Masked background, same fill convention as training.
    Image masked = crop;
    for (int y = 0; y < crop.height; ++y) {
        for (int x = 0; x < crop.width; ++x) {
            if (mask(y, x)) {
                for (int c = 0; c < crop.channel_count(); ++c) masked.at(y, x, c) = kMaskFill;
            }
        }
    }
    const Latent z_b = bundle.autoencoder.encode(masked);
    const FeatureMap m_lat = mask_to_latent(mask, bundle.ae_config.factor);
    const Eigen::MatrixXd ctx =
        bundle.condition.forward(tokenize(text, bundle.charset, bundle.cond_config.seq_len));

    const StridedSchedule sub = strided_schedule(bundle.schedule, steps);
    Rng rng(derive_seed(seed, {0x73616d70}));

    Latent x = z_b;
    for (Eigen::Index r = 0; r < x.data.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.data.cols(); ++c) x.data(r, c) = rng.normal();
    }

    for (int k = static_cast<int>(sub.timesteps.size()); k >= 1; --k) {
        const int t_model = sub.timesteps[static_cast<size_t>(k) - 1];
        const FeatureMap z_concat = concat_denoiser_input(x, z_b, m_lat);
        const FeatureMap eps_pred = bundle.denoiser.forward(z_concat, t_model, ctx);
        if (deterministic || k == 1) {
            x = denoise_step(x, eps_pred, k, sub.schedule);
        } else {
            Latent noise = x;
            for (Eigen::Index r = 0; r < noise.data.rows(); ++r) {
                for (Eigen::Index c = 0; c < noise.data.cols(); ++c) noise.data(r, c) = rng.normal();
            }
            x = denoise_step(x, eps_pred, k, sub.schedule, &noise);
        }
    }

    const Image decoded = bundle.autoencoder.decode(x);
    Image out = crop;
    for (int y = 0; y < crop.height; ++y) {
        for (int x2 = 0; x2 < crop.width; ++x2) {
            if (mask(y, x2)) {
                for (int c = 0; c < crop.channel_count(); ++c) {
                    out.at(y, x2, c) = decoded.at(y, x2, c);
                }
            }
        }
    }
    return out;
}

std::vector<std::pair<CropJob, Image>> batch_inpaint(const std::vector<CropJob>& jobs,
                                                     const std::map<std::string, Image>& backgrounds,
                                                     ModelBundle& bundle,
                                                     const SamplerParams& params) {
    std::vector<std::pair<CropJob, Image>> results(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());

    auto run_one = [&](size_t i, ModelBundle& models) {
        const CropJob& job = jobs[i];
        try {
            const auto bg = backgrounds.find(job.image_id);
            if (bg == backgrounds.end()) {
                throw DataError("no background image for id '" + job.image_id + "'");
            }
            const Image crop = crop_image(bg->second, job.crop_box);
            const Mask mask = rasterize_polygon(job.region_local, job.crop_box.h, job.crop_box.w);
            results[i] = {job, inpaint(crop, mask, job.text, models, params.steps, job.seed,
                                       params.deterministic)};
        } catch (const Error& e) {
            errors[i] = std::make_exception_ptr(
                Error(e.kind(), "job " + job.image_id + "#" + std::to_string(i) + ": " + e.what()));
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    if (params.threads <= 1 || jobs.size() <= 1) {
        for (size_t i = 0; i < jobs.size(); ++i) run_one(i, bundle);
    } else {
        // Models cache activations during forward, so each worker needs its own
        // copy. Per-job seeds keep results identical to the sequential path.
        const size_t workers = std::min<size_t>(static_cast<size_t>(params.threads), jobs.size());
        std::vector<std::thread> pool;
        std::atomic<size_t> cursor{0};
        for (size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                (void)w;
                ModelBundle local = bundle;
                for (size_t i = cursor.fetch_add(1); i < jobs.size(); i = cursor.fetch_add(1)) {
                    run_one(i, local);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    for (size_t i = 0; i < jobs.size(); ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
    }
    return results;
}

}  // namespace difftext
