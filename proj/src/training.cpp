// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "difftext/errors.hpp"
#include "difftext/png_io.hpp"

namespace difftext {

MaskedPair make_masked_pair(const Image& image, const Polygon& polygon, const std::string& text,
                            double fill) {
    if (polygon.size() < 3) {
        throw AnnotationError("make_masked_pair: polygon needs at least 3 vertices");
    }
    if (!polygon_in_bounds(polygon, image.width, image.height)) {
        throw AnnotationError("make_masked_pair: polygon outside image bounds");
    }
    if (polygon_area(polygon) <= 0.0) {
        throw AnnotationError("make_masked_pair: polygon has zero area");
    }
    MaskedPair pair;
    pair.original = image;
    pair.mask = rasterize_polygon(polygon, image.height, image.width);
    pair.masked = image;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (pair.mask(y, x)) {
                for (int c = 0; c < image.channel_count(); ++c) pair.masked.at(y, x, c) = fill;
            }
        }
    }
    pair.text = text;
    return pair;
}

std::vector<TrainInstance> load_annotations(const std::filesystem::path& jsonl_path) {
    std::ifstream f(jsonl_path);
    if (!f) throw IoError("cannot open annotations: " + jsonl_path.string());
    std::vector<TrainInstance> out;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("annotations line " + std::to_string(line_no) + ": " + e.what());
        }
        TrainInstance inst;
        try {
            inst.image = j.at("image").get<std::string>();
            inst.text = j.at("text").get<std::string>();
            for (const auto& pt : j.at("polygon")) {
                inst.polygon.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("annotations line " + std::to_string(line_no) + ": " + e.what());
        }
        out.push_back(std::move(inst));
    }
    return out;
}

MaskedPair build_instance_pair(const Image& image, const Polygon& polygon, const std::string& text,
                               int size) {
    if (image.height < size || image.width < size) {
        throw DataError("build_instance_pair: image smaller than training window");
    }
    const Box bbox = polygon_bbox(polygon);
    int x0 = bbox.x + bbox.w / 2 - size / 2;
    int y0 = bbox.y + bbox.h / 2 - size / 2;
    x0 = std::clamp(x0, 0, image.width - size);
    y0 = std::clamp(y0, 0, image.height - size);

    Image window(size, size, image.channel_count());
    for (int c = 0; c < image.channel_count(); ++c) {
        window.channels[static_cast<size_t>(c)] =
            image.channels[static_cast<size_t>(c)].block(y0, x0, size, size);
    }
    Polygon local = polygon;
    for (Point& p : local) {
        p.x = std::clamp(p.x - x0, 0.0, static_cast<double>(size));
        p.y = std::clamp(p.y - y0, 0.0, static_cast<double>(size));
    }
    return make_masked_pair(window, local, text);
}

namespace {

Latent gaussian_like(const Latent& ref, Rng& rng) {
    Latent eps = ref;
    for (Eigen::Index r = 0; r < eps.data.rows(); ++r) {
        for (Eigen::Index c = 0; c < eps.data.cols(); ++c) eps.data(r, c) = rng.normal();
    }
    return eps;
}

FeatureMap latent_mask(const Mask& mask, int factor) {
    const Mask small = downsample_mask_any(mask, factor);
    FeatureMap out(1, static_cast<int>(small.rows()), static_cast<int>(small.cols()));
    for (Eigen::Index y = 0; y < small.rows(); ++y) {
        for (Eigen::Index x = 0; x < small.cols(); ++x) {
            out.data(0, y * small.cols() + x) = small(y, x) ? 1.0 : 0.0;
        }
    }
    return out;
}

// The autoencoder is frozen during diffusion training, so per-pair latents are
// computed once and reused across steps.
struct EncodedPair {
    Latent z0;
    Latent z_b;
    FeatureMap m_lat;
    std::vector<int> tokens;
};

EncodedPair encode_pair(const MaskedPair& pair, ModelBundle& bundle) {
    EncodedPair enc;
    enc.z0 = bundle.autoencoder.encode(pair.original);
    enc.z_b = bundle.autoencoder.encode(pair.masked);
    enc.m_lat = latent_mask(pair.mask, bundle.ae_config.factor);
    enc.tokens = tokenize(pair.text, bundle.charset, bundle.cond_config.seq_len);
    return enc;
}

double training_step_encoded(const std::vector<const EncodedPair*>& batch, ModelBundle& bundle,
                             nn::AdamW& optimizer, const nn::ParamRefs& trainable, Rng& rng) {
    if (batch.empty()) throw ConfigError("training_step: empty batch");
    const int total_steps = bundle.schedule.steps();

    // Zero every gradient the backward pass touches, trainable or not.
    optimizer.zero_grad(trainable);
    for (nn::Param* p : bundle.denoiser.params()) p->grad.setZero();
    for (nn::Param* p : bundle.condition.params()) p->grad.setZero();

    double loss = 0.0;
    const double batch_size = static_cast<double>(batch.size());
    for (const EncodedPair* pair : batch) {
        const int t = rng.uniform_int(1, total_steps);
        const Latent eps = gaussian_like(pair->z0, rng);
        const DiffusionSample sample = forward_diffuse(pair->z0, t, eps, bundle.schedule);

        const Eigen::MatrixXd ctx = bundle.condition.forward(pair->tokens);
        const FeatureMap z_concat = concat_denoiser_input(sample.x_t, pair->z_b, pair->m_lat);
        const FeatureMap eps_pred = bundle.denoiser.forward(z_concat, t, ctx);

        const double numel = static_cast<double>(eps_pred.data.size());
        loss += noise_loss(eps_pred, eps) / batch_size;

        FeatureMap g = eps_pred;
        g.data = 2.0 * (eps_pred.data - eps.data) / numel / batch_size;
        Eigen::MatrixXd gctx;
        bundle.denoiser.backward(g, &gctx);
        bundle.condition.backward(gctx);
    }
    if (!std::isfinite(loss)) {
        throw DivergenceError("training_step: non-finite loss (step " +
                              std::to_string(optimizer.step_count + 1) + ")");
    }
    optimizer.step(trainable);
    return loss;
}

}  // namespace

double noise_loss(const Latent& eps_pred, const Latent& eps) {
    if (!eps_pred.same_shape(eps)) throw ShapeError("noise_loss: shape mismatch");
    return (eps_pred.data - eps.data).squaredNorm() / static_cast<double>(eps.data.size());
}

double training_step(const std::vector<const MaskedPair*>& batch, ModelBundle& bundle,
                     nn::AdamW& optimizer, const nn::ParamRefs& trainable, Rng& rng) {
    if (batch.empty()) throw ConfigError("training_step: empty batch");
    std::vector<EncodedPair> encoded;
    encoded.reserve(batch.size());
    for (const MaskedPair* pair : batch) encoded.push_back(encode_pair(*pair, bundle));
    std::vector<const EncodedPair*> refs;
    refs.reserve(encoded.size());
    for (const EncodedPair& e : encoded) refs.push_back(&e);
    return training_step_encoded(refs, bundle, optimizer, trainable, rng);
}

TrainingRun run_training(ModelBundle& bundle, const std::vector<MaskedPair>& pairs,
                         const TrainConfig& config) {
    if (pairs.empty()) throw ConfigError("run_training: empty dataset");
    if (!config.freeze_autoencoder) {
        throw ConfigError(
            "run_training: joint autoencoder training is unsupported; train it separately and "
            "keep freeze_autoencoder set");
    }

    nn::AdamW optimizer;
    optimizer.lr = config.learning_rate;
    optimizer.beta1 = config.beta1;
    optimizer.beta2 = config.beta2;
    optimizer.weight_decay = config.weight_decay;

    nn::ParamRefs trainable = bundle.denoiser.params();
    if (!config.freeze_condition_encoder) {
        const nn::ParamRefs cond = bundle.condition.params();
        trainable.insert(trainable.end(), cond.begin(), cond.end());
    }

    const int total_steps = config.steps > 0
                                ? config.steps
                                : config.epochs * std::max<int>(1, static_cast<int>(pairs.size()) /
                                                                       std::max(1, config.batch_size));
    Rng rng(derive_seed(config.seed, {0x7261696e}));

    std::vector<EncodedPair> encoded;
    encoded.reserve(pairs.size());
    for (const MaskedPair& pair : pairs) encoded.push_back(encode_pair(pair, bundle));

    TrainingRun run;
    run.loss_history.reserve(static_cast<size_t>(total_steps));
    std::vector<const EncodedPair*> batch;
    for (int step = 0; step < total_steps; ++step) {
        batch.clear();
        const int bs = std::min<int>(config.batch_size, static_cast<int>(pairs.size()));
        for (int b = 0; b < bs; ++b) {
            batch.push_back(&encoded[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int>(encoded.size()) - 1))]);
        }
        run.loss_history.push_back(training_step_encoded(batch, bundle, optimizer, trainable, rng));
    }
    return run;
}

TrainingRun run_training_from_files(ModelBundle& bundle, const std::filesystem::path& image_dir,
                                    const std::filesystem::path& annotations,
                                    const TrainConfig& config,
                                    const std::filesystem::path& checkpoint_out) {
    const std::vector<TrainInstance> instances = load_annotations(annotations);
    if (instances.empty()) throw ConfigError("run_training: no annotated instances");
    std::vector<MaskedPair> pairs;
    pairs.reserve(instances.size());
    for (const TrainInstance& inst : instances) {
        const Image img = read_png(image_dir / inst.image);
        pairs.push_back(build_instance_pair(img, inst.polygon, inst.text, config.image_size));
    }
    TrainingRun run = run_training(bundle, pairs, config);
    bundle.save(checkpoint_out, config, run.loss_history);
    return run;
}

}  // namespace difftext
