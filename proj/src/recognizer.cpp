// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/recognizer.hpp"

#include <algorithm>
#include <cmath>

#include "difftext/checkpoint.hpp"
#include "difftext/crops.hpp"
#include "difftext/errors.hpp"

namespace difftext {

PatchLayout patch_layout(int bbox_w, int bbox_h, int out_size) {
    PatchLayout l;
    l.scale = std::min(static_cast<double>(out_size) / bbox_w,
                       static_cast<double>(out_size) / bbox_h);
    l.scaled_w = std::max(1, static_cast<int>(std::lround(bbox_w * l.scale)));
    l.scaled_h = std::max(1, static_cast<int>(std::lround(bbox_h * l.scale)));
    l.scaled_w = std::min(l.scaled_w, out_size);
    l.scaled_h = std::min(l.scaled_h, out_size);
    l.pad_left = (out_size - l.scaled_w) / 2;
    l.pad_top = (out_size - l.scaled_h) / 2;
    return l;
}

namespace {

double bilinear_sample(const Image& img, int channel, double y, double x) {
    const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, img.width - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, img.height - 1);
    const int x1 = std::min(x0 + 1, img.width - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fx = std::clamp(x - x0, 0.0, 1.0);
    const double fy = std::clamp(y - y0, 0.0, 1.0);
    const double top = img.at(y0, x0, channel) * (1 - fx) + img.at(y0, x1, channel) * fx;
    const double bot = img.at(y1, x0, channel) * (1 - fx) + img.at(y1, x1, channel) * fx;
    return top * (1 - fy) + bot * fy;
}

}  // namespace

Image extract_patch(const Image& image, const Polygon& polygon, int out_size) {
    if (polygon.size() < 3) throw AnnotationError("extract_patch: polygon needs >= 3 vertices");
    if (!polygon_in_bounds(polygon, image.width, image.height)) {
        throw AnnotationError("extract_patch: polygon outside image bounds");
    }
    Box bbox = polygon_bbox(polygon);
    bbox.x = std::clamp(bbox.x, 0, image.width - 1);
    bbox.y = std::clamp(bbox.y, 0, image.height - 1);
    bbox.w = std::clamp(bbox.w, 1, image.width - bbox.x);
    bbox.h = std::clamp(bbox.h, 1, image.height - bbox.y);
    if (polygon_area(polygon) <= 0.0) throw AnnotationError("extract_patch: zero-area polygon");

    const Image crop = crop_image(image, bbox);
    const PatchLayout l = patch_layout(bbox.w, bbox.h, out_size);

    Image patch(out_size, out_size, image.channel_count(), 0.0);  // mid-gray pad
    for (int y = 0; y < l.scaled_h; ++y) {
        for (int x = 0; x < l.scaled_w; ++x) {
            const double sy = (y + 0.5) / l.scale - 0.5;
            const double sx = (x + 0.5) / l.scale - 0.5;
            for (int c = 0; c < image.channel_count(); ++c) {
                patch.at(l.pad_top + y, l.pad_left + x, c) = bilinear_sample(crop, c, sy, sx);
            }
        }
    }
    return patch;
}

std::pair<std::vector<GeneratedInstance>, std::vector<GeneratedInstance>> filter_instances(
    std::vector<GeneratedInstance> instances, const RecognizeFn& recognize, double threshold) {
    if (threshold < 0.0 || threshold > 1.0) {
        throw ConfigError("filter_instances: threshold must lie in [0, 1]");
    }
    std::vector<GeneratedInstance> kept;
    std::vector<GeneratedInstance> discarded;
    for (size_t i = 0; i < instances.size(); ++i) {
        GeneratedInstance inst = std::move(instances[i]);
        const auto [text, confidence] = recognize(inst, i);
        inst.recognized = text;
        inst.confidence = confidence;
        inst.kept = confidence >= threshold;
        (inst.kept ? kept : discarded).push_back(std::move(inst));
    }
    return {std::move(kept), std::move(discarded)};
}

ToyRecognizer::ToyRecognizer(const ToyRecognizerConfig& config, const Charset& charset, Rng& rng)
    : m_config(config), m_charset(charset) {
    if (config.input_size % 8 != 0) {
        throw ConfigError("toy recognizer: input size must be a multiple of 8");
    }
    const int w = config.base_width;
    m_conv1.init("rec.conv1", 3, w, 3, 2, 1, rng);
    m_conv2.init("rec.conv2", w, 2 * w, 3, 2, 1, rng);
    m_conv3.init("rec.conv3", 2 * w, 2 * w, 3, 2, 1, rng);
    const int spatial = (config.input_size / 8) * (config.input_size / 8);
    m_fc.init("rec.fc", 2 * w * spatial, config.positions * charset.size(), rng);
}

Eigen::MatrixXd ToyRecognizer::logits(const Image& patch) const {
    if (patch.height != m_config.input_size || patch.width != m_config.input_size ||
        patch.channel_count() != 3) {
        throw ShapeError("toy recognizer: expected a 3x" + std::to_string(m_config.input_size) +
                         "x" + std::to_string(m_config.input_size) + " patch");
    }
    FeatureMap h = m_conv1.forward(image_to_feature(patch));
    h = m_act1.forward(h);
    h = m_conv2.forward(h);
    h = m_act2.forward(h);
    h = m_conv3.forward(h);
    h = m_act3.forward(h);
    const Eigen::Map<const Eigen::VectorXd> flat(h.data.data(), h.data.size());
    const Eigen::MatrixXd out = m_fc.forward(flat);
    return Eigen::Map<const Eigen::MatrixXd>(out.data(), m_charset.size(), m_config.positions);
}

Eigen::MatrixXd ToyRecognizer::position_probs(const Image& patch) const {
    Eigen::MatrixXd l = logits(patch);
    for (Eigen::Index c = 0; c < l.cols(); ++c) {
        const double mx = l.col(c).maxCoeff();
        l.col(c) = (l.col(c).array() - mx).exp();
        l.col(c) /= l.col(c).sum();
    }
    return l;
}

std::pair<std::string, double> ToyRecognizer::recognize(const Image& patch) const {
    const Eigen::MatrixXd probs = position_probs(patch);
    std::string text;
    double log_conf = 0.0;
    for (Eigen::Index pos = 0; pos < probs.cols(); ++pos) {
        Eigen::Index best = 0;
        probs.col(pos).maxCoeff(&best);
        log_conf += std::log(std::max(probs(best, pos), 1e-300));
        if (best == Charset::pad_id) continue;
        if (text.size() == static_cast<size_t>(pos)) {  // stop growing at the first pad
            text.push_back(m_charset.char_of(static_cast<int>(best)));
        }
    }
    const double confidence = std::exp(log_conf / static_cast<double>(probs.cols()));
    return {text, std::clamp(confidence, 0.0, 1.0)};
}

nn::ParamRefs ToyRecognizer::params() {
    nn::ParamRefs out;
    m_conv1.collect(out);
    m_conv2.collect(out);
    m_conv3.collect(out);
    m_fc.collect(out);
    return out;
}

void ToyRecognizer::save(const std::filesystem::path& path) const {
    Checkpoint ck;
    ck.kind = "difftext-recognizer";
    ck.meta["input_size"] = m_config.input_size;
    ck.meta["positions"] = m_config.positions;
    ck.meta["base_width"] = m_config.base_width;
    ck.meta["charset"] = m_charset.chars;
    ck.meta["charset_hash"] = m_charset.hash();
    ck.add_params(const_cast<ToyRecognizer*>(this)->params());
    ck.save(path);
}

ToyRecognizer ToyRecognizer::load_file(const std::filesystem::path& path) {
    const Checkpoint ck = Checkpoint::load(path);
    if (ck.kind != "difftext-recognizer") {
        throw CompatibilityError("expected a difftext-recognizer checkpoint, got '" + ck.kind + "'");
    }
    ToyRecognizerConfig cfg;
    cfg.input_size = ck.meta.at("input_size").get<int>();
    cfg.positions = ck.meta.at("positions").get<int>();
    cfg.base_width = ck.meta.at("base_width").get<int>();
    Charset charset;
    charset.chars = ck.meta.at("charset").get<std::string>();
    Rng rng(0);
    ToyRecognizer model(cfg, charset, rng);
    ck.load_params(model.params());
    return model;
}

std::vector<double> train_toy_recognizer(ToyRecognizer& model,
                                         const std::vector<std::pair<Image, std::string>>& corpus,
                                         int steps, double learning_rate, uint64_t seed) {
    if (corpus.empty()) throw ConfigError("train_toy_recognizer: empty corpus");
    nn::AdamW opt;
    opt.lr = learning_rate;
    nn::ParamRefs params = model.params();
    Rng rng(derive_seed(seed, {0x726563}));
    const int vocab = model.charset().size();
    const int positions = model.config().positions;

    std::vector<double> history;
    history.reserve(static_cast<size_t>(steps));
    for (int step = 0; step < steps; ++step) {
        opt.zero_grad(params);
        const int batch = std::min<int>(8, static_cast<int>(corpus.size()));
        double loss = 0.0;
        for (int b = 0; b < batch; ++b) {
            const auto& [patch, word] =
                corpus[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(corpus.size()) - 1))];
            const std::vector<int> target = tokenize(word, model.charset(), positions);

            const Eigen::MatrixXd l = model.logits(patch);
            Eigen::MatrixXd probs = l;
            for (Eigen::Index c = 0; c < probs.cols(); ++c) {
                const double mx = probs.col(c).maxCoeff();
                probs.col(c) = (probs.col(c).array() - mx).exp();
                probs.col(c) /= probs.col(c).sum();
            }
            Eigen::MatrixXd grad = probs;
            for (int pos = 0; pos < positions; ++pos) {
                loss += -std::log(std::max(probs(target[static_cast<size_t>(pos)], pos), 1e-300)) /
                        positions / batch;
                grad(target[static_cast<size_t>(pos)], pos) -= 1.0;
            }
            grad /= static_cast<double>(positions) * batch;

            // Backward through fc and the conv stack.
            const Eigen::Map<const Eigen::VectorXd> gflat(grad.data(), grad.size());
            const Eigen::MatrixXd gfc = model.m_fc.backward(gflat);
            FeatureMap gh(2 * model.config().base_width, model.config().input_size / 8,
                          model.config().input_size / 8);
            gh.data = Eigen::Map<const Eigen::MatrixXd>(gfc.data(), gh.data.rows(), gh.data.cols());
            FeatureMap g = model.m_act3.backward(gh);
            g = model.m_conv3.backward(g);
            g = model.m_act2.backward(g);
            g = model.m_conv2.backward(g);
            g = model.m_act1.backward(g);
            model.m_conv1.backward(g);
        }
        if (!std::isfinite(loss)) {
            throw DivergenceError("train_toy_recognizer: non-finite loss at step " +
                                  std::to_string(step));
        }
        history.push_back(loss);
        opt.step(params);
    }
    return history;
}

double recognizer_accuracy(const ToyRecognizer& model,
                           const std::vector<std::pair<Image, std::string>>& corpus) {
    if (corpus.empty()) return 0.0;
    int hits = 0;
    for (const auto& [patch, word] : corpus) {
        std::string folded;
        for (char c : word) folded.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        if (model.recognize(patch).first == folded) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(corpus.size());
}

}  // namespace difftext
