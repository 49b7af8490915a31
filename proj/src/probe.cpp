// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/probe.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <tuple>

#include "difftext/checkpoint.hpp"
#include "difftext/errors.hpp"
#include "difftext/png_io.hpp"

namespace difftext {

namespace {

void validate_polygons(const std::vector<std::vector<Polygon>>& sets) {
    for (const auto& per_image : sets) {
        for (const Polygon& poly : per_image) {
            if (poly.size() < 3) throw AnnotationError("match_and_score: polygon needs >= 3 points");
            if (polygon_area(poly) <= 0.0) {
                throw AnnotationError("match_and_score: zero-area polygon");
            }
        }
    }
}

}  // namespace

DetectionScore match_and_score(const std::vector<std::vector<Polygon>>& predictions,
                               const std::vector<std::vector<Polygon>>& ground_truth,
                               double iou_threshold) {
    if (predictions.size() != ground_truth.size()) {
        throw ShapeError("match_and_score: per-image list lengths differ");
    }
    if (!(iou_threshold > 0.0) || iou_threshold > 1.0) {
        throw ConfigError("match_and_score: iou_threshold must lie in (0, 1]");
    }
    validate_polygons(predictions);
    validate_polygons(ground_truth);

    DetectionScore score;
    for (size_t img = 0; img < predictions.size(); ++img) {
        const auto& preds = predictions[img];
        const auto& gts = ground_truth[img];
        score.predictions += static_cast<long long>(preds.size());
        score.ground_truths += static_cast<long long>(gts.size());

        std::vector<std::tuple<double, size_t, size_t>> pairs;  // (iou, pred, gt)
        for (size_t p = 0; p < preds.size(); ++p) {
            for (size_t g = 0; g < gts.size(); ++g) {
                const double iou = raster_iou(preds[p], gts[g]);
                if (iou >= iou_threshold) pairs.emplace_back(iou, p, g);
            }
        }
        std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
            if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
            if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
            return std::get<2>(a) < std::get<2>(b);
        });
        std::vector<bool> pred_used(preds.size(), false), gt_used(gts.size(), false);
        for (const auto& [iou, p, g] : pairs) {
            (void)iou;
            if (pred_used[p] || gt_used[g]) continue;
            pred_used[p] = true;
            gt_used[g] = true;
            ++score.matches;
        }
    }

    score.precision = score.predictions == 0
                          ? 0.0
                          : static_cast<double>(score.matches) / static_cast<double>(score.predictions);
    if (score.ground_truths == 0) {
        score.recall = score.predictions == 0 ? 1.0 : 0.0;
    } else {
        score.recall = static_cast<double>(score.matches) / static_cast<double>(score.ground_truths);
    }
    const double pr = score.precision + score.recall;
    score.hmean = pr == 0.0 ? 0.0 : 2.0 * score.precision * score.recall / pr;
    return score;
}

namespace {

long long best_matching(const std::vector<std::vector<bool>>& adj, size_t pred,
                        std::vector<bool>& gt_used) {
    if (pred == adj.size()) return 0;
    // Skip this prediction.
    long long best = best_matching(adj, pred + 1, gt_used);
    for (size_t g = 0; g < gt_used.size(); ++g) {
        if (!adj[pred][g] || gt_used[g]) continue;
        gt_used[g] = true;
        best = std::max(best, 1 + best_matching(adj, pred + 1, gt_used));
        gt_used[g] = false;
    }
    return best;
}

}  // namespace

long long max_matching_oracle(const std::vector<Polygon>& predictions,
                              const std::vector<Polygon>& ground_truth, double iou_threshold) {
    std::vector<std::vector<bool>> adj(predictions.size(),
                                       std::vector<bool>(ground_truth.size(), false));
    for (size_t p = 0; p < predictions.size(); ++p) {
        for (size_t g = 0; g < ground_truth.size(); ++g) {
            adj[p][g] = raster_iou(predictions[p], ground_truth[g]) >= iou_threshold;
        }
    }
    std::vector<bool> gt_used(ground_truth.size(), false);
    return best_matching(adj, 0, gt_used);
}

DetectorProbe::DetectorProbe(const ProbeConfig& config, Rng& rng) : m_config(config) {
    const int w = config.base_width;
    m_conv1.init("probe.conv1", 3, w, 3, 1, 1, rng);
    m_conv2.init("probe.conv2", w, w, 3, 1, 1, rng);
    m_conv3.init("probe.conv3", w, w, 3, 1, 1, rng);
    m_head.init("probe.head", w, 1, 3, 1, 1, rng, 0.1);
}

FeatureMap DetectorProbe::logits(const Image& image) {
    FeatureMap h = m_act1.forward(m_conv1.forward(image_to_feature(image)));
    h = m_act2.forward(m_conv2.forward(h));
    h = m_act3.forward(m_conv3.forward(h));
    return m_head.forward(h);
}

Eigen::MatrixXd DetectorProbe::pixel_probs(const Image& image) {
    const FeatureMap l = logits(image);
    Eigen::MatrixXd probs(image.height, image.width);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            probs(y, x) = 1.0 / (1.0 + std::exp(-l.data(0, static_cast<Eigen::Index>(y) * image.width + x)));
        }
    }
    return probs;
}

std::vector<Polygon> DetectorProbe::predict(const Image& image) {
    const Eigen::MatrixXd probs = pixel_probs(image);
    Mask binary = Mask::Zero(image.height, image.width);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) binary(y, x) = probs(y, x) >= m_config.threshold;
    }

    // 8-connected components, bbox per component.
    std::vector<Polygon> out;
    Eigen::MatrixXi labels = Eigen::MatrixXi::Constant(image.height, image.width, -1);
    std::vector<std::pair<int, int>> stack;
    int next_label = 0;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (!binary(y, x) || labels(y, x) >= 0) continue;
            int minx = x, maxx = x, miny = y, maxy = y, count = 0;
            stack.push_back({y, x});
            labels(y, x) = next_label;
            while (!stack.empty()) {
                const auto [cy, cx] = stack.back();
                stack.pop_back();
                ++count;
                minx = std::min(minx, cx);
                maxx = std::max(maxx, cx);
                miny = std::min(miny, cy);
                maxy = std::max(maxy, cy);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || nx < 0 || ny >= image.height || nx >= image.width) continue;
                        if (!binary(ny, nx) || labels(ny, nx) >= 0) continue;
                        labels(ny, nx) = next_label;
                        stack.push_back({ny, nx});
                    }
                }
            }
            ++next_label;
            if (count < m_config.min_component_area) continue;
            const double x0 = minx, y0 = miny, x1 = maxx + 1, y1 = maxy + 1;
            out.push_back({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
        }
    }
    return out;
}

double DetectorProbe::train_step_loss_and_backward(const Image& image, const Mask& target,
                                                   double scale) {
    if (target.rows() != image.height || target.cols() != image.width) {
        throw ShapeError("probe training: mask dims do not match the image");
    }
    const FeatureMap l = logits(image);
    const double numel = static_cast<double>(l.data.size());
    double loss = 0.0;
    FeatureMap g(1, image.height, image.width);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const Eigen::Index pos = static_cast<Eigen::Index>(y) * image.width + x;
            const double z = l.data(0, pos);
            const double t = target(y, x) ? 1.0 : 0.0;
            const double s = 1.0 / (1.0 + std::exp(-z));
            const double w = t > 0.5 ? m_config.pos_weight : 1.0;
            loss += -w * scale * (t * std::log(std::max(s, 1e-300)) +
                          (1.0 - t) * std::log(std::max(1.0 - s, 1e-300))) / numel;
            g.data(0, pos) = w * scale * (s - t) / numel;
        }
    }
    FeatureMap gh = m_head.backward(g);
    gh = m_conv3.backward(m_act3.backward(gh));
    gh = m_conv2.backward(m_act2.backward(gh));
    m_conv1.backward(m_act1.backward(gh));
    return loss;
}

nn::ParamRefs DetectorProbe::params() {
    nn::ParamRefs out;
    m_conv1.collect(out);
    m_conv2.collect(out);
    m_conv3.collect(out);
    m_head.collect(out);
    return out;
}

void DetectorProbe::save(const std::filesystem::path& path) const {
    Checkpoint ck;
    ck.kind = "difftext-probe";
    ck.meta["base_width"] = m_config.base_width;
    ck.meta["threshold"] = m_config.threshold;
    ck.meta["min_component_area"] = m_config.min_component_area;
    ck.meta["pos_weight"] = m_config.pos_weight;
    ck.add_params(const_cast<DetectorProbe*>(this)->params());
    ck.save(path);
}

DetectorProbe DetectorProbe::load_file(const std::filesystem::path& path) {
    const Checkpoint ck = Checkpoint::load(path);
    if (ck.kind != "difftext-probe") {
        throw CompatibilityError("expected a difftext-probe checkpoint, got '" + ck.kind + "'");
    }
    ProbeConfig cfg;
    cfg.base_width = ck.meta.at("base_width").get<int>();
    cfg.threshold = ck.meta.at("threshold").get<double>();
    cfg.min_component_area = ck.meta.at("min_component_area").get<int>();
    cfg.pos_weight = ck.meta.at("pos_weight").get<double>();
    Rng rng(0);
    DetectorProbe probe(cfg, rng);
    ck.load_params(probe.params());
    return probe;
}

ProbeTrainResult train_probe(DetectorProbe& probe, const std::filesystem::path& manifest_path,
                             const ProbeTrainConfig& config) {
    const std::vector<DatasetRecord> records = read_manifest(manifest_path);
    if (records.empty()) throw ConfigError("train_probe: empty manifest");

    struct Sample {
        Image image;
        Mask mask;
    };
    std::vector<Sample> samples;
    samples.reserve(records.size());
    const auto base = manifest_path.parent_path();
    for (const DatasetRecord& rec : records) {
        Sample s;
        s.image = read_png(base / rec.image_path);
        s.mask = Mask::Zero(rec.height, rec.width);
        for (const GeneratedInstance& inst : rec.instances) {
            const Mask m = rasterize_polygon(inst.polygon, rec.height, rec.width);
            for (int y = 0; y < rec.height; ++y) {
                for (int x = 0; x < rec.width; ++x) {
                    if (m(y, x)) s.mask(y, x) = 1;
                }
            }
        }
        samples.push_back(std::move(s));
    }

    nn::AdamW opt;
    opt.lr = config.learning_rate;
    nn::ParamRefs params = probe.params();
    Rng rng(derive_seed(config.seed, {0x70726f62}));

    ProbeTrainResult result;
    result.loss_history.reserve(static_cast<size_t>(config.steps));
    for (int step = 0; step < config.steps; ++step) {
        opt.zero_grad(params);
        double loss = 0.0;
        const int batch = std::min<int>(config.batch_size, static_cast<int>(samples.size()));
        for (int b = 0; b < batch; ++b) {
            const Sample& s = samples[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int>(samples.size()) - 1))];
            loss += probe.train_step_loss_and_backward(s.image, s.mask, 1.0 / batch);
        }
        if (!std::isfinite(loss)) {
            throw DivergenceError("train_probe: non-finite loss at step " + std::to_string(step));
        }
        result.loss_history.push_back(loss);
        opt.step(params);
    }
    return result;
}

DetectionScore evaluate_probe(DetectorProbe& probe, const std::filesystem::path& manifest_path,
                              double iou_threshold, int threads) {
    const std::vector<DatasetRecord> records = read_manifest(manifest_path);
    const auto base = manifest_path.parent_path();
    std::vector<std::vector<Polygon>> preds(records.size()), gts(records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        for (const GeneratedInstance& inst : records[i].instances) {
            gts[i].push_back(inst.polygon);
        }
    }
    if (threads <= 1 || records.size() <= 1) {
        for (size_t i = 0; i < records.size(); ++i) {
            preds[i] = probe.predict(read_png(base / records[i].image_path));
        }
    } else {
        const size_t workers = std::min<size_t>(static_cast<size_t>(threads), records.size());
        std::vector<std::thread> pool;
        std::atomic<size_t> cursor{0};
        for (size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                DetectorProbe local = probe;  // forward caches are per instance
                for (size_t i = cursor.fetch_add(1); i < records.size();
                     i = cursor.fetch_add(1)) {
                    preds[i] = local.predict(read_png(base / records[i].image_path));
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return match_and_score(preds, gts, iou_threshold);
}

}  // namespace difftext
