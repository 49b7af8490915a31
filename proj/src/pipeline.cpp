// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/pipeline.hpp"

#include <algorithm>
#include <map>

#include "difftext/errors.hpp"
#include "difftext/placement.hpp"
#include "difftext/png_io.hpp"
#include "difftext/sampler.hpp"

namespace difftext {

namespace {

std::vector<std::filesystem::path> list_backgrounds(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("backgrounds directory missing: " + dir.string());
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto& p = entry.path();
        if (p.extension() != ".png") continue;
        const std::string stem = p.stem().string();
        if (stem.ends_with(".seg") || stem.ends_with(".depth")) continue;
        files.push_back(p);
    }
    std::sort(files.begin(), files.end());
    return files;
}

Polygon offset_polygon(const Polygon& local, const Box& box) {
    Polygon out = local;
    for (Point& p : out) {
        p.x += box.x;
        p.y += box.y;
    }
    return out;
}

bool polygons_equal(const Polygon& a, const Polygon& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].x != b[i].x || a[i].y != b[i].y) return false;
    }
    return true;
}

}  // namespace

GenerateResult generate(const PipelineConfig& config,
                        const std::filesystem::path& backgrounds_dir,
                        const std::filesystem::path& maps_dir,
                        const std::filesystem::path& words_file,
                        const std::filesystem::path& bundle_checkpoint,
                        const std::filesystem::path& recognizer_checkpoint,
                        const std::filesystem::path& out_dir) {
    ModelBundle bundle = ModelBundle::load_file(bundle_checkpoint);
    const ToyRecognizer recognizer = ToyRecognizer::load_file(recognizer_checkpoint);
    if (recognizer.charset_hash() != bundle.charset.hash()) {
        throw CompatibilityError("recognizer and generator checkpoints use different charsets");
    }

    WordSource words =
        WordSource::from_file(words_file, bundle.charset, bundle.cond_config.seq_len, config.seed);

    Provenance prov;
    prov.checkpoint_hash = file_hash_hex(bundle_checkpoint);
    prov.recognizer_hash = file_hash_hex(recognizer_checkpoint);
    prov.config_hash = config.hash_hex();
    prov.seed = config.seed;

    SamplerParams sampler = config.sampler;
    sampler.deterministic = config.deterministic;
    sampler.threads = config.threads;

    ManifestWriter writer(out_dir);
    GenerateResult result;
    result.manifest_path = writer.manifest_path();

    const std::vector<std::filesystem::path> files = list_backgrounds(backgrounds_dir);
    for (size_t index = 0; index < files.size(); ++index) {
        const std::filesystem::path& file = files[index];
        const std::string stem = file.stem().string();
        const Image background = read_png(file);

        const auto seg_path = maps_dir / (stem + ".seg.png");
        const auto depth_path = maps_dir / (stem + ".depth.png");
        if (!std::filesystem::exists(seg_path) || !std::filesystem::exists(depth_path)) {
            throw DataError("missing seg/depth maps for background '" + stem + "' in " +
                            maps_dir.string());
        }
        const Eigen::MatrixXi seg = read_png_labels(seg_path);
        const Eigen::MatrixXd depth = read_png_gray(depth_path).array().max(1e-4).matrix();

        const std::vector<PlacementRegion> regions = propose_regions(seg, depth, config.placement);
        std::vector<CropJob> jobs = make_crop_jobs(stem, background.width, background.height,
                                                   regions, words, config.crops, config.seed, index);

        const std::map<std::string, Image> bg_map{{stem, background}};
        const auto generations = batch_inpaint(jobs, bg_map, bundle, sampler);

        // Recognition over the freshly generated crops.
        std::vector<GeneratedInstance> instances;
        std::vector<Image> patches;
        for (const auto& [job, crop] : generations) {
            GeneratedInstance inst;
            inst.image_id = stem;
            inst.polygon = offset_polygon(job.region_local, job.crop_box);
            inst.text = job.text;
            instances.push_back(std::move(inst));
            patches.push_back(extract_patch(crop, job.region_local, recognizer.input_size()));
        }
        auto [kept, discarded] = filter_instances(
            instances,
            [&](const GeneratedInstance&, size_t i) { return recognizer.recognize(patches[i]); },
            config.gate.threshold);

        if (config.gate.require_match) {
            std::vector<GeneratedInstance> agreed;
            for (GeneratedInstance& inst : kept) {
                if (inst.recognized == inst.text) {
                    agreed.push_back(std::move(inst));
                } else {
                    inst.kept = false;
                    discarded.push_back(std::move(inst));
                }
            }
            kept = std::move(agreed);
        }

        // Paste kept generations back; discarded crops revert to the source
        // background unless configured otherwise.
        Image composed = background;
        for (const auto& [job, crop] : generations) {
            // Crop boxes within an image are disjoint, so the global polygon
            // identifies the job uniquely.
            const Polygon global = offset_polygon(job.region_local, job.crop_box);
            const bool is_kept = std::any_of(kept.begin(), kept.end(), [&](const auto& inst) {
                return polygons_equal(inst.polygon, global);
            });
            if (is_kept || config.keep_unlabeled_pixels) {
                composed = paste_back(composed, job, crop);
            }
        }

        std::vector<GeneratedInstance> record_instances = kept;
        if (config.emit_discarded) {
            record_instances.insert(record_instances.end(), discarded.begin(), discarded.end());
        }
        writer.emit_record(composed, record_instances, prov);
        ++result.images;
        result.kept_instances += static_cast<int>(kept.size());
        result.discarded_instances += static_cast<int>(discarded.size());
    }
    return result;
}

}  // namespace difftext
