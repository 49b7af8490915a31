// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "difftext/config.hpp"
#include "difftext/errors.hpp"
#include "difftext/pipeline.hpp"
#include "difftext/placement.hpp"
#include "difftext/png_io.hpp"
#include "difftext/probe.hpp"
#include "difftext/recognizer.hpp"
#include "difftext/sampler.hpp"
#include "difftext/toydata.hpp"
#include "difftext/training.hpp"
#include "difftext/verify.hpp"

namespace fs = std::filesystem;
using namespace difftext;

namespace {

struct GlobalOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    int64_t seed = -1;
    int threads = 0;
    bool deterministic = false;
    bool stochastic = false;
};

PipelineConfig resolve_config(const GlobalOptions& g) {
    nlohmann::json base = nlohmann::json::object();
    if (!g.config_path.empty()) {
        std::ifstream f(g.config_path);
        if (!f) throw ConfigError("cannot open config file: " + g.config_path);
        try {
            f >> base;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config parse error: " + std::string(e.what()));
        }
    }
    PipelineConfig cfg = PipelineConfig::with_overrides(base, g.overrides);
    if (g.seed >= 0) cfg.seed = static_cast<uint64_t>(g.seed);
    if (g.threads > 0) cfg.threads = g.threads;
    if (g.deterministic) cfg.deterministic = true;
    if (g.stochastic) cfg.deterministic = false;
    return cfg;
}

void add_global_options(CLI::App* cmd, GlobalOptions& g) {
    cmd->add_option("--config", g.config_path, "JSON config file (keys namespaced per module)");
    cmd->add_option("--set", g.overrides, "Override config values, e.g. --set sampler.steps=25");
    cmd->add_option("--seed", g.seed, "Global seed");
    cmd->add_option("--threads", g.threads, "Worker threads for crop jobs / evaluation");
    cmd->add_flag("--deterministic", g.deterministic, "Deterministic sampling (default)");
    cmd->add_flag("--stochastic", g.stochastic, "Ancestral sampling with fresh noise");
}

std::vector<std::string> read_words(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open word list: " + path.string());
    std::vector<std::string> words;
    std::string line;
    while (std::getline(f, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) words.push_back(line);
    }
    return words;
}

std::vector<Image> corpus_windows(const fs::path& images, const fs::path& annotations, int size) {
    std::vector<Image> out;
    for (const TrainInstance& inst : load_annotations(annotations)) {
        const Image img = read_png(images / inst.image);
        out.push_back(build_instance_pair(img, inst.polygon, inst.text, size).original);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"difftext: diffusion-based scene text synthesis, desk scale"};
    app.require_subcommand(1);

    GlobalOptions g;

    // make-toy-data
    auto* toy = app.add_subcommand("make-toy-data", "Write a self-contained toy dataset");
    std::string toy_out;
    int toy_train = 8, toy_backgrounds = 16, toy_heldout = 16, toy_image = 64, toy_bg = 96;
    toy->add_option("--out-dir", toy_out)->required();
    toy->add_option("--train-images", toy_train);
    toy->add_option("--backgrounds", toy_backgrounds);
    toy->add_option("--heldout", toy_heldout);
    toy->add_option("--image-size", toy_image);
    toy->add_option("--bg-size", toy_bg);
    add_global_options(toy, g);

    // train-autoencoder
    auto* tae = app.add_subcommand("train-autoencoder", "Train the image autoencoder");
    std::string tae_images, tae_ann, tae_out;
    tae->add_option("--images", tae_images)->required();
    tae->add_option("--annotations", tae_ann)->required();
    tae->add_option("--out", tae_out)->required();
    add_global_options(tae, g);

    // train-recognizer
    auto* trec = app.add_subcommand("train-recognizer", "Train the toy word recognizer");
    std::string trec_words, trec_out;
    trec->add_option("--words", trec_words)->required();
    trec->add_option("--out", trec_out)->required();
    add_global_options(trec, g);

    // train-denoiser
    auto* tden = app.add_subcommand("train-denoiser", "Train the conditional denoiser");
    std::string tden_images, tden_ann, tden_ae, tden_out;
    bool tden_no_normalize = false;
    tden->add_option("--images", tden_images)->required();
    tden->add_option("--annotations", tden_ann)->required();
    tden->add_option("--autoencoder", tden_ae)->required();
    tden->add_option("--out", tden_out)->required();
    tden->add_flag("--no-normalize-latents", tden_no_normalize,
                   "Skip rescaling latents to unit standard deviation before training");
    add_global_options(tden, g);

    // propose-regions
    auto* prop = app.add_subcommand("propose-regions", "Propose placement regions from maps");
    std::string prop_bg, prop_maps, prop_out;
    prop->add_option("--backgrounds", prop_bg)->required();
    prop->add_option("--maps-dir", prop_maps)->required();
    prop->add_option("--out", prop_out)->required();
    add_global_options(prop, g);

    // generate
    auto* gen = app.add_subcommand("generate", "Run the full generation pipeline");
    std::string gen_bg, gen_maps, gen_words, gen_ckpt, gen_rec, gen_out;
    gen->add_option("--backgrounds", gen_bg)->required();
    gen->add_option("--maps-dir", gen_maps)->required();
    gen->add_option("--words", gen_words)->required();
    gen->add_option("--checkpoint", gen_ckpt)->required();
    gen->add_option("--recognizer", gen_rec)->required();
    gen->add_option("--out-dir", gen_out)->required();
    bool gen_keep_unlabeled = false;
    gen->add_flag("--keep-unlabeled-pixels", gen_keep_unlabeled,
                  "Leave discarded renders in place instead of reverting them");
    add_global_options(gen, g);

    // stats
    auto* st = app.add_subcommand("stats", "Corpus statistics from a manifest");
    std::string st_manifest;
    st->add_option("--manifest", st_manifest)->required();
    add_global_options(st, g);

    // export-icdar
    auto* exp = app.add_subcommand("export-icdar", "Per-image ICDAR-style ground-truth files");
    std::string exp_manifest, exp_out;
    exp->add_option("--manifest", exp_manifest)->required();
    exp->add_option("--out-dir", exp_out)->required();
    add_global_options(exp, g);

    // probe-train
    auto* pt = app.add_subcommand("probe-train", "Train the detector probe on a manifest");
    std::string pt_manifest, pt_out;
    pt->add_option("--manifest", pt_manifest)->required();
    pt->add_option("--out", pt_out)->required();
    add_global_options(pt, g);

    // probe-eval
    auto* pe = app.add_subcommand("probe-eval", "Score the probe against a manifest");
    std::string pe_probe, pe_manifest;
    double pe_iou = 0.5;
    pe->add_option("--probe", pe_probe)->required();
    pe->add_option("--manifest", pe_manifest)->required();
    pe->add_option("--iou", pe_iou);
    add_global_options(pe, g);

    // verify
    auto* ver = app.add_subcommand("verify", "Run the oracle suite of core invariants");
    add_global_options(ver, g);

    CLI11_PARSE(app, argc, argv);

    try {
        const PipelineConfig cfg = resolve_config(g);

        if (*toy) {
            std::error_code ec;
            fs::create_directories(toy_out, ec);
            if (ec) throw IoError("cannot create output directory: " + toy_out);
            const auto words = toydata::default_words();
            toydata::write_word_list(fs::path(toy_out) / "words.txt", words);
            toydata::write_training_corpus(fs::path(toy_out) / "train", words, toy_train,
                                           toy_image, cfg.seed);
            toydata::write_backgrounds_with_maps(fs::path(toy_out) / "backgrounds",
                                                 toy_backgrounds, toy_bg, toy_bg, cfg.seed + 1);
            const auto heldout = toydata::detection_set(words, toy_heldout, toy_bg, cfg.seed + 2);
            toydata::write_labeled_manifest(fs::path(toy_out) / "heldout", heldout);
            std::cerr << "toy data written to " << toy_out << "\n";
        } else if (*tae) {
            Rng rng(derive_seed(cfg.seed, {1}));
            ConvAutoencoder model(cfg.autoencoder, rng);
            AutoencoderTrainConfig tc = cfg.autoencoder_training;
            tc.seed = cfg.seed;
            const auto corpus = corpus_windows(tae_images, tae_ann, cfg.training.image_size);
            const auto history = train_autoencoder(model, corpus, tc);
            save_autoencoder_checkpoint(model, tae_out, history);
            std::cerr << "autoencoder: " << history.size() << " steps, final loss "
                      << (history.empty() ? 0.0 : history.back()) << "\n";
        } else if (*trec) {
            Rng rng(derive_seed(cfg.seed, {4}));
            ToyRecognizer model(cfg.recognizer, cfg.charset_object(), rng);
            const auto corpus =
                toydata::recognizer_corpus(read_words(trec_words), cfg.recognizer_training.per_word,
                                           cfg.recognizer.input_size, cfg.seed);
            const auto history = train_toy_recognizer(model, corpus, cfg.recognizer_training.steps,
                                                      cfg.recognizer_training.learning_rate,
                                                      cfg.seed);
            model.save(trec_out);
            std::cerr << "recognizer: held-in accuracy " << recognizer_accuracy(model, corpus)
                      << "\n";
        } else if (*tden) {
            ModelBundle bundle = ModelBundle::create(cfg.autoencoder, cfg.condition, cfg.denoiser,
                                                     cfg.schedule, cfg.charset_object(), cfg.seed);
            bundle.autoencoder = load_autoencoder_checkpoint(tden_ae);
            bundle.ae_config = bundle.autoencoder.config();
            if (!tden_no_normalize) {
                // Rescale so the diffusion process sees unit-variance latents.
                double sum = 0.0, sq = 0.0;
                long long count = 0;
                for (const TrainInstance& inst : load_annotations(tden_ann)) {
                    const Image img = read_png(fs::path(tden_images) / inst.image);
                    const Latent z = bundle.autoencoder.encode(
                        build_instance_pair(img, inst.polygon, inst.text, cfg.training.image_size)
                            .original);
                    sum += z.data.sum();
                    sq += z.data.squaredNorm();
                    count += z.data.size();
                }
                const double mean = sum / count;
                const double stdev = std::sqrt(std::max(1e-12, sq / count - mean * mean));
                const double scale = bundle.autoencoder.config().latent_scale / stdev;
                bundle.autoencoder.set_latent_scale(scale);
                bundle.ae_config.latent_scale = scale;
                std::cerr << "latent scale set to " << scale << "\n";
            }
            TrainConfig tc = cfg.training;
            tc.seed = cfg.seed;
            const TrainingRun run =
                run_training_from_files(bundle, tden_images, tden_ann, tc, tden_out);
            std::cerr << "denoiser: " << run.loss_history.size() << " steps, final loss "
                      << (run.loss_history.empty() ? 0.0 : run.loss_history.back()) << "\n";
        } else if (*prop) {
            std::ofstream out(prop_out, std::ios::trunc);
            if (!out) throw IoError("cannot write " + prop_out);
            for (const auto& entry : fs::directory_iterator(prop_bg)) {
                const auto& p = entry.path();
                if (p.extension() != ".png") continue;
                const std::string stem = p.stem().string();
                if (stem.ends_with(".seg") || stem.ends_with(".depth")) continue;
                const Eigen::MatrixXi seg = read_png_labels(fs::path(prop_maps) / (stem + ".seg.png"));
                const Eigen::MatrixXd depth =
                    read_png_gray(fs::path(prop_maps) / (stem + ".depth.png")).array().max(1e-4).matrix();
                nlohmann::json regions = nlohmann::json::array();
                for (const auto& region : propose_regions(seg, depth, cfg.placement)) {
                    nlohmann::json poly = nlohmann::json::array();
                    for (const Point& pt : region.polygon) poly.push_back({pt.x, pt.y});
                    regions.push_back({{"polygon", poly},
                                       {"segment_id", region.segment_id},
                                       {"smoothness", region.smoothness},
                                       {"area", region.area}});
                }
                out << nlohmann::json{{"image", stem}, {"regions", regions}}.dump() << "\n";
            }
        } else if (*gen) {
            PipelineConfig gen_cfg = cfg;
            if (gen_keep_unlabeled) gen_cfg.keep_unlabeled_pixels = true;
            const GenerateResult result =
                generate(gen_cfg, gen_bg, gen_maps, gen_words, gen_ckpt, gen_rec, gen_out);
            std::cerr << "generate: " << result.images << " images, " << result.kept_instances
                      << " kept instances, " << result.discarded_instances << " discarded\n";
        } else if (*st) {
            std::cout << stats_report(compute_stats(st_manifest)).dump(2) << "\n";
        } else if (*exp) {
            export_icdar(exp_manifest, exp_out);
            std::cerr << "export written to " << exp_out << "\n";
        } else if (*pt) {
            Rng rng(derive_seed(cfg.seed, {5}));
            DetectorProbe probe(cfg.probe, rng);
            ProbeTrainConfig tc = cfg.probe_training;
            tc.seed = cfg.seed;
            const auto result = train_probe(probe, pt_manifest, tc);
            probe.save(pt_out);
            std::cerr << "probe: " << result.loss_history.size() << " steps, final loss "
                      << (result.loss_history.empty() ? 0.0 : result.loss_history.back()) << "\n";
        } else if (*pe) {
            DetectorProbe probe = DetectorProbe::load_file(pe_probe);
            const DetectionScore s = evaluate_probe(probe, pe_manifest, pe_iou, cfg.threads);
            std::cout << nlohmann::json{{"precision", s.precision},
                                        {"recall", s.recall},
                                        {"hmean", s.hmean},
                                        {"matches", s.matches},
                                        {"predictions", s.predictions},
                                        {"ground_truths", s.ground_truths}}
                             .dump(2)
                      << "\n";
        } else if (*ver) {
            bool all_ok = true;
            for (const VerifyResult& r : run_verification()) {
                std::cout << (r.passed ? "ok   " : "FAIL ") << r.name;
                if (!r.passed) std::cout << "  (" << r.detail << ")";
                std::cout << "\n";
                all_ok = all_ok && r.passed;
            }
            if (!all_ok) return 1;
        }
    } catch (const Error& e) {
        const char* kind = e.kind() == ErrorKind::Config     ? "config"
                           : e.kind() == ErrorKind::Data     ? "data"
                                                             : "divergence";
        std::cerr << nlohmann::json{{"error", {{"kind", kind}, {"message", e.what()}}}}.dump()
                  << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump()
                  << "\n";
        return 1;
    }
    return 0;
}
