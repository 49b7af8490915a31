// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/config.hpp"

#include <fstream>

#include "difftext/errors.hpp"

namespace difftext {

namespace {

// Every key in `doc` must exist in `schema` (recursively for objects).
void check_unknown_keys(const nlohmann::json& doc, const nlohmann::json& schema,
                        const std::string& prefix) {
    if (!doc.is_object()) return;
    for (const auto& [key, value] : doc.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!schema.is_object() || !schema.contains(key)) {
            throw ConfigError("unknown config key: " + path);
        }
        if (value.is_object()) check_unknown_keys(value, schema.at(key), path);
    }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config key '" + std::string(key) + "': " + e.what());
        }
    }
}

}  // namespace

nlohmann::json PipelineConfig::to_json() const {
    return {
        {"seed", seed},
        {"deterministic", deterministic},
        {"threads", threads},
        {"charset", charset},
        {"keep_unlabeled_pixels", keep_unlabeled_pixels},
        {"emit_discarded", emit_discarded},
        {"autoencoder",
         {{"in_channels", autoencoder.in_channels},
          {"latent_channels", autoencoder.latent_channels},
          {"factor", autoencoder.factor},
          {"base_width", autoencoder.base_width},
          {"latent_scale", autoencoder.latent_scale}}},
        {"autoencoder_training",
         {{"steps", autoencoder_training.steps},
          {"batch_size", autoencoder_training.batch_size},
          {"learning_rate", autoencoder_training.learning_rate}}},
        {"condition",
         {{"seq_len", condition.seq_len},
          {"dim", condition.dim},
          {"layers", condition.layers},
          {"mlp_mult", condition.mlp_mult}}},
        {"denoiser",
         {{"base_width", denoiser.base_width}, {"temb_dim", denoiser.temb_dim}}},
        {"schedule",
         {{"total_steps", schedule.total_steps},
          {"beta_start", schedule.beta_start},
          {"beta_end", schedule.beta_end}}},
        {"training", training.to_json()},
        {"placement",
         {{"min_area_frac", placement.min_area_frac},
          {"max_residual", placement.max_residual},
          {"max_regions", placement.max_regions},
          {"min_height", placement.min_height}}},
        {"crops",
         {{"max_jobs", crops.max_jobs},
          {"margin_frac", crops.margin_frac},
          {"snap", crops.snap}}},
        {"sampler", {{"steps", sampler.steps}}},
        {"recognizer",
         {{"input_size", recognizer.input_size},
          {"positions", recognizer.positions},
          {"base_width", recognizer.base_width}}},
        {"gate", {{"threshold", gate.threshold}, {"require_match", gate.require_match}}},
        {"recognizer_training",
         {{"steps", recognizer_training.steps},
          {"learning_rate", recognizer_training.learning_rate},
          {"per_word", recognizer_training.per_word}}},
        {"probe",
         {{"base_width", probe.base_width},
          {"threshold", probe.threshold},
          {"min_component_area", probe.min_component_area},
          {"pos_weight", probe.pos_weight}}},
        {"probe_training",
         {{"steps", probe_training.steps},
          {"batch_size", probe_training.batch_size},
          {"learning_rate", probe_training.learning_rate}}},
    };
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
    PipelineConfig cfg;
    check_unknown_keys(j, cfg.to_json(), "");

    read(j, "seed", cfg.seed);
    read(j, "deterministic", cfg.deterministic);
    read(j, "threads", cfg.threads);
    read(j, "charset", cfg.charset);
    read(j, "keep_unlabeled_pixels", cfg.keep_unlabeled_pixels);
    read(j, "emit_discarded", cfg.emit_discarded);

    if (j.contains("autoencoder")) {
        const auto& a = j.at("autoencoder");
        read(a, "in_channels", cfg.autoencoder.in_channels);
        read(a, "latent_channels", cfg.autoencoder.latent_channels);
        read(a, "factor", cfg.autoencoder.factor);
        read(a, "base_width", cfg.autoencoder.base_width);
        read(a, "latent_scale", cfg.autoencoder.latent_scale);
    }
    if (j.contains("autoencoder_training")) {
        const auto& a = j.at("autoencoder_training");
        read(a, "steps", cfg.autoencoder_training.steps);
        read(a, "batch_size", cfg.autoencoder_training.batch_size);
        read(a, "learning_rate", cfg.autoencoder_training.learning_rate);
    }
    if (j.contains("condition")) {
        const auto& c = j.at("condition");
        read(c, "seq_len", cfg.condition.seq_len);
        read(c, "dim", cfg.condition.dim);
        read(c, "layers", cfg.condition.layers);
        read(c, "mlp_mult", cfg.condition.mlp_mult);
    }
    if (j.contains("denoiser")) {
        const auto& d = j.at("denoiser");
        read(d, "base_width", cfg.denoiser.base_width);
        read(d, "temb_dim", cfg.denoiser.temb_dim);
    }
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        read(s, "total_steps", cfg.schedule.total_steps);
        read(s, "beta_start", cfg.schedule.beta_start);
        read(s, "beta_end", cfg.schedule.beta_end);
    }
    if (j.contains("training")) cfg.training = TrainConfig::from_json(j.at("training"));
    if (j.contains("placement")) {
        const auto& p = j.at("placement");
        read(p, "min_area_frac", cfg.placement.min_area_frac);
        read(p, "max_residual", cfg.placement.max_residual);
        read(p, "max_regions", cfg.placement.max_regions);
        read(p, "min_height", cfg.placement.min_height);
    }
    if (j.contains("crops")) {
        const auto& c = j.at("crops");
        read(c, "max_jobs", cfg.crops.max_jobs);
        read(c, "margin_frac", cfg.crops.margin_frac);
        read(c, "snap", cfg.crops.snap);
    }
    if (j.contains("sampler")) read(j.at("sampler"), "steps", cfg.sampler.steps);
    if (j.contains("recognizer")) {
        const auto& r = j.at("recognizer");
        read(r, "input_size", cfg.recognizer.input_size);
        read(r, "positions", cfg.recognizer.positions);
        read(r, "base_width", cfg.recognizer.base_width);
    }
    if (j.contains("gate")) {
        const auto& g = j.at("gate");
        read(g, "threshold", cfg.gate.threshold);
        read(g, "require_match", cfg.gate.require_match);
    }
    if (j.contains("recognizer_training")) {
        const auto& r = j.at("recognizer_training");
        read(r, "steps", cfg.recognizer_training.steps);
        read(r, "learning_rate", cfg.recognizer_training.learning_rate);
        read(r, "per_word", cfg.recognizer_training.per_word);
    }
    if (j.contains("probe")) {
        const auto& p = j.at("probe");
        read(p, "base_width", cfg.probe.base_width);
        read(p, "threshold", cfg.probe.threshold);
        read(p, "min_component_area", cfg.probe.min_component_area);
        read(p, "pos_weight", cfg.probe.pos_weight);
    }
    if (j.contains("probe_training")) {
        const auto& p = j.at("probe_training");
        read(p, "steps", cfg.probe_training.steps);
        read(p, "batch_size", cfg.probe_training.batch_size);
        read(p, "learning_rate", cfg.probe_training.learning_rate);
    }

    // Cross-module dims are derived, not configured separately.
    cfg.denoiser.latent_channels = cfg.autoencoder.latent_channels;
    cfg.denoiser.cond_dim = cfg.condition.dim;

    if (cfg.gate.threshold < 0.0 || cfg.gate.threshold > 1.0) {
        throw ConfigError("gate.threshold must lie in [0, 1]");
    }
    if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
    if (cfg.crops.snap % cfg.autoencoder.factor != 0) {
        throw ConfigError("crops.snap must be a multiple of autoencoder.factor");
    }
    return cfg;
}

PipelineConfig PipelineConfig::load_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error: " + std::string(e.what()));
    }
    return from_json(j);
}

PipelineConfig PipelineConfig::with_overrides(nlohmann::json base,
                                              const std::vector<std::string>& overrides) {
    for (const std::string& item : overrides) {
        const size_t eq = item.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("override must look like path.key=value: " + item);
        }
        const std::string path = item.substr(0, eq);
        const std::string value_text = item.substr(eq + 1);
        nlohmann::json value;
        try {
            value = nlohmann::json::parse(value_text);
        } catch (const nlohmann::json::exception&) {
            value = value_text;  // bare strings allowed
        }
        nlohmann::json* node = &base;
        size_t start = 0;
        while (true) {
            const size_t dot = path.find('.', start);
            const std::string key = path.substr(start, dot - start);
            if (key.empty()) throw ConfigError("bad override path: " + path);
            if (dot == std::string::npos) {
                (*node)[key] = value;
                break;
            }
            node = &(*node)[key];
            start = dot + 1;
        }
    }
    return from_json(base);
}

Charset PipelineConfig::charset_object() const {
    Charset cs;
    cs.chars = charset;
    return cs;
}

std::string PipelineConfig::hash_hex() const {
    const std::string dump = to_json().dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : dump) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

}  // namespace difftext
