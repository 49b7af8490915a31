// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/bundle.hpp"

#include "difftext/errors.hpp"

namespace difftext {

TrainConfig TrainConfig::desk_profile() {
    return TrainConfig{};
}

TrainConfig TrainConfig::paper_profile() {
    TrainConfig c;
    c.learning_rate = 1e-5;
    c.beta1 = 0.9;
    c.beta2 = 0.999;
    c.weight_decay = 1e-2;
    c.batch_size = 24;
    c.epochs = 20;
    c.steps = 0;
    c.image_size = 512;
    return c;
}

nlohmann::json TrainConfig::to_json() const {
    return {{"learning_rate", learning_rate},
            {"beta1", beta1},
            {"beta2", beta2},
            {"weight_decay", weight_decay},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"steps", steps},
            {"image_size", image_size},
            {"seed", seed},
            {"freeze_autoencoder", freeze_autoencoder},
            {"freeze_condition_encoder", freeze_condition_encoder}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.steps = j.value("steps", c.steps);
    c.image_size = j.value("image_size", c.image_size);
    c.seed = j.value("seed", c.seed);
    c.freeze_autoencoder = j.value("freeze_autoencoder", c.freeze_autoencoder);
    c.freeze_condition_encoder = j.value("freeze_condition_encoder", c.freeze_condition_encoder);
    return c;
}

ModelBundle ModelBundle::create(const AutoencoderConfig& ae, const ConditionEncoderConfig& cond,
                                const DenoiserConfig& den, const ScheduleParams& sched,
                                const Charset& charset, uint64_t seed) {
    if (den.latent_channels != ae.latent_channels) {
        throw ConfigError("bundle: denoiser latent channels must match the autoencoder");
    }
    if (den.cond_dim != cond.dim) {
        throw ConfigError("bundle: denoiser condition width must match the condition encoder");
    }
    ModelBundle b;
    b.ae_config = ae;
    b.cond_config = cond;
    b.den_config = den;
    b.schedule_params = sched;
    b.charset = charset;
    Rng ae_rng(derive_seed(seed, {1}));
    Rng cond_rng(derive_seed(seed, {2}));
    Rng den_rng(derive_seed(seed, {3}));
    b.autoencoder = ConvAutoencoder(ae, ae_rng);
    b.condition = ConditionEncoder(cond, charset, cond_rng);
    b.denoiser = ConditionalDenoiser(den, den_rng);
    b.schedule = build_schedule(sched.total_steps, sched.beta_start, sched.beta_end);
    return b;
}

void ModelBundle::save(const std::filesystem::path& path, const TrainConfig& train_config,
                       const std::vector<double>& loss_history) const {
    Checkpoint ck;
    ck.kind = "difftext-bundle";
    ck.meta["autoencoder"] = {{"in_channels", ae_config.in_channels},
                              {"latent_channels", ae_config.latent_channels},
                              {"factor", ae_config.factor},
                              {"base_width", ae_config.base_width},
                              {"latent_scale", ae_config.latent_scale}};
    ck.meta["condition"] = {{"seq_len", cond_config.seq_len},
                            {"dim", cond_config.dim},
                            {"layers", cond_config.layers},
                            {"mlp_mult", cond_config.mlp_mult}};
    ck.meta["denoiser"] = {{"latent_channels", den_config.latent_channels},
                           {"cond_dim", den_config.cond_dim},
                           {"base_width", den_config.base_width},
                           {"temb_dim", den_config.temb_dim}};
    ck.meta["schedule"] = {{"total_steps", schedule_params.total_steps},
                           {"beta_start", schedule_params.beta_start},
                           {"beta_end", schedule_params.beta_end}};
    ck.meta["charset"] = charset.chars;
    ck.meta["charset_hash"] = charset.hash();
    ck.meta["train_config"] = train_config.to_json();
    ck.meta["freeze_policy"] = {
        {"autoencoder", train_config.freeze_autoencoder},
        {"condition_encoder", train_config.freeze_condition_encoder},
        // The reference pipeline freezes a pretrained text encoder; co-training
        // the stand-in is a recorded desk-scale deviation.
        {"condition_encoder_cotrained_deviation", !train_config.freeze_condition_encoder}};
    ck.meta["loss_history"] = loss_history;

    ModelBundle& self = const_cast<ModelBundle&>(*this);
    ck.add_params(self.autoencoder.params());
    ck.add_params(self.condition.params());
    ck.add_params(self.denoiser.params());
    ck.save(path);
}

ModelBundle ModelBundle::load_file(const std::filesystem::path& path) {
    const Checkpoint ck = Checkpoint::load(path);
    if (ck.kind != "difftext-bundle") {
        throw CompatibilityError("expected a difftext-bundle checkpoint, got '" + ck.kind + "'");
    }
    AutoencoderConfig ae;
    const auto& ja = ck.meta.at("autoencoder");
    ae.in_channels = ja.at("in_channels").get<int>();
    ae.latent_channels = ja.at("latent_channels").get<int>();
    ae.factor = ja.at("factor").get<int>();
    ae.base_width = ja.at("base_width").get<int>();
    ae.latent_scale = ja.at("latent_scale").get<double>();

    ConditionEncoderConfig cond;
    const auto& jc = ck.meta.at("condition");
    cond.seq_len = jc.at("seq_len").get<int>();
    cond.dim = jc.at("dim").get<int>();
    cond.layers = jc.at("layers").get<int>();
    cond.mlp_mult = jc.at("mlp_mult").get<int>();

    DenoiserConfig den;
    const auto& jd = ck.meta.at("denoiser");
    den.latent_channels = jd.at("latent_channels").get<int>();
    den.cond_dim = jd.at("cond_dim").get<int>();
    den.base_width = jd.at("base_width").get<int>();
    den.temb_dim = jd.at("temb_dim").get<int>();

    ScheduleParams sched;
    const auto& js = ck.meta.at("schedule");
    sched.total_steps = js.at("total_steps").get<int>();
    sched.beta_start = js.at("beta_start").get<double>();
    sched.beta_end = js.at("beta_end").get<double>();

    Charset charset;
    charset.chars = ck.meta.at("charset").get<std::string>();
    if (ck.meta.contains("charset_hash") &&
        ck.meta.at("charset_hash").get<uint64_t>() != charset.hash()) {
        throw CompatibilityError("checkpoint charset hash mismatch");
    }

    ModelBundle b = create(ae, cond, den, sched, charset, 0);
    ck.load_params(b.autoencoder.params());
    ck.load_params(b.condition.params());
    ck.load_params(b.denoiser.params());
    return b;
}

void save_autoencoder_checkpoint(const ConvAutoencoder& model, const std::filesystem::path& path,
                                 const std::vector<double>& loss_history) {
    Checkpoint ck;
    ck.kind = "difftext-autoencoder";
    const AutoencoderConfig& cfg = model.config();
    ck.meta["in_channels"] = cfg.in_channels;
    ck.meta["latent_channels"] = cfg.latent_channels;
    ck.meta["factor"] = cfg.factor;
    ck.meta["base_width"] = cfg.base_width;
    ck.meta["latent_scale"] = cfg.latent_scale;
    ck.meta["loss_history"] = loss_history;
    ck.add_params(const_cast<ConvAutoencoder&>(model).params());
    ck.save(path);
}

ConvAutoencoder load_autoencoder_checkpoint(const std::filesystem::path& path) {
    const Checkpoint ck = Checkpoint::load(path);
    if (ck.kind != "difftext-autoencoder") {
        throw CompatibilityError("expected a difftext-autoencoder checkpoint, got '" + ck.kind +
                                 "'");
    }
    AutoencoderConfig cfg;
    cfg.in_channels = ck.meta.at("in_channels").get<int>();
    cfg.latent_channels = ck.meta.at("latent_channels").get<int>();
    cfg.factor = ck.meta.at("factor").get<int>();
    cfg.base_width = ck.meta.at("base_width").get<int>();
    cfg.latent_scale = ck.meta.at("latent_scale").get<double>();
    Rng rng(0);
    ConvAutoencoder model(cfg, rng);
    ck.load_params(model.params());
    return model;
}

}  // namespace difftext
