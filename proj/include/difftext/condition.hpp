// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "difftext/nn.hpp"
#include "difftext/rng.hpp"

namespace difftext {

// Character vocabulary. Tokenization case-folds; anything outside the charset
// maps to UNK. A hash of the charset guards checkpoint compatibility.
struct Charset {
    static constexpr int pad_id = 0;
    static constexpr int unk_id = 1;

    std::string chars = "abcdefghijklmnopqrstuvwxyz0123456789";

    int size() const { return static_cast<int>(chars.size()) + 2; }
    int id_of(char c) const;
    char char_of(int id) const;  // pad/unk render as '\0' / '?'
    bool contains_word(const std::string& word) const;
    uint64_t hash() const;
};

// Total function: pads/truncates to exactly seq_len ids.
std::vector<int> tokenize(const std::string& text, const Charset& charset, int seq_len);

struct TextCondition {
    std::string raw;
    std::vector<int> tokens;
    Eigen::MatrixXd embedding;  // seq_len x dim
};

struct ConditionEncoderConfig {
    int seq_len = 16;
    int dim = 64;
    int layers = 1;
    int mlp_mult = 2;
};

// Small self-attention stack over character embeddings; stands in for the
// frozen text encoder of the full-scale pipeline and is co-trained with the
// denoiser at desk scale.
class ConditionEncoder {
public:
    ConditionEncoder() = default;
    ConditionEncoder(const ConditionEncoderConfig& config, const Charset& charset, Rng& rng);

    // Internal orientation: dim x seq_len (tokens as columns).
    Eigen::MatrixXd forward(const std::vector<int>& tokens);
    void backward(const Eigen::MatrixXd& g);

    // Inference path: returns the spec-facing seq_len x dim embedding.
    TextCondition encode(const std::string& text);

    nn::ParamRefs params();
    const ConditionEncoderConfig& config() const { return m_config; }
    const Charset& charset() const { return m_charset; }

private:
    struct Block {
        nn::Attention attn;
        nn::LayerNorm mlp_norm;
        nn::Linear fc1, fc2;
        nn::Silu act;
    };

    ConditionEncoderConfig m_config;
    Charset m_charset;
    nn::Embedding m_embedding;
    nn::Param m_positional;  // dim x seq_len
    std::vector<Block> m_blocks;
    nn::LayerNorm m_final_norm;
};

}  // namespace difftext
