// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/condition.hpp"

#include <cctype>

#include "difftext/errors.hpp"

namespace difftext {

int Charset::id_of(char c) const {
    const char folded = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const size_t pos = chars.find(folded);
    return pos == std::string::npos ? unk_id : static_cast<int>(pos) + 2;
}

char Charset::char_of(int id) const {
    if (id == pad_id) return '\0';
    if (id == unk_id) return '?';
    const size_t idx = static_cast<size_t>(id) - 2;
    if (idx >= chars.size()) throw VocabularyError("charset id " + std::to_string(id) + " out of range");
    return chars[idx];
}

bool Charset::contains_word(const std::string& word) const {
    if (word.empty()) return false;
    for (char c : word) {
        if (id_of(c) == unk_id) return false;
    }
    return true;
}

uint64_t Charset::hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : chars) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<int> tokenize(const std::string& text, const Charset& charset, int seq_len) {
    std::vector<int> out(static_cast<size_t>(seq_len), Charset::pad_id);
    const size_t n = std::min(text.size(), static_cast<size_t>(seq_len));
    for (size_t i = 0; i < n; ++i) out[i] = charset.id_of(text[i]);
    return out;
}

ConditionEncoder::ConditionEncoder(const ConditionEncoderConfig& config, const Charset& charset,
                                   Rng& rng)
    : m_config(config), m_charset(charset) {
    m_embedding.init("cond.embedding", charset.size(), config.dim, rng);
    m_positional.init_normal("cond.positional", config.dim, config.seq_len, 0.02, rng);
    m_blocks.resize(static_cast<size_t>(config.layers));
    for (int i = 0; i < config.layers; ++i) {
        const std::string prefix = "cond.block" + std::to_string(i);
        Block& b = m_blocks[static_cast<size_t>(i)];
        b.attn.init(prefix + ".attn", config.dim, config.dim, config.dim, rng);
        b.mlp_norm.init(prefix + ".mlp_norm", config.dim);
        b.fc1.init(prefix + ".fc1", config.dim, config.dim * config.mlp_mult, rng);
        b.fc2.init(prefix + ".fc2", config.dim * config.mlp_mult, config.dim, rng);
    }
    m_final_norm.init("cond.final_norm", config.dim);
}

Eigen::MatrixXd ConditionEncoder::forward(const std::vector<int>& tokens) {
    if (static_cast<int>(tokens.size()) != m_config.seq_len) {
        throw ShapeError("condition encoder: expected " + std::to_string(m_config.seq_len) +
                         " tokens, got " + std::to_string(tokens.size()));
    }
    Eigen::MatrixXd x = m_embedding.forward(tokens) + m_positional.value;
    for (Block& b : m_blocks) {
        x = b.attn.forward(x, x);
        x = x + b.fc2.forward(b.act.forward(b.fc1.forward(b.mlp_norm.forward(x))));
    }
    return m_final_norm.forward(x);
}

void ConditionEncoder::backward(const Eigen::MatrixXd& g) {
    Eigen::MatrixXd gx = m_final_norm.backward(g);
    for (auto it = m_blocks.rbegin(); it != m_blocks.rend(); ++it) {
        Block& b = *it;
        const Eigen::MatrixXd gmlp = b.mlp_norm.backward(
            b.fc1.backward(b.act.backward(b.fc2.backward(gx))));
        gx += gmlp;
        Eigen::MatrixXd gctx;
        gx = b.attn.backward(gx, gctx);
        gx += gctx;  // self-attention: context is the same tensor
    }
    m_positional.grad += gx;
    m_embedding.backward(gx);
}

TextCondition ConditionEncoder::encode(const std::string& text) {
    TextCondition cond;
    cond.raw = text;
    cond.tokens = tokenize(text, m_charset, m_config.seq_len);
    cond.embedding = forward(cond.tokens).transpose();
    return cond;
}

nn::ParamRefs ConditionEncoder::params() {
    nn::ParamRefs out;
    m_embedding.collect(out);
    out.push_back(&m_positional);
    for (Block& b : m_blocks) {
        b.attn.collect(out);
        b.mlp_norm.collect(out);
        b.fc1.collect(out);
        b.fc2.collect(out);
    }
    m_final_norm.collect(out);
    return out;
}

}  // namespace difftext
