// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "difftext/nn.hpp"

namespace difftext {

// Versioned binary container: a JSON header (kind, metadata, tensor index)
// followed by one raw little-endian f64 blob. Round-trips bit-exactly.
class Checkpoint {
public:
    static constexpr uint32_t kVersion = 1;

    std::string kind;
    nlohmann::json meta = nlohmann::json::object();

    void add_tensor(const std::string& name, const Eigen::MatrixXd& value);
    const Eigen::MatrixXd& tensor(const std::string& name) const;
    bool has_tensor(const std::string& name) const;

    void add_params(const nn::ParamRefs& params);
    void load_params(const nn::ParamRefs& params) const;  // by name, shape-checked

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

private:
    struct Entry {
        std::string name;
        Eigen::MatrixXd value;
    };
    std::vector<Entry> m_tensors;
};

// FNV-1a over the file bytes, hex-encoded; used for provenance records.
std::string file_hash_hex(const std::filesystem::path& path);

}  // namespace difftext
