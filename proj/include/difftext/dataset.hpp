// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "difftext/recognizer.hpp"
#include "difftext/tensor.hpp"

namespace difftext {

struct Provenance {
    std::string checkpoint_hash;
    std::string recognizer_hash;
    std::string config_hash;
    uint64_t seed = 0;
};

// One emitted image and its surviving instances; a line of the manifest.
struct DatasetRecord {
    static constexpr int kSchemaVersion = 1;

    std::string image_path;  // relative to the manifest directory
    int width = 0;
    int height = 0;
    std::vector<GeneratedInstance> instances;
    Provenance provenance;

    nlohmann::json to_json() const;
    static DatasetRecord from_json(const nlohmann::json& j);
};

// Serializes emission: images under <out_dir>/images, one JSONL line per
// record in <out_dir>/manifest.jsonl. Lossless image output.
class ManifestWriter {
public:
    explicit ManifestWriter(const std::filesystem::path& out_dir);

    DatasetRecord emit_record(const Image& image, const std::vector<GeneratedInstance>& instances,
                              const Provenance& provenance);

    const std::filesystem::path& manifest_path() const { return m_manifest_path; }

private:
    std::filesystem::path m_out_dir;
    std::filesystem::path m_manifest_path;
    int m_index = 0;
};

// Parses and validates; malformed lines report their line number, records
// violating the invariants (out-of-bounds polygons, bad dims) are rejected.
std::vector<DatasetRecord> read_manifest(const std::filesystem::path& manifest_path,
                                         bool check_images = false);

struct DatasetStats {
    long long images = 0;
    long long instances = 0;
    double instances_per_image = 0.0;
};

DatasetStats compute_stats(const std::filesystem::path& manifest_path);

// Stats plus the published reference corpus ratio for context (documentation,
// not a reproduced result).
nlohmann::json stats_report(const DatasetStats& stats);

// One text file per image: "x1,y1,...,x4,y4,transcription" per instance.
// Non-quad polygons are converted to their minimum-area quad and noted in
// <out_dir>/warnings.log.
void export_icdar(const std::filesystem::path& manifest_path,
                  const std::filesystem::path& out_dir);

}  // namespace difftext
