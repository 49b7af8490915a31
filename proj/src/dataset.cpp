// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/dataset.hpp"

#include <cmath>
#include <fstream>

#include "difftext/errors.hpp"
#include "difftext/png_io.hpp"

namespace difftext {

nlohmann::json DatasetRecord::to_json() const {
    nlohmann::json inst_list = nlohmann::json::array();
    for (const GeneratedInstance& inst : instances) {
        nlohmann::json poly = nlohmann::json::array();
        for (const Point& p : inst.polygon) poly.push_back({p.x, p.y});
        inst_list.push_back({{"polygon", poly},
                             {"text", inst.text},
                             {"recognized", inst.recognized},
                             {"confidence", inst.confidence},
                             {"kept", inst.kept}});
    }
    return {{"schema_version", kSchemaVersion},
            {"image_path", image_path},
            {"width", width},
            {"height", height},
            {"instances", inst_list},
            {"provenance",
             {{"checkpoint_hash", provenance.checkpoint_hash},
              {"recognizer_hash", provenance.recognizer_hash},
              {"config_hash", provenance.config_hash},
              {"seed", provenance.seed}}}};
}

DatasetRecord DatasetRecord::from_json(const nlohmann::json& j) {
    DatasetRecord rec;
    if (j.value("schema_version", 0) != kSchemaVersion) {
        throw ParseError("manifest record: unsupported schema_version");
    }
    rec.image_path = j.at("image_path").get<std::string>();
    rec.width = j.at("width").get<int>();
    rec.height = j.at("height").get<int>();
    if (rec.width <= 0 || rec.height <= 0) throw ParseError("manifest record: bad dims");
    for (const auto& ji : j.at("instances")) {
        GeneratedInstance inst;
        inst.image_id = rec.image_path;
        for (const auto& jp : ji.at("polygon")) {
            inst.polygon.push_back({jp.at(0).get<double>(), jp.at(1).get<double>()});
        }
        inst.text = ji.at("text").get<std::string>();
        inst.recognized = ji.value("recognized", "");
        inst.confidence = ji.value("confidence", 0.0);
        inst.kept = ji.value("kept", true);
        if (inst.confidence < 0.0 || inst.confidence > 1.0) {
            throw ParseError("manifest record: confidence outside [0, 1]");
        }
        if (inst.polygon.size() < 3) throw ParseError("manifest record: polygon needs >= 3 points");
        if (!polygon_in_bounds(inst.polygon, rec.width, rec.height)) {
            throw ParseError("manifest record: polygon outside image bounds");
        }
        rec.instances.push_back(std::move(inst));
    }
    const auto& jp = j.at("provenance");
    rec.provenance.checkpoint_hash = jp.value("checkpoint_hash", "");
    rec.provenance.recognizer_hash = jp.value("recognizer_hash", "");
    rec.provenance.config_hash = jp.value("config_hash", "");
    rec.provenance.seed = jp.value("seed", uint64_t{0});
    return rec;
}

ManifestWriter::ManifestWriter(const std::filesystem::path& out_dir) : m_out_dir(out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir.string());
    m_manifest_path = out_dir / "manifest.jsonl";
    std::ofstream f(m_manifest_path, std::ios::trunc);
    if (!f) throw IoError("cannot open manifest for writing: " + m_manifest_path.string());
}

DatasetRecord ManifestWriter::emit_record(const Image& image,
                                          const std::vector<GeneratedInstance>& instances,
                                          const Provenance& provenance) {
    DatasetRecord rec;
    char name[32];
    std::snprintf(name, sizeof(name), "images/%06d.png", m_index++);
    rec.image_path = name;
    rec.width = image.width;
    rec.height = image.height;
    rec.instances = instances;
    rec.provenance = provenance;

    write_png(m_out_dir / rec.image_path, image);
    std::ofstream f(m_manifest_path, std::ios::app);
    if (!f) throw IoError("cannot append to manifest: " + m_manifest_path.string());
    f << rec.to_json().dump() << "\n";
    if (!f) throw IoError("manifest write failed: " + m_manifest_path.string());
    return rec;
}

std::vector<DatasetRecord> read_manifest(const std::filesystem::path& manifest_path,
                                         bool check_images) {
    std::ifstream f(manifest_path);
    if (!f) throw IoError("cannot open manifest: " + manifest_path.string());
    std::vector<DatasetRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            records.push_back(DatasetRecord::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ParseError& e) {
            throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        if (check_images) {
            const auto img_path = manifest_path.parent_path() / records.back().image_path;
            if (!std::filesystem::exists(img_path)) {
                throw DataError("manifest line " + std::to_string(line_no) +
                                ": image file missing: " + img_path.string());
            }
            const Image img = read_png(img_path);
            if (img.width != records.back().width || img.height != records.back().height) {
                throw DataError("manifest line " + std::to_string(line_no) +
                                ": image dims do not match the record");
            }
        }
    }
    return records;
}

DatasetStats compute_stats(const std::filesystem::path& manifest_path) {
    const std::vector<DatasetRecord> records = read_manifest(manifest_path);
    DatasetStats stats;
    stats.images = static_cast<long long>(records.size());
    for (const DatasetRecord& rec : records) {
        stats.instances += static_cast<long long>(rec.instances.size());
    }
    stats.instances_per_image =
        stats.images == 0 ? 0.0
                          : static_cast<double>(stats.instances) / static_cast<double>(stats.images);
    return stats;
}

nlohmann::json stats_report(const DatasetStats& stats) {
    return {{"images", stats.images},
            {"instances", stats.instances},
            {"instances_per_image", stats.instances_per_image},
            {"reference",
             {{"name", "difftext_10k"},
              {"images", 10000},
              {"instances", 76354},
              {"instances_per_image", 7.6354},
              {"note", "published corpus ratio, for context only"}}}};
}

void export_icdar(const std::filesystem::path& manifest_path,
                  const std::filesystem::path& out_dir) {
    const std::vector<DatasetRecord> records = read_manifest(manifest_path);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create export directory: " + out_dir.string());
    std::ofstream warnings(out_dir / "warnings.log", std::ios::trunc);

    for (const DatasetRecord& rec : records) {
        const std::string stem = std::filesystem::path(rec.image_path).stem().string();
        std::ofstream f(out_dir / (stem + ".txt"), std::ios::trunc | std::ios::binary);
        if (!f) throw IoError("cannot write export file for " + rec.image_path);
        for (const GeneratedInstance& inst : rec.instances) {
            Polygon quad = inst.polygon;
            if (quad.size() != 4) {
                quad = min_area_quad(inst.polygon);
                warnings << rec.image_path << ": " << inst.polygon.size()
                         << "-gon converted to min-area quad\n";
            }
            for (const Point& p : quad) {
                f << static_cast<long long>(std::llround(p.x)) << ","
                  << static_cast<long long>(std::llround(p.y)) << ",";
            }
            f << inst.text << "\n";
        }
    }
}

}  // namespace difftext
