// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "difftext/errors.hpp"

namespace difftext {

namespace {
constexpr char kMagic[4] = {'D', 'T', 'C', 'K'};

void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
uint64_t read_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
}  // namespace

void Checkpoint::add_tensor(const std::string& name, const Eigen::MatrixXd& value) {
    m_tensors.push_back({name, value});
}

const Eigen::MatrixXd& Checkpoint::tensor(const std::string& name) const {
    for (const Entry& e : m_tensors) {
        if (e.name == name) return e.value;
    }
    throw CompatibilityError("checkpoint: missing tensor '" + name + "'");
}

bool Checkpoint::has_tensor(const std::string& name) const {
    for (const Entry& e : m_tensors) {
        if (e.name == name) return true;
    }
    return false;
}

void Checkpoint::add_params(const nn::ParamRefs& params) {
    for (const nn::Param* p : params) add_tensor(p->name, p->value);
}

void Checkpoint::load_params(const nn::ParamRefs& params) const {
    for (nn::Param* p : params) {
        const Eigen::MatrixXd& v = tensor(p->name);
        if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
            throw CompatibilityError("checkpoint: tensor '" + p->name + "' has shape " +
                                     std::to_string(v.rows()) + "x" + std::to_string(v.cols()) +
                                     ", model expects " + std::to_string(p->value.rows()) + "x" +
                                     std::to_string(p->value.cols()));
        }
        p->value = v;
        p->grad.setZero();
        p->m.resize(0, 0);
        p->v.resize(0, 0);
    }
}

void Checkpoint::save(const std::filesystem::path& path) const {
    nlohmann::json header;
    header["kind"] = kind;
    header["meta"] = meta;
    nlohmann::json index = nlohmann::json::array();
    uint64_t offset = 0;
    for (const Entry& e : m_tensors) {
        index.push_back({{"name", e.name},
                         {"rows", e.value.rows()},
                         {"cols", e.value.cols()},
                         {"offset", offset}});
        offset += static_cast<uint64_t>(e.value.size());
    }
    header["tensors"] = index;
    const std::string json_text = header.dump();

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f.write(kMagic, 4);
    write_u32(f, kVersion);
    write_u64(f, json_text.size());
    f.write(json_text.data(), static_cast<std::streamsize>(json_text.size()));
    write_u64(f, offset);
    for (const Entry& e : m_tensors) {
        // Eigen default storage is column-major; dump in storage order.
        f.write(reinterpret_cast<const char*>(e.value.data()),
                static_cast<std::streamsize>(e.value.size() * sizeof(double)));
    }
    if (!f) throw IoError("write failed: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path.string());
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0) {
        throw ParseError("not a checkpoint file: " + path.string());
    }
    const uint32_t version = read_u32(f);
    if (version != kVersion) {
        throw CompatibilityError("checkpoint version " + std::to_string(version) +
                                 " unsupported (expected " + std::to_string(kVersion) + ")");
    }
    const uint64_t json_len = read_u64(f);
    std::string json_text(json_len, '\0');
    f.read(json_text.data(), static_cast<std::streamsize>(json_len));
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("checkpoint header parse error: " + std::string(e.what()));
    }
    const uint64_t blob_len = read_u64(f);
    std::vector<double> blob(blob_len);
    f.read(reinterpret_cast<char*>(blob.data()),
           static_cast<std::streamsize>(blob_len * sizeof(double)));
    if (!f) throw ParseError("checkpoint truncated: " + path.string());

    Checkpoint ck;
    ck.kind = header.value("kind", "");
    ck.meta = header.value("meta", nlohmann::json::object());
    for (const auto& t : header["tensors"]) {
        const auto rows = t["rows"].get<Eigen::Index>();
        const auto cols = t["cols"].get<Eigen::Index>();
        const auto offset = t["offset"].get<uint64_t>();
        if (offset + static_cast<uint64_t>(rows * cols) > blob_len) {
            throw ParseError("checkpoint tensor out of blob range: " + t["name"].get<std::string>());
        }
        Eigen::MatrixXd m(rows, cols);
        std::memcpy(m.data(), blob.data() + offset, static_cast<size_t>(rows * cols) * sizeof(double));
        ck.m_tensors.push_back({t["name"].get<std::string>(), std::move(m)});
    }
    return ck;
}

std::string file_hash_hex(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path.string());
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<uint8_t>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!f) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
}

}  // namespace difftext
