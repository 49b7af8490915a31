// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/toydata.hpp"

#include <json.hpp>

#include <cctype>
#include <fstream>
#include <map>

#include "difftext/dataset.hpp"
#include "difftext/errors.hpp"
#include "difftext/png_io.hpp"

namespace difftext::toydata {

namespace {

using Glyph = std::array<uint8_t, 7>;

const std::map<char, Glyph>& font() {
    static const std::map<char, Glyph> table = {
        {'a', {0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
        {'b', {0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110}},
        {'c', {0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110}},
        {'d', {0b11100, 0b10010, 0b10001, 0b10001, 0b10001, 0b10010, 0b11100}},
        {'e', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111}},
        {'f', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000}},
        {'g', {0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111}},
        {'h', {0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
        {'i', {0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
        {'j', {0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100}},
        {'k', {0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001}},
        {'l', {0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111}},
        {'m', {0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001}},
        {'n', {0b10001, 0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001}},
        {'o', {0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
        {'p', {0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000}},
        {'q', {0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101}},
        {'r', {0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001}},
        {'s', {0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110}},
        {'t', {0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100}},
        {'u', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
        {'v', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100}},
        {'w', {0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010}},
        {'x', {0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001}},
        {'y', {0b10001, 0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100}},
        {'z', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111}},
        {'0', {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110}},
        {'1', {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
        {'2', {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111}},
        {'3', {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110}},
        {'4', {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010}},
        {'5', {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110}},
        {'6', {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110}},
        {'7', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000}},
        {'8', {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110}},
        {'9', {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100}},
    };
    return table;
}

const Glyph kBlock = {0b11111, 0b11111, 0b11111, 0b11111, 0b11111, 0b11111, 0b11111};

}  // namespace

const std::array<uint8_t, 7>& glyph_rows(char c) {
    const char folded = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const auto it = font().find(folded);
    return it == font().end() ? kBlock : it->second;
}

int word_pixel_width(const std::string& word, int scale) {
    if (word.empty()) return 0;
    const int glyphs = static_cast<int>(word.size());
    return glyphs * 5 * scale + (glyphs - 1) * scale;  // one-column gap between glyphs
}

void draw_word(Image& image, const std::string& word, int x, int y, int scale, double value) {
    int cx = x;
    for (char c : word) {
        const Glyph& rows = glyph_rows(c);
        for (int gy = 0; gy < 7; ++gy) {
            for (int gx = 0; gx < 5; ++gx) {
                if (!(rows[static_cast<size_t>(gy)] >> (4 - gx) & 1)) continue;
                for (int sy = 0; sy < scale; ++sy) {
                    for (int sx = 0; sx < scale; ++sx) {
                        const int py = y + gy * scale + sy;
                        const int px = cx + gx * scale + sx;
                        if (py < 0 || px < 0 || py >= image.height || px >= image.width) continue;
                        for (int ch = 0; ch < image.channel_count(); ++ch) {
                            image.at(py, px, ch) = value;
                        }
                    }
                }
            }
        }
        cx += 6 * scale;
    }
}

Polygon word_polygon(const std::string& word, int x, int y, int scale, int pad) {
    const double x0 = x - pad;
    const double y0 = y - pad;
    const double x1 = x + word_pixel_width(word, scale) + pad;
    const double y1 = y + word_pixel_height(scale) + pad;
    return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

Image make_background(int height, int width, Rng& rng) {
    Image img(height, width, 3);
    const double base = -0.85 + rng.uniform() * 0.25;
    const double gx = (rng.uniform() - 0.5) * 0.4 / width;
    const double gy = (rng.uniform() - 0.5) * 0.4 / height;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double v = base + gx * x + gy * y + (rng.uniform() - 0.5) * 0.02;
            for (int c = 0; c < 3; ++c) {
                img.at(y, x, c) = std::clamp(v + 0.03 * c, -1.0, 1.0);
            }
        }
    }
    return img;
}

DrawnInstance place_word(Image& image, const std::string& word, Rng& rng) {
    int scale = 2;
    int w = word_pixel_width(word, scale);
    if (w + 4 > image.width) {
        scale = 1;
        w = word_pixel_width(word, scale);
    }
    const int h = word_pixel_height(scale);
    const int max_x = std::max(1, image.width - w - 2);
    const int max_y = std::max(1, image.height - h - 2);
    const int x = 2 + rng.uniform_int(0, std::max(0, max_x - 2));
    const int y = 2 + rng.uniform_int(0, std::max(0, max_y - 2));
    const double value = 0.75 + rng.uniform() * 0.2;
    draw_word(image, word, x, y, scale, value);
    DrawnInstance inst;
    inst.polygon = word_polygon(word, x, y, scale);
    for (Point& p : inst.polygon) {
        p.x = std::clamp(p.x, 0.0, static_cast<double>(image.width));
        p.y = std::clamp(p.y, 0.0, static_cast<double>(image.height));
    }
    inst.text = word;
    return inst;
}

void write_training_corpus(const std::filesystem::path& dir,
                           const std::vector<std::string>& words, int count, int image_size,
                           uint64_t seed) {
    if (words.empty()) throw ConfigError("write_training_corpus: empty word list");
    std::error_code ec;
    std::filesystem::create_directories(dir / "images", ec);
    if (ec) throw IoError("cannot create corpus directory: " + dir.string());
    std::ofstream ann(dir / "annotations.jsonl", std::ios::trunc);
    if (!ann) throw IoError("cannot write annotations in " + dir.string());

    Rng rng(derive_seed(seed, {0x636f7270}));
    for (int i = 0; i < count; ++i) {
        Image img = make_background(image_size, image_size, rng);
        const std::string& word = words[static_cast<size_t>(i) % words.size()];
        const DrawnInstance inst = place_word(img, word, rng);

        char name[32];
        std::snprintf(name, sizeof(name), "%04d.png", i);
        write_png(dir / "images" / name, img);
        nlohmann::json poly = nlohmann::json::array();
        for (const Point& p : inst.polygon) poly.push_back({p.x, p.y});
        ann << nlohmann::json{{"image", name}, {"polygon", poly}, {"text", inst.text}}.dump()
            << "\n";
    }
}

void write_backgrounds_with_maps(const std::filesystem::path& dir, int count, int height,
                                 int width, uint64_t seed) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create backgrounds directory: " + dir.string());
    Rng rng(derive_seed(seed, {0x62677273}));

    for (int i = 0; i < count; ++i) {
        Image img = make_background(height, width, rng);
        Eigen::MatrixXi seg(height, width);
        Eigen::MatrixXd depth(height, width);

        // Two or three rectangular segments with planar depth each.
        const int segments = rng.uniform_int(2, 3);
        const int split_x = width / 4 + rng.uniform_int(0, width / 2);
        const int split_y = height / 4 + rng.uniform_int(0, height / 2);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                int id = x < split_x ? 0 : 1;
                if (segments == 3 && id == 1 && y >= split_y) id = 2;
                seg(y, x) = id;
                depth(y, x) = 0.2 + 0.15 * id + 0.0005 * x + 0.0003 * y;
                for (int c = 0; c < 3; ++c) {
                    img.at(y, x, c) = std::clamp(img.at(y, x, c) + 0.05 * id, -1.0, 1.0);
                }
            }
        }

        char stem[32];
        std::snprintf(stem, sizeof(stem), "bg_%04d", i);
        write_png(dir / (std::string(stem) + ".png"), img);
        write_png_labels(dir / (std::string(stem) + ".seg.png"), seg);
        write_png_gray16(dir / (std::string(stem) + ".depth.png"), depth);
    }
}

std::vector<std::pair<Image, std::string>> recognizer_corpus(const std::vector<std::string>& words,
                                                             int per_word, int patch_size,
                                                             uint64_t seed) {
    if (words.empty()) throw ConfigError("recognizer_corpus: empty word list");
    Rng rng(derive_seed(seed, {0x72656363}));
    std::vector<std::pair<Image, std::string>> corpus;
    corpus.reserve(words.size() * static_cast<size_t>(per_word));
    for (const std::string& word : words) {
        for (int i = 0; i < per_word; ++i) {
            Image patch(patch_size, patch_size, 3, -0.8 + rng.uniform() * 0.15);
            int scale = 2;
            while (scale > 1 && word_pixel_width(word, scale) > patch_size - 2) --scale;
            const int w = word_pixel_width(word, scale);
            const int h = word_pixel_height(scale);
            const int x = std::max(1, (patch_size - w) / 2 + rng.uniform_int(-1, 1));
            const int y = std::max(1, (patch_size - h) / 2 + rng.uniform_int(-1, 1));
            draw_word(patch, word, x, y, scale, 0.7 + rng.uniform() * 0.25);
            corpus.push_back({std::move(patch), word});
        }
    }
    return corpus;
}

std::vector<LabeledImage> detection_set(const std::vector<std::string>& words, int count, int size,
                                        uint64_t seed) {
    if (words.empty()) throw ConfigError("detection_set: empty word list");
    Rng rng(derive_seed(seed, {0x64657473}));
    std::vector<LabeledImage> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        LabeledImage li;
        li.image = make_background(size, size, rng);
        const int n = rng.uniform_int(1, 2);
        for (int k = 0; k < n; ++k) {
            const std::string& word = words[static_cast<size_t>(rng.uniform_int(
                0, static_cast<int>(words.size()) - 1))];
            // Draw into a scratch copy first so rejected placements leave no pixels.
            Image candidate = li.image;
            const DrawnInstance inst = place_word(candidate, word, rng);
            bool overlaps = false;
            for (const Polygon& prev : li.polygons) {
                if (polygon_bbox(prev).intersects(polygon_bbox(inst.polygon))) overlaps = true;
            }
            if (overlaps) continue;
            li.image = std::move(candidate);
            li.polygons.push_back(inst.polygon);
            li.words.push_back(inst.text);
        }
        out.push_back(std::move(li));
    }
    return out;
}

std::filesystem::path write_labeled_manifest(const std::filesystem::path& dir,
                                             const std::vector<LabeledImage>& set) {
    ManifestWriter writer(dir);
    Provenance prov;
    prov.checkpoint_hash = "toydata";
    prov.recognizer_hash = "toydata";
    prov.config_hash = "toydata";
    for (const LabeledImage& li : set) {
        std::vector<GeneratedInstance> instances;
        for (size_t i = 0; i < li.polygons.size(); ++i) {
            GeneratedInstance inst;
            inst.polygon = li.polygons[i];
            inst.text = li.words[i];
            inst.recognized = li.words[i];
            inst.confidence = 1.0;
            inst.kept = true;
            instances.push_back(std::move(inst));
        }
        writer.emit_record(li.image, instances, prov);
    }
    return writer.manifest_path();
}

void write_word_list(const std::filesystem::path& path, const std::vector<std::string>& words) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write word list: " + path.string());
    for (const std::string& w : words) f << w << "\n";
}

std::vector<std::string> default_words() {
    return {"cat", "dog", "sun", "box", "red",  "sky", "car", "zip",
            "oak", "ant", "fox", "hat", "ice",  "jam", "key", "log"};
}

}  // namespace difftext::toydata
