// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "difftext/geometry.hpp"
#include "difftext/rng.hpp"
#include "difftext/tensor.hpp"

namespace difftext::toydata {

// 5x7 bitmap glyphs for a-z and 0-9; anything else renders as a solid block.
const std::array<uint8_t, 7>& glyph_rows(char c);

int word_pixel_width(const std::string& word, int scale);
inline int word_pixel_height(int scale) { return 7 * scale; }

void draw_word(Image& image, const std::string& word, int x, int y, int scale, double value);

// Tight box around the drawn word, expanded by `pad` pixels.
Polygon word_polygon(const std::string& word, int x, int y, int scale, int pad = 1);

// Smooth dark gradient with mild per-pixel jitter.
Image make_background(int height, int width, Rng& rng);

struct DrawnInstance {
    Polygon polygon;
    std::string text;
};

// Draws one word at a random position/scale that fits; bright on dark.
DrawnInstance place_word(Image& image, const std::string& word, Rng& rng);

// Training-corpus layout consumed by the training harness: images/ plus an
// annotations.jsonl with {image, polygon, text} lines.
void write_training_corpus(const std::filesystem::path& dir,
                           const std::vector<std::string>& words, int count, int image_size,
                           uint64_t seed);

// Background images with per-image segmentation and depth maps:
// bg_%04d.png, bg_%04d.seg.png (labels), bg_%04d.depth.png (16-bit planar).
void write_backgrounds_with_maps(const std::filesystem::path& dir, int count, int height,
                                 int width, uint64_t seed);

// (patch, word) pairs for recognizer training.
std::vector<std::pair<Image, std::string>> recognizer_corpus(const std::vector<std::string>& words,
                                                             int per_word, int patch_size,
                                                             uint64_t seed);

struct LabeledImage {
    Image image;
    std::vector<Polygon> polygons;
    std::vector<std::string> words;
};

// Directly drawn detection set (no diffusion); ground truth for probe tests.
std::vector<LabeledImage> detection_set(const std::vector<std::string>& words, int count, int size,
                                        uint64_t seed);

// Writes a detection set in the dataset manifest format (images/ + manifest).
std::filesystem::path write_labeled_manifest(const std::filesystem::path& dir,
                                             const std::vector<LabeledImage>& set);

void write_word_list(const std::filesystem::path& path, const std::vector<std::string>& words);

// Small default vocabulary for demos and tests.
std::vector<std::string> default_words();

}  // namespace difftext::toydata
