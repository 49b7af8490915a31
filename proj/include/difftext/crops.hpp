// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "difftext/condition.hpp"
#include "difftext/geometry.hpp"
#include "difftext/placement.hpp"
#include "difftext/rng.hpp"
#include "difftext/tensor.hpp"

namespace difftext {

// One unit of batched inpainting: a local background crop, the placement
// polygon in crop-local coordinates, the word to render and a derived seed.
struct CropJob {
    std::string image_id;
    Box crop_box;
    Polygon region_local;
    std::string text;
    uint64_t seed = 0;
};

struct CropParams {
    int max_jobs = 4;          // "approximately four" made a hard cap
    double margin_frac = 0.5;  // of the region's max side
    int snap = 8;              // crop sides snap to this multiple (>= autoencoder factor)
};

// Expand by margin, snap outward to the multiple, clamp in-bounds. When a
// clamped edge breaks alignment the box shrinks to the next multiple, so the
// result is always snap-divisible. Idempotent on already-snapped boxes.
Box expand_snap_clamp(const Box& bbox, int margin, int snap, int image_w, int image_h);

// Round-robin word supply, shuffled once per run from the global seed.
class WordSource {
public:
    WordSource(std::vector<std::string> words, const Charset& charset, int max_len, uint64_t seed);
    static WordSource from_file(const std::filesystem::path& path, const Charset& charset,
                                int max_len, uint64_t seed);

    const std::string& next();
    size_t size() const { return m_words.size(); }

private:
    std::vector<std::string> m_words;
    size_t m_cursor = 0;
};

// Largest-area-first greedy selection; candidates whose snapped boxes overlap
// an accepted job are skipped. Seeds derive from (seed, image_index, job index).
std::vector<CropJob> make_crop_jobs(const std::string& image_id, int image_w, int image_h,
                                    const std::vector<PlacementRegion>& regions, WordSource& words,
                                    const CropParams& params, uint64_t seed, uint64_t image_index);

Image crop_image(const Image& image, const Box& box);

// Replaces the crop_box contents with the generated crop; every pixel outside
// the box is bit-identical to the input.
Image paste_back(const Image& image, const CropJob& job, const Image& generated_crop);

}  // namespace difftext
