// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/crops.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "difftext/errors.hpp"

namespace difftext {

namespace {
int floor_multiple(int v, int m) { return (v >= 0 ? v / m : (v - m + 1) / m) * m; }
int ceil_multiple(int v, int m) { return (v >= 0 ? (v + m - 1) / m : v / m) * m; }
}  // namespace

Box expand_snap_clamp(const Box& bbox, int margin, int snap, int image_w, int image_h) {
    if (snap < 1) throw ConfigError("expand_snap_clamp: snap must be >= 1");
    int x0 = floor_multiple(bbox.x - margin, snap);
    int y0 = floor_multiple(bbox.y - margin, snap);
    int x1 = ceil_multiple(bbox.x + bbox.w + margin, snap);
    int y1 = ceil_multiple(bbox.y + bbox.h + margin, snap);
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, image_w);
    y1 = std::min(y1, image_h);
    // Clamping against a non-aligned border can break divisibility; shrink.
    int w = x1 - x0;
    int h = y1 - y0;
    w -= w % snap;
    h -= h % snap;
    return Box{x0, y0, std::max(w, 0), std::max(h, 0)};
}

WordSource::WordSource(std::vector<std::string> words, const Charset& charset, int max_len,
                       uint64_t seed) {
    for (std::string& w : words) {
        std::string folded;
        for (char c : w) folded.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        if (folded.empty() || static_cast<int>(folded.size()) > max_len) continue;
        if (!charset.contains_word(folded)) continue;
        m_words.push_back(std::move(folded));
    }
    if (m_words.empty()) throw ConfigError("word source: no usable words after charset filtering");
    Rng rng(derive_seed(seed, {0x776f7264}));
    for (size_t i = m_words.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
        std::swap(m_words[i - 1], m_words[j]);
    }
}

WordSource WordSource::from_file(const std::filesystem::path& path, const Charset& charset,
                                 int max_len, uint64_t seed) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open word list: " + path.string());
    std::vector<std::string> words;
    std::string line;
    while (std::getline(f, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) words.push_back(line);
    }
    return WordSource(std::move(words), charset, max_len, seed);
}

const std::string& WordSource::next() {
    const std::string& w = m_words[m_cursor];
    m_cursor = (m_cursor + 1) % m_words.size();
    return w;
}

std::vector<CropJob> make_crop_jobs(const std::string& image_id, int image_w, int image_h,
                                    const std::vector<PlacementRegion>& regions, WordSource& words,
                                    const CropParams& params, uint64_t seed, uint64_t image_index) {
    std::vector<const PlacementRegion*> sorted;
    sorted.reserve(regions.size());
    for (const PlacementRegion& r : regions) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const PlacementRegion* a, const PlacementRegion* b) { return a->area > b->area; });

    std::vector<CropJob> jobs;
    for (const PlacementRegion* region : sorted) {
        if (static_cast<int>(jobs.size()) >= params.max_jobs) break;
        const Box bbox = polygon_bbox(region->polygon);
        const int margin =
            static_cast<int>(std::lround(params.margin_frac * std::max(bbox.w, bbox.h)));
        const Box crop = expand_snap_clamp(bbox, margin, params.snap, image_w, image_h);
        if (crop.w <= 0 || crop.h <= 0) continue;
        if (!crop.contains(bbox)) continue;  // clamping pushed the region out of the crop
        bool overlaps = false;
        for (const CropJob& existing : jobs) {
            if (existing.crop_box.intersects(crop)) {
                overlaps = true;
                break;
            }
        }
        if (overlaps) continue;

        CropJob job;
        job.image_id = image_id;
        job.crop_box = crop;
        job.region_local = region->polygon;
        for (Point& p : job.region_local) {
            p.x -= crop.x;
            p.y -= crop.y;
        }
        job.text = words.next();
        job.seed = derive_seed(seed, {image_index, jobs.size()});
        jobs.push_back(std::move(job));
    }
    return jobs;
}

Image crop_image(const Image& image, const Box& box) {
    if (box.x < 0 || box.y < 0 || box.x + box.w > image.width || box.y + box.h > image.height) {
        throw ShapeError("crop_image: box outside image bounds");
    }
    Image out(box.h, box.w, image.channel_count());
    for (int c = 0; c < image.channel_count(); ++c) {
        out.channels[static_cast<size_t>(c)] =
            image.channels[static_cast<size_t>(c)].block(box.y, box.x, box.h, box.w);
    }
    return out;
}

Image paste_back(const Image& image, const CropJob& job, const Image& generated_crop) {
    const Box& box = job.crop_box;
    if (generated_crop.height != box.h || generated_crop.width != box.w ||
        generated_crop.channel_count() != image.channel_count()) {
        throw ShapeError("paste_back: generated crop dims do not match the crop box");
    }
    if (box.x < 0 || box.y < 0 || box.x + box.w > image.width || box.y + box.h > image.height) {
        throw ShapeError("paste_back: crop box outside image bounds");
    }
    Image out = image;
    for (int c = 0; c < image.channel_count(); ++c) {
        out.channels[static_cast<size_t>(c)].block(box.y, box.x, box.h, box.w) =
            generated_crop.channels[static_cast<size_t>(c)];
    }
    return out;
}

}  // namespace difftext
