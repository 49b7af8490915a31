// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/png_io.hpp"

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "difftext/errors.hpp"

namespace difftext {
namespace {

constexpr std::array<uint8_t, 8> kSignature = {137, 80, 78, 71, 13, 10, 26, 10};

uint32_t crc32_of(const uint8_t* data, size_t len, uint32_t seed = 0xffffffffu) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t n = 0; n < 256; ++n) {
            uint32_t c = n;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[n] = c;
        }
        return t;
    }();
    uint32_t c = seed;
    for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& payload) {
    put_u32(out, static_cast<uint32_t>(payload.size()));
    std::vector<uint8_t> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    out.insert(out.end(), body.begin(), body.end());
    put_u32(out, crc32_of(body.data(), body.size()));
}

uint32_t adler32_of(const std::vector<uint8_t>& data) {
    uint32_t a = 1, b = 0;
    for (uint8_t byte : data) {
        a = (a + byte) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

// zlib container holding stored (uncompressed) deflate blocks.
std::vector<uint8_t> stored_zlib_stream(const std::vector<uint8_t>& raw) {
    std::vector<uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    size_t off = 0;
    do {
        const size_t chunk = std::min<size_t>(raw.size() - off, 65535);
        const bool final = off + chunk == raw.size();
        z.push_back(final ? 1 : 0);
        z.push_back(static_cast<uint8_t>(chunk & 0xff));
        z.push_back(static_cast<uint8_t>(chunk >> 8));
        z.push_back(static_cast<uint8_t>(~chunk & 0xff));
        z.push_back(static_cast<uint8_t>((~chunk >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + off, raw.begin() + off + chunk);
        off += chunk;
    } while (off < raw.size());
    const uint32_t adler = adler32_of(raw);
    z.push_back(static_cast<uint8_t>(adler >> 24));
    z.push_back(static_cast<uint8_t>(adler >> 16));
    z.push_back(static_cast<uint8_t>(adler >> 8));
    z.push_back(static_cast<uint8_t>(adler));
    return z;
}

void write_file(const std::filesystem::path& path, int width, int height, int bit_depth,
                int color_type, const std::vector<uint8_t>& scanlines) {
    std::vector<uint8_t> out(kSignature.begin(), kSignature.end());
    std::vector<uint8_t> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(width));
    put_u32(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(static_cast<uint8_t>(bit_depth));
    ihdr.push_back(static_cast<uint8_t>(color_type));
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", stored_zlib_stream(scanlines));
    append_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

uint8_t to_u8(double v) {
    const double scaled = (v + 1.0) * 0.5 * 255.0;
    return static_cast<uint8_t>(std::lround(std::clamp(scaled, 0.0, 255.0)));
}

struct Decoded {
    int width = 0;
    int height = 0;
    int channels = 0;   // after palette expansion / alpha drop
    int bit_depth = 0;  // 8 or 16
    std::vector<uint16_t> pixels;  // interleaved, native scale
};

uint32_t read_u32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& in, size_t expected) {
    std::vector<uint8_t> out(expected);
    uLongf out_len = static_cast<uLongf>(expected);
    const int rc = uncompress(out.data(), &out_len, in.data(), static_cast<uLong>(in.size()));
    if (rc != Z_OK) throw ParseError("png: zlib inflate failed, code " + std::to_string(rc));
    out.resize(out_len);
    return out;
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

Decoded decode_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || !std::equal(kSignature.begin(), kSignature.end(), bytes.begin())) {
        throw ParseError("not a png file: " + path.string());
    }

    int width = 0, height = 0, bit_depth = 0, color_type = 0;
    std::vector<uint8_t> idat;
    std::vector<std::array<uint8_t, 3>> palette;
    size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const uint32_t len = read_u32(&bytes[pos]);
        const std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
        if (pos + 12 + len > bytes.size()) throw ParseError("png: truncated chunk in " + path.string());
        const uint8_t* data = &bytes[pos + 8];
        if (type == "IHDR") {
            width = static_cast<int>(read_u32(data));
            height = static_cast<int>(read_u32(data + 4));
            bit_depth = data[8];
            color_type = data[9];
            if (data[12] != 0) throw ParseError("png: interlaced images unsupported");
            if (bit_depth != 8 && bit_depth != 16) {
                throw ParseError("png: unsupported bit depth " + std::to_string(bit_depth));
            }
        } else if (type == "PLTE") {
            for (uint32_t i = 0; i + 2 < len; i += 3) {
                palette.push_back({data[i], data[i + 1], data[i + 2]});
            }
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (width <= 0 || height <= 0) throw ParseError("png: missing IHDR in " + path.string());

    int src_channels = 0;
    switch (color_type) {
        case 0: src_channels = 1; break;  // gray
        case 2: src_channels = 3; break;  // rgb
        case 3: src_channels = 1; break;  // palette indices
        case 4: src_channels = 2; break;  // gray + alpha
        case 6: src_channels = 4; break;  // rgba
        default: throw ParseError("png: unsupported color type " + std::to_string(color_type));
    }
    if (color_type == 3 && bit_depth != 8) throw ParseError("png: palette requires 8-bit depth");

    const int bytes_per_sample = bit_depth / 8;
    const size_t row_bytes = static_cast<size_t>(width) * src_channels * bytes_per_sample;
    std::vector<uint8_t> raw = zlib_inflate(idat, (row_bytes + 1) * height);
    if (raw.size() != (row_bytes + 1) * static_cast<size_t>(height)) {
        throw ParseError("png: unexpected decompressed size in " + path.string());
    }

    // De-filter in place per row.
    const int bpp = src_channels * bytes_per_sample;
    std::vector<uint8_t> prev(row_bytes, 0);
    std::vector<uint8_t> cur(row_bytes);
    std::vector<uint8_t> flat;
    flat.reserve(row_bytes * height);
    for (int y = 0; y < height; ++y) {
        const uint8_t* src = &raw[static_cast<size_t>(y) * (row_bytes + 1)];
        const uint8_t filter = src[0];
        std::memcpy(cur.data(), src + 1, row_bytes);
        for (size_t i = 0; i < row_bytes; ++i) {
            const int a = i >= static_cast<size_t>(bpp) ? cur[i - bpp] : 0;
            const int b = prev[i];
            const int c = i >= static_cast<size_t>(bpp) ? prev[i - bpp] : 0;
            switch (filter) {
                case 0: break;
                case 1: cur[i] = static_cast<uint8_t>(cur[i] + a); break;
                case 2: cur[i] = static_cast<uint8_t>(cur[i] + b); break;
                case 3: cur[i] = static_cast<uint8_t>(cur[i] + (a + b) / 2); break;
                case 4: cur[i] = static_cast<uint8_t>(cur[i] + paeth(a, b, c)); break;
                default: throw ParseError("png: unknown filter " + std::to_string(filter));
            }
        }
        flat.insert(flat.end(), cur.begin(), cur.end());
        std::swap(prev, cur);
    }

    Decoded out;
    out.width = width;
    out.height = height;
    out.bit_depth = bit_depth;
    const int keep = (color_type == 4) ? 1 : (color_type == 6 ? 3 : (color_type == 3 ? 3 : src_channels));
    out.channels = keep;
    out.pixels.resize(static_cast<size_t>(width) * height * keep);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const size_t base = (static_cast<size_t>(y) * width + x) * src_channels * bytes_per_sample;
            for (int c = 0; c < keep; ++c) {
                uint16_t v;
                if (color_type == 3) {
                    const uint8_t idx = flat[base];
                    if (idx >= palette.size()) throw ParseError("png: palette index out of range");
                    v = palette[idx][static_cast<size_t>(c)];
                } else if (bit_depth == 16) {
                    const size_t o = base + static_cast<size_t>(c) * 2;
                    v = static_cast<uint16_t>((flat[o] << 8) | flat[o + 1]);
                } else {
                    v = flat[base + static_cast<size_t>(c)];
                }
                out.pixels[(static_cast<size_t>(y) * width + x) * keep + c] = v;
            }
        }
    }
    return out;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
    const int c = image.channel_count();
    if (c != 1 && c != 3) throw ShapeError("write_png: expected 1 or 3 channels");
    std::vector<uint8_t> scan;
    scan.reserve(static_cast<size_t>(image.height) * (1 + static_cast<size_t>(image.width) * c));
    for (int y = 0; y < image.height; ++y) {
        scan.push_back(0);  // filter: none
        for (int x = 0; x < image.width; ++x) {
            for (int ch = 0; ch < c; ++ch) scan.push_back(to_u8(image.at(y, x, ch)));
        }
    }
    write_file(path, image.width, image.height, 8, c == 1 ? 0 : 2, scan);
}

void write_png_gray16(const std::filesystem::path& path, const Eigen::MatrixXd& values) {
    std::vector<uint8_t> scan;
    scan.reserve(static_cast<size_t>(values.rows()) * (1 + static_cast<size_t>(values.cols()) * 2));
    for (Eigen::Index y = 0; y < values.rows(); ++y) {
        scan.push_back(0);
        for (Eigen::Index x = 0; x < values.cols(); ++x) {
            const double v = std::clamp(values(y, x), 0.0, 1.0) * 65535.0;
            const auto u = static_cast<uint16_t>(std::lround(v));
            scan.push_back(static_cast<uint8_t>(u >> 8));
            scan.push_back(static_cast<uint8_t>(u & 0xff));
        }
    }
    write_file(path, static_cast<int>(values.cols()), static_cast<int>(values.rows()), 16, 0, scan);
}

void write_png_labels(const std::filesystem::path& path, const Eigen::MatrixXi& labels) {
    std::vector<uint8_t> scan;
    for (Eigen::Index y = 0; y < labels.rows(); ++y) {
        scan.push_back(0);
        for (Eigen::Index x = 0; x < labels.cols(); ++x) {
            const int v = labels(y, x);
            if (v < 0 || v > 255) throw DataError("write_png_labels: label out of [0, 255]");
            scan.push_back(static_cast<uint8_t>(v));
        }
    }
    write_file(path, static_cast<int>(labels.cols()), static_cast<int>(labels.rows()), 8, 0, scan);
}

Image read_png(const std::filesystem::path& path) {
    const Decoded d = decode_file(path);
    const double scale = d.bit_depth == 16 ? 65535.0 : 255.0;
    Image img(d.height, d.width, d.channels);
    for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) {
            for (int c = 0; c < d.channels; ++c) {
                const double v = d.pixels[(static_cast<size_t>(y) * d.width + x) * d.channels + c];
                img.at(y, x, c) = v / scale * 2.0 - 1.0;
            }
        }
    }
    return img;
}

Eigen::MatrixXd read_png_gray(const std::filesystem::path& path) {
    const Decoded d = decode_file(path);
    const double scale = d.bit_depth == 16 ? 65535.0 : 255.0;
    Eigen::MatrixXd out(d.height, d.width);
    for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) {
            out(y, x) = d.pixels[(static_cast<size_t>(y) * d.width + x) * d.channels] / scale;
        }
    }
    return out;
}

Eigen::MatrixXi read_png_labels(const std::filesystem::path& path) {
    const Decoded d = decode_file(path);
    Eigen::MatrixXi out(d.height, d.width);
    for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) {
            out(y, x) = d.pixels[(static_cast<size_t>(y) * d.width + x) * d.channels];
        }
    }
    return out;
}

}  // namespace difftext
