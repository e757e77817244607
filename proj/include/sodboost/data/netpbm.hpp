#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sodboost/common.hpp"

namespace sodboost {

// Raw 8-bit image, interleaved channels (1 for PGM, 3 for PPM), maxval 255.
struct ImageU8 {
    int width = 0, height = 0, channels = 1;
    std::vector<uint8_t> pixels;
};

namespace netpbm_detail {

inline int read_header_int(std::istream& in, const std::string& path) {
    // Skip whitespace and '#' comments between header tokens.
    for (;;) {
        const int c = in.peek();
        if (c == EOF) throw IoError(path + ": malformed header (unexpected end of file)");
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    int value = 0;
    if (!(in >> value) || value < 0) throw IoError(path + ": malformed header value");
    return value;
}

}  // namespace netpbm_detail

// Reads a binary PGM (P5) or PPM (P6) with maxval 255.
inline ImageU8 read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open for reading");
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    ImageU8 img;
    if (m0 == 'P' && m1 == '5') {
        img.channels = 1;
    } else if (m0 == 'P' && m1 == '6') {
        img.channels = 3;
    } else {
        throw IoError(path + ": malformed header (expected P5 or P6)");
    }
    img.width = netpbm_detail::read_header_int(in, path);
    img.height = netpbm_detail::read_header_int(in, path);
    const int maxval = netpbm_detail::read_header_int(in, path);
    if (maxval != 255) {
        throw IoError(path + ": unsupported maxval " + std::to_string(maxval) +
                      " (must be 255)");
    }
    if (img.width <= 0 || img.height <= 0) throw IoError(path + ": malformed dimensions");
    in.get();  // single whitespace before the payload
    const size_t n =
        static_cast<size_t>(img.width) * img.height * static_cast<size_t>(img.channels);
    img.pixels.resize(n);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n) throw IoError(path + ": truncated payload");
    return img;
}

inline void write_pnm(const std::string& path, const ImageU8& img) {
    require(img.channels == 1 || img.channels == 3, "write_pnm: channels must be 1 or 3");
    require(static_cast<size_t>(img.width) * img.height * img.channels == img.pixels.size(),
            "write_pnm: pixel buffer size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path + ": cannot open for writing");
    out << (img.channels == 1 ? "P5" : "P6") << "\n"
        << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw IoError(path + ": write failed");
}

// One dataset element: planar RGB image in [0,1] plus a binary mask.
struct Sample {
    std::string id;
    int width = 0, height = 0;
    std::vector<float> image;  // 3 * height * width, channel-planar
    std::vector<float> mask;   // height * width, values in {0,1}
};

inline Sample sample_from_images(const std::string& id, const ImageU8& rgb,
                                 const ImageU8& mask) {
    require(rgb.channels == 3, "sample image must be a 3-channel PPM");
    require(mask.channels == 1, "sample mask must be a 1-channel PGM");
    require_shape(rgb.width == mask.width && rgb.height == mask.height,
                  "sample " + id + ": image and mask dimensions differ");
    Sample s;
    s.id = id;
    s.width = rgb.width;
    s.height = rgb.height;
    const size_t plane = static_cast<size_t>(s.width) * s.height;
    s.image.resize(3 * plane);
    for (size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < 3; ++c) {
            s.image[static_cast<size_t>(c) * plane + i] =
                static_cast<float>(rgb.pixels[i * 3 + static_cast<size_t>(c)]) / 255.0f;
        }
    }
    s.mask.resize(plane);
    // Anti-aliased sources binarize at 0.5.
    for (size_t i = 0; i < plane; ++i) s.mask[i] = mask.pixels[i] >= 128 ? 1.0f : 0.0f;
    return s;
}

inline ImageU8 image_to_u8(const Sample& s) {
    ImageU8 img;
    img.width = s.width;
    img.height = s.height;
    img.channels = 3;
    const size_t plane = static_cast<size_t>(s.width) * s.height;
    img.pixels.resize(3 * plane);
    for (size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < 3; ++c) {
            const float v = s.image[static_cast<size_t>(c) * plane + i];
            const float clamped = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
            img.pixels[i * 3 + static_cast<size_t>(c)] =
                static_cast<uint8_t>(std::lround(clamped * 255.0f));
        }
    }
    return img;
}

inline ImageU8 mask_to_u8(const std::vector<float>& mask, int width, int height) {
    ImageU8 img;
    img.width = width;
    img.height = height;
    img.channels = 1;
    img.pixels.resize(mask.size());
    for (size_t i = 0; i < mask.size(); ++i) {
        img.pixels[i] = mask[i] >= 0.5f ? 255 : 0;
    }
    return img;
}

// Saliency maps persist as PGM with values round(255 * p).
inline void write_saliency_map(const std::string& path, const std::vector<double>& p,
                               int width, int height) {
    ImageU8 img;
    img.width = width;
    img.height = height;
    img.channels = 1;
    img.pixels.resize(p.size());
    for (size_t i = 0; i < p.size(); ++i) {
        const double v = std::clamp(p[i], 0.0, 1.0);
        img.pixels[i] = static_cast<uint8_t>(std::lround(255.0 * v));
    }
    write_pnm(path, img);
}

}  // namespace sodboost
