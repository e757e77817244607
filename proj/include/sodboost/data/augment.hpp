#pragma once

#include <cmath>
#include <vector>

#include "sodboost/data/netpbm.hpp"
#include "sodboost/rng.hpp"

namespace sodboost {

namespace aug_detail {

// Bilinear plane resize with half-pixel centers (same convention as the
// network's resampling).
inline std::vector<float> resize_plane(const float* src, int w, int h, int ow, int oh) {
    std::vector<float> out(static_cast<size_t>(ow) * oh);
    const double sy = static_cast<double>(h) / oh;
    const double sx = static_cast<double>(w) / ow;
    for (int y = 0; y < oh; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::min(std::max(fy, 0.0), h - 1.0);
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < ow; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::min(std::max(fx, 0.0), w - 1.0);
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            const double top = src[y0 * w + x0] + wx * (src[y0 * w + x1] - src[y0 * w + x0]);
            const double bot = src[y1 * w + x0] + wx * (src[y1 * w + x1] - src[y1 * w + x0]);
            out[static_cast<size_t>(y) * ow + x] = static_cast<float>(top + wy * (bot - top));
        }
    }
    return out;
}

}  // namespace aug_detail

struct AugmentConfig {
    double flip_prob = 0.5;
    double crop_ratio = 0.9;
    std::vector<double> scales{0.75, 1.0, 1.25};
};

// Horizontal mirror of image and mask together.
inline Sample flip_horizontal(const Sample& s) {
    Sample out = s;
    const size_t plane = static_cast<size_t>(s.width) * s.height;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < s.height; ++y) {
            for (int x = 0; x < s.width; ++x) {
                out.image[static_cast<size_t>(c) * plane + static_cast<size_t>(y) * s.width + x] =
                    s.image[static_cast<size_t>(c) * plane + static_cast<size_t>(y) * s.width +
                            (s.width - 1 - x)];
            }
        }
    }
    for (int y = 0; y < s.height; ++y) {
        for (int x = 0; x < s.width; ++x) {
            out.mask[static_cast<size_t>(y) * s.width + x] =
                s.mask[static_cast<size_t>(y) * s.width + (s.width - 1 - x)];
        }
    }
    return out;
}

// Resizes image (bilinear) and mask (bilinear then re-binarized at 0.5) to a
// new square-free target; the geometric transform stays identical for both.
inline Sample resize_sample(const Sample& s, int ow, int oh) {
    if (ow == s.width && oh == s.height) return s;
    Sample out;
    out.id = s.id;
    out.width = ow;
    out.height = oh;
    const size_t in_plane = static_cast<size_t>(s.width) * s.height;
    const size_t out_plane = static_cast<size_t>(ow) * oh;
    out.image.resize(3 * out_plane);
    for (int c = 0; c < 3; ++c) {
        std::vector<float> plane = aug_detail::resize_plane(
            s.image.data() + static_cast<size_t>(c) * in_plane, s.width, s.height, ow, oh);
        std::copy(plane.begin(), plane.end(),
                  out.image.begin() + static_cast<size_t>(c) * out_plane);
    }
    std::vector<float> m =
        aug_detail::resize_plane(s.mask.data(), s.width, s.height, ow, oh);
    out.mask.resize(out_plane);
    for (size_t i = 0; i < out_plane; ++i) out.mask[i] = m[i] >= 0.5f ? 1.0f : 0.0f;
    return out;
}

inline Sample crop_sample(const Sample& s, int ox, int oy, int cw, int ch) {
    require_shape(ox >= 0 && oy >= 0 && ox + cw <= s.width && oy + ch <= s.height,
                  "crop_sample: window out of bounds");
    Sample out;
    out.id = s.id;
    out.width = cw;
    out.height = ch;
    const size_t in_plane = static_cast<size_t>(s.width) * s.height;
    const size_t out_plane = static_cast<size_t>(cw) * ch;
    out.image.resize(3 * out_plane);
    out.mask.resize(out_plane);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < ch; ++y) {
            const float* src =
                s.image.data() + static_cast<size_t>(c) * in_plane +
                static_cast<size_t>(oy + y) * s.width + ox;
            float* dst = out.image.data() + static_cast<size_t>(c) * out_plane +
                         static_cast<size_t>(y) * cw;
            std::copy(src, src + cw, dst);
        }
    }
    for (int y = 0; y < ch; ++y) {
        const float* src = s.mask.data() + static_cast<size_t>(oy + y) * s.width + ox;
        std::copy(src, src + cw, out.mask.data() + static_cast<size_t>(y) * cw);
    }
    return out;
}

// Multi-scale training size: base scaled and rounded to a multiple of 32.
inline int jittered_size(int base, double scale) {
    const int units = static_cast<int>(std::llround(base * scale / 32.0));
    return std::max(32, 32 * units);
}

// Training-time augmentation: random horizontal flip, random crop to
// crop_ratio of the area (resized back), then resize to the batch target
// size. The mask follows every geometric step and is re-binarized.
inline Sample augment(const Sample& s, Rng& rng, const AugmentConfig& cfg, int target_size) {
    Sample out = s;
    if (rng.bernoulli(cfg.flip_prob)) out = flip_horizontal(out);
    const int cw = std::max(1, static_cast<int>(std::lround(out.width * cfg.crop_ratio)));
    const int ch = std::max(1, static_cast<int>(std::lround(out.height * cfg.crop_ratio)));
    if (cw < out.width || ch < out.height) {
        const int ox = static_cast<int>(rng.uniform_int(out.width - cw + 1));
        const int oy = static_cast<int>(rng.uniform_int(out.height - ch + 1));
        const int w0 = out.width, h0 = out.height;
        out = resize_sample(crop_sample(out, ox, oy, cw, ch), w0, h0);
    }
    return resize_sample(out, target_size, target_size);
}

}  // namespace sodboost
