#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sodboost/data/netpbm.hpp"
#include "sodboost/rng.hpp"

namespace sodboost {

namespace synth_detail {

struct BlobShape {
    bool ellipse = true;
    double cx = 0, cy = 0;     // center, pixels
    double ax = 1, ay = 1;     // half extents
    double rot_cos = 1, rot_sin = 0;
    double corner = 0;         // rounded-rect corner radius
    float color[3] = {0, 0, 0};

    bool contains(double px, double py) const {
        const double dx = px - cx;
        const double dy = py - cy;
        const double u = rot_cos * dx + rot_sin * dy;
        const double v = -rot_sin * dx + rot_cos * dy;
        if (ellipse) {
            const double nu = u / ax;
            const double nv = v / ay;
            return nu * nu + nv * nv <= 1.0;
        }
        const double qx = std::abs(u) - (ax - corner);
        const double qy = std::abs(v) - (ay - corner);
        if (qx <= 0.0 && qy <= 0.0) return std::abs(u) <= ax && std::abs(v) <= ay;
        if (qx > 0.0 && qy > 0.0) return qx * qx + qy * qy <= corner * corner;
        return qx <= 0.0 ? std::abs(v) <= ay : std::abs(u) <= ax;
    }
};

inline BlobShape random_shape(Rng& rng, int size, const float bg_base[3]) {
    BlobShape s;
    s.ellipse = rng.bernoulli(0.5);
    s.cx = rng.uniform(0.2, 0.8) * size;
    s.cy = rng.uniform(0.2, 0.8) * size;
    s.ax = rng.uniform(0.10, 0.30) * size;
    s.ay = rng.uniform(0.10, 0.30) * size;
    const double theta = rng.uniform(0.0, 3.14159265358979323846);
    s.rot_cos = std::cos(theta);
    s.rot_sin = std::sin(theta);
    if (!s.ellipse) s.corner = rng.uniform(0.1, 0.5) * std::min(s.ax, s.ay);
    // Keep the mean color clearly separated from the background base.
    for (;;) {
        double d = 0.0;
        for (int c = 0; c < 3; ++c) {
            s.color[c] = static_cast<float>(rng.uniform(0.05, 0.95));
            d = std::max(d, std::abs(static_cast<double>(s.color[c]) - bg_base[c]));
        }
        if (d >= 0.3) break;
    }
    return s;
}

}  // namespace synth_detail

// Deterministic synthetic sample: a low-frequency textured background plus
// 1-3 smooth foreground blobs with distinct mean colors; the mask is the
// exact shape union. Foreground coverage is kept in [0.05, 0.6].
inline Sample synth_sample(Rng& rng, int size, const std::string& id) {
    require(size >= 8, "synthetic sample size too small");
    Sample s;
    s.id = id;
    s.width = s.height = size;
    const size_t plane = static_cast<size_t>(size) * size;
    s.image.assign(3 * plane, 0.0f);
    s.mask.assign(plane, 0.0f);

    float base[3];
    double gx[3], gy[3], amp[3], freq[3], phase[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = static_cast<float>(rng.uniform(0.25, 0.75));
        gx[c] = rng.uniform(-0.25, 0.25);
        gy[c] = rng.uniform(-0.25, 0.25);
        amp[c] = rng.uniform(0.0, 0.06);
        freq[c] = rng.uniform(2.0, 5.0);
        phase[c] = rng.uniform(0.0, 6.283185307179586);
    }

    // Resample the blob layout until the coverage constraint holds.
    std::vector<synth_detail::BlobShape> shapes;
    const double lo = 0.05 * static_cast<double>(plane);
    const double hi = 0.60 * static_cast<double>(plane);
    for (int attempt = 0;; ++attempt) {
        require(attempt < 1000, "synthetic generator failed to satisfy coverage bounds");
        shapes.clear();
        const int count = 1 + static_cast<int>(rng.uniform_int(3));
        for (int i = 0; i < count; ++i) {
            shapes.push_back(synth_detail::random_shape(rng, size, base));
        }
        int64_t covered = 0;
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                for (const auto& sh : shapes) {
                    if (sh.contains(px, py)) {
                        ++covered;
                        break;
                    }
                }
            }
        }
        if (covered >= lo && covered <= hi) break;
    }

    const double noise = 0.02;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            const double nx = px / size - 0.5, ny = py / size - 0.5;
            const size_t idx = static_cast<size_t>(y) * size + x;
            const synth_detail::BlobShape* top = nullptr;
            for (const auto& sh : shapes) {
                if (sh.contains(px, py)) top = &sh;  // later shapes draw on top
            }
            for (int c = 0; c < 3; ++c) {
                double v;
                if (top) {
                    v = top->color[c] + 0.1 * (nx + ny) * (c == 0 ? 1 : -1);
                } else {
                    v = base[c] + gx[c] * nx + gy[c] * ny +
                        amp[c] * std::sin(freq[c] * (nx + ny) * 3.14159265358979323846 +
                                          phase[c]);
                }
                v += rng.normal(0.0, noise);
                s.image[static_cast<size_t>(c) * plane + idx] =
                    static_cast<float>(std::min(std::max(v, 0.0), 1.0));
            }
            if (top) s.mask[idx] = 1.0f;
        }
    }
    return s;
}

// Writes n samples under root/{images,masks} plus a manifest of stems.
// Identical (n, size, seed) inputs produce a byte-identical corpus.
inline void generate_synthetic(const std::string& root, int n, int size, uint64_t seed) {
    require(n > 0, "generate_synthetic: sample count must be positive");
    require(size % 32 == 0, "generate_synthetic: size must be a multiple of 32");
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(root) / "images");
    fs::create_directories(fs::path(root) / "masks");

    Rng base(seed);
    std::ofstream manifest(fs::path(root) / "manifest.txt");
    if (!manifest) throw IoError(root + ": cannot write manifest");
    for (int i = 0; i < n; ++i) {
        char stem[32];
        std::snprintf(stem, sizeof(stem), "sample_%05d", i);
        Rng rng = base.fork(static_cast<uint64_t>(i));
        Sample s = synth_sample(rng, size, stem);
        write_pnm((fs::path(root) / "images" / (std::string(stem) + ".ppm")).string(),
                  image_to_u8(s));
        write_pnm((fs::path(root) / "masks" / (std::string(stem) + ".pgm")).string(),
                  mask_to_u8(s.mask, s.width, s.height));
        manifest << stem << "\n";
    }
    if (!manifest) throw IoError(root + ": manifest write failed");
}

}  // namespace sodboost
