#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sodboost/data/netpbm.hpp"
#include "sodboost/tensor.hpp"

namespace sodboost {

// Directory-backed image/mask corpus:
//   <root>/images/<stem>.ppm, <root>/masks/<stem>.pgm, <root>/manifest.txt
struct DatasetManifest {
    std::string root;
    std::vector<std::string> stems;

    int size() const { return static_cast<int>(stems.size()); }

    std::string image_path(int i) const {
        return (std::filesystem::path(root) / "images" / (stems[static_cast<size_t>(i)] + ".ppm"))
            .string();
    }
    std::string mask_path(int i) const {
        return (std::filesystem::path(root) / "masks" / (stems[static_cast<size_t>(i)] + ".pgm"))
            .string();
    }
};

inline DatasetManifest load_manifest(const std::string& root) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = fs::path(root) / "manifest.txt";
    std::ifstream in(manifest_path);
    if (!in) throw IoError(manifest_path.string() + ": cannot open manifest");
    DatasetManifest m;
    m.root = root;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        m.stems.push_back(line);
    }
    require(!m.stems.empty(), root + ": manifest lists no samples");
    for (int i = 0; i < m.size(); ++i) {
        if (!fs::exists(m.image_path(i))) throw IoError(m.image_path(i) + ": missing image");
        if (!fs::exists(m.mask_path(i))) throw IoError(m.mask_path(i) + ": missing mask");
    }
    return m;
}

inline Sample load_sample(const DatasetManifest& m, int index) {
    require(index >= 0 && index < m.size(), "load_sample: index out of range");
    return sample_from_images(m.stems[static_cast<size_t>(index)],
                              read_pnm(m.image_path(index)), read_pnm(m.mask_path(index)));
}

// Stacks equally sized samples into NCHW image and N1HW mask tensors.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> to_batch(const std::vector<Sample>& samples) {
    require(!samples.empty(), "to_batch: empty batch");
    const int H = samples[0].height, W = samples[0].width;
    for (const auto& s : samples) {
        require_shape(s.height == H && s.width == W, "to_batch: mixed sample sizes");
    }
    const int B = static_cast<int>(samples.size());
    const size_t plane = static_cast<size_t>(H) * W;
    std::vector<T> images(static_cast<size_t>(B) * 3 * plane);
    std::vector<T> masks(static_cast<size_t>(B) * plane);
    for (int b = 0; b < B; ++b) {
        const Sample& s = samples[static_cast<size_t>(b)];
        for (size_t i = 0; i < 3 * plane; ++i) {
            images[static_cast<size_t>(b) * 3 * plane + i] = static_cast<T>(s.image[i]);
        }
        for (size_t i = 0; i < plane; ++i) {
            masks[static_cast<size_t>(b) * plane + i] = static_cast<T>(s.mask[i]);
        }
    }
    return {Tensor<T>::from(Shape{B, 3, H, W}, std::move(images)),
            Tensor<T>::from(Shape{B, 1, H, W}, std::move(masks))};
}

}  // namespace sodboost
