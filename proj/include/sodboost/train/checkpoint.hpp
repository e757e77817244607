#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include "sodboost/nn/layers.hpp"

namespace sodboost {

// Checkpoint payload beyond the parameter tables.
struct TrainerState {
    uint64_t step = 0;
    std::array<uint64_t, 4> data_rng{};
    std::array<uint64_t, 4> branch_rng{};
};

namespace ckpt_detail {

constexpr char kMagic[8] = {'S', 'O', 'D', 'B', 'C', 'K', 'P', '1'};
constexpr uint32_t kVersion = 1;

// Record kinds in the name-indexed table.
enum Kind : uint8_t { kParamValue = 0, kParamVelocity = 1, kBuffer = 2 };

template <typename V>
void write_pod(std::ostream& out, V v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& in, const std::string& path) {
    V v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (static_cast<size_t>(in.gcount()) != sizeof(V)) {
        throw IoError(path + ": truncated checkpoint");
    }
    return v;
}

template <typename T>
void write_record(std::ostream& out, uint8_t kind, const std::string& name,
                  const Shape& shape, const std::vector<T>& data) {
    write_pod<uint8_t>(out, kind);
    write_pod<uint16_t>(out, static_cast<uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint8_t>(out, static_cast<uint8_t>(shape.size()));
    for (int d : shape) write_pod<uint32_t>(out, static_cast<uint32_t>(d));
    for (const T v : data) write_pod<float>(out, static_cast<float>(v));
}

}  // namespace ckpt_detail

// Versioned little-endian binary checkpoint: header (magic, version, step,
// generator states) followed by a name-indexed table of 32-bit arrays for
// parameter values, optimizer velocities, and normalization buffers.
// save -> load -> save reproduces the file byte for byte.
template <typename T>
void save_checkpoint(const std::string& path, const ModuleItems<T>& items,
                     const TrainerState& state) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path + ": cannot open for writing");
    out.write(ckpt_detail::kMagic, sizeof(ckpt_detail::kMagic));
    ckpt_detail::write_pod<uint32_t>(out, ckpt_detail::kVersion);
    ckpt_detail::write_pod<uint64_t>(out, state.step);
    for (uint64_t w : state.data_rng) ckpt_detail::write_pod<uint64_t>(out, w);
    for (uint64_t w : state.branch_rng) ckpt_detail::write_pod<uint64_t>(out, w);
    const uint32_t records = static_cast<uint32_t>(items.params.size() * 2 +
                                                   items.buffers.size());
    ckpt_detail::write_pod<uint32_t>(out, records);
    for (const auto& [name, p] : items.params) {
        ckpt_detail::write_record(out, ckpt_detail::kParamValue, name, p->shape, p->value);
        ckpt_detail::write_record(out, ckpt_detail::kParamVelocity, name, p->shape,
                                  p->velocity);
    }
    for (const auto& [name, b] : items.buffers) {
        ckpt_detail::write_record(out, ckpt_detail::kBuffer, name,
                                  Shape{static_cast<int>(b->size())}, *b);
    }
    if (!out) throw IoError(path + ": write failed");
}

template <typename T>
TrainerState load_checkpoint(const std::string& path, ModuleItems<T>& items) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open checkpoint");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (static_cast<size_t>(in.gcount()) != sizeof(magic) ||
        std::memcmp(magic, ckpt_detail::kMagic, sizeof(magic)) != 0) {
        throw IoError(path + ": not a checkpoint file (bad magic)");
    }
    const uint32_t version = ckpt_detail::read_pod<uint32_t>(in, path);
    if (version != ckpt_detail::kVersion) {
        throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    TrainerState state;
    state.step = ckpt_detail::read_pod<uint64_t>(in, path);
    for (auto& w : state.data_rng) w = ckpt_detail::read_pod<uint64_t>(in, path);
    for (auto& w : state.branch_rng) w = ckpt_detail::read_pod<uint64_t>(in, path);

    std::map<std::string, Parameter<T>*> params;
    std::map<std::string, std::vector<T>*> buffers;
    for (const auto& [name, p] : items.params) params[name] = p;
    for (const auto& [name, b] : items.buffers) buffers[name] = b;
    std::map<std::string, int> filled;

    const uint32_t records = ckpt_detail::read_pod<uint32_t>(in, path);
    for (uint32_t r = 0; r < records; ++r) {
        const uint8_t kind = ckpt_detail::read_pod<uint8_t>(in, path);
        const uint16_t name_len = ckpt_detail::read_pod<uint16_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (static_cast<size_t>(in.gcount()) != name_len) {
            throw IoError(path + ": truncated checkpoint");
        }
        const uint8_t rank = ckpt_detail::read_pod<uint8_t>(in, path);
        Shape shape(rank);
        for (auto& d : shape) {
            d = static_cast<int>(ckpt_detail::read_pod<uint32_t>(in, path));
        }
        const int64_t n = numel(shape);
        std::vector<T>* target = nullptr;
        if (kind == ckpt_detail::kParamValue || kind == ckpt_detail::kParamVelocity) {
            auto it = params.find(name);
            if (it == params.end()) {
                throw IoError(path + ": unknown parameter name '" + name + "'");
            }
            if (it->second->shape != shape) {
                throw IoError(path + ": shape mismatch for '" + name + "', expected " +
                              shape_str(it->second->shape) + " got " + shape_str(shape));
            }
            target = kind == ckpt_detail::kParamValue ? &it->second->value
                                                      : &it->second->velocity;
        } else if (kind == ckpt_detail::kBuffer) {
            auto it = buffers.find(name);
            if (it == buffers.end()) {
                throw IoError(path + ": unknown buffer name '" + name + "'");
            }
            if (static_cast<int64_t>(it->second->size()) != n) {
                throw IoError(path + ": size mismatch for buffer '" + name + "'");
            }
            target = it->second;
        } else {
            throw IoError(path + ": unknown record kind " + std::to_string(kind));
        }
        for (int64_t i = 0; i < n; ++i) {
            (*target)[static_cast<size_t>(i)] =
                static_cast<T>(ckpt_detail::read_pod<float>(in, path));
        }
        ++filled[name + "#" + std::to_string(kind)];
    }
    const size_t expected = items.params.size() * 2 + items.buffers.size();
    if (filled.size() != expected) {
        throw IoError(path + ": checkpoint is missing records (" +
                      std::to_string(filled.size()) + " of " + std::to_string(expected) + ")");
    }
    return state;
}

}  // namespace sodboost
