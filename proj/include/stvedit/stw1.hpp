#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stvedit {

// Named-tensor container "STW1": magic, u32 LE tensor count, then per tensor
// u16 LE name length, UTF-8 name, u8 rank, u32 LE dims, f32 LE data.
// Used for toy U-Net weights, inversion records and attention-cache dumps.
struct NamedTensor {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<float> data;

    size_t count() const {
        size_t n = 1;
        for (uint32_t d : dims)
            n *= d;
        return n;
    }
};

struct TensorFile {
    std::vector<NamedTensor> tensors;

    NamedTensor* find(const std::string& name);
    const NamedTensor* find(const std::string& name) const;
    void add(std::string name, std::vector<uint32_t> dims, std::vector<float> data);
};

void save_stw1(const TensorFile& tf, const std::string& path);
TensorFile load_stw1(const std::string& path);

} // namespace stvedit
