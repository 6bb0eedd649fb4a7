#pragma once

#include <cstddef>
#include <vector>

namespace stvedit {

// Minimal row-major float matrix used by attention and the toy U-Net.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<float> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0f) {}

    float& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    float* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const float* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }
    size_t size() const { return v.size(); }
};

} // namespace stvedit
