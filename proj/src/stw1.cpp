#include "stvedit/stw1.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace stvedit {

namespace {

void put_u16le(std::ostream& out, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32le(std::ostream& out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i)
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint16_t get_u16le(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (!in)
        throw std::runtime_error("STW1: truncated file");
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw std::runtime_error("STW1: truncated file");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

} // namespace

NamedTensor* TensorFile::find(const std::string& name) {
    for (auto& t : tensors)
        if (t.name == name)
            return &t;
    return nullptr;
}

const NamedTensor* TensorFile::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name)
            return &t;
    return nullptr;
}

void TensorFile::add(std::string name, std::vector<uint32_t> dims, std::vector<float> data) {
    NamedTensor t;
    t.name = std::move(name);
    t.dims = std::move(dims);
    t.data = std::move(data);
    if (t.count() != t.data.size())
        throw std::invalid_argument("TensorFile::add: dims do not match data size for " + t.name);
    tensors.push_back(std::move(t));
}

void save_stw1(const TensorFile& tf, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("save_stw1: cannot write " + path);
    out.write("STW1", 4);
    put_u32le(out, static_cast<uint32_t>(tf.tensors.size()));
    for (const auto& t : tf.tensors) {
        if (t.name.size() > 0xffff)
            throw std::runtime_error("save_stw1: tensor name too long");
        if (t.dims.size() > 0xff)
            throw std::runtime_error("save_stw1: tensor rank too large");
        put_u16le(out, static_cast<uint16_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        out.put(static_cast<char>(t.dims.size()));
        for (uint32_t d : t.dims)
            put_u32le(out, d);
        for (float v : t.data) {
            uint32_t u;
            std::memcpy(&u, &v, 4);
            put_u32le(out, u);
        }
    }
    if (!out)
        throw std::runtime_error("save_stw1: write failed for " + path);
}

TensorFile load_stw1(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("load_stw1: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "STW1")
        throw std::runtime_error("load_stw1: bad magic in " + path);
    TensorFile tf;
    uint32_t count = get_u32le(in);
    tf.tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        uint16_t name_len = get_u16le(in);
        t.name.resize(name_len);
        in.read(t.name.data(), name_len);
        int rank = in.get();
        if (rank == EOF)
            throw std::runtime_error("STW1: truncated file");
        t.dims.resize(rank);
        for (int r = 0; r < rank; ++r)
            t.dims[r] = get_u32le(in);
        t.data.resize(t.count());
        for (size_t j = 0; j < t.data.size(); ++j) {
            uint32_t u = get_u32le(in);
            std::memcpy(&t.data[j], &u, 4);
        }
        tf.tensors.push_back(std::move(t));
    }
    return tf;
}

} // namespace stvedit
