#include "stvedit/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace stvedit {

namespace {

void write_u32le(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw std::runtime_error("STV1: truncated header");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_f32le(std::ostream& out, const float* data, size_t n) {
    static_assert(sizeof(float) == 4);
    for (size_t i = 0; i < n; ++i) {
        uint32_t u;
        std::memcpy(&u, &data[i], 4);
        write_u32le(out, u);
    }
}

void read_f32le(std::istream& in, float* data, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        uint32_t u = read_u32le(in);
        std::memcpy(&data[i], &u, 4);
    }
}

std::string frame_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%05d.ppm", i);
    return buf;
}

// skips PPM header whitespace and '#' comments
int read_ppm_int(std::istream& in) {
    int c = in.get();
    while (c == '#' || std::isspace(c)) {
        if (c == '#')
            while (c != '\n' && c != EOF)
                c = in.get();
        c = in.get();
    }
    int v = 0;
    bool any = false;
    while (std::isdigit(c)) {
        v = v * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any)
        throw std::runtime_error("PPM: malformed header");
    return v;
}

} // namespace

VideoVolume load_ppm_dir(const std::string& dir) {
    if (!fs::is_directory(dir))
        throw std::runtime_error("load_ppm_dir: not a directory: " + dir);
    int n = 0;
    while (fs::exists(fs::path(dir) / frame_name(n)))
        ++n;
    if (n == 0)
        throw std::runtime_error("load_ppm_dir: no frame_00000.ppm in " + dir);

    VideoVolume vol;
    for (int t = 0; t < n; ++t) {
        std::ifstream in(fs::path(dir) / frame_name(t), std::ios::binary);
        if (!in)
            throw std::runtime_error("load_ppm_dir: cannot open " + frame_name(t));
        char m0 = static_cast<char>(in.get()), m1 = static_cast<char>(in.get());
        if (m0 != 'P' || m1 != '6')
            throw std::runtime_error("PPM: not a P6 file: " + frame_name(t));
        int w = read_ppm_int(in);
        int h = read_ppm_int(in);
        int maxval = read_ppm_int(in);
        if (maxval != 255)
            throw std::runtime_error("PPM: only 8-bit (maxval 255) supported");
        if (t == 0) {
            vol = VideoVolume(n, h, w, 3, Space::pixel);
        } else if (h != vol.height || w != vol.width) {
            throw std::runtime_error("load_ppm_dir: frame size mismatch at " + frame_name(t));
        }
        std::vector<unsigned char> raw(static_cast<size_t>(w) * h * 3);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!in)
            throw std::runtime_error("PPM: truncated pixel data in " + frame_name(t));
        float* dst = vol.frame(t);
        for (size_t i = 0; i < raw.size(); ++i)
            dst[i] = static_cast<float>(raw[i]) / 127.5f - 1.0f;
    }
    return vol;
}

void save_ppm_dir(const VideoVolume& vol, const std::string& dir) {
    if (vol.channels != 3)
        throw std::runtime_error("save_ppm_dir: PPM requires 3 channels, volume has " +
                                 std::to_string(vol.channels));
    fs::create_directories(dir);
    for (int t = 0; t < vol.n_frames; ++t) {
        std::ofstream out(fs::path(dir) / frame_name(t), std::ios::binary);
        if (!out)
            throw std::runtime_error("save_ppm_dir: cannot write " + frame_name(t));
        out << "P6\n" << vol.width << " " << vol.height << "\n255\n";
        const float* src = vol.frame(t);
        std::vector<unsigned char> raw(vol.frame_size());
        for (size_t i = 0; i < raw.size(); ++i) {
            float v = (src[i] + 1.0f) * 127.5f;
            raw[i] = static_cast<unsigned char>(std::clamp(std::lround(v), 0l, 255l));
        }
        out.write(reinterpret_cast<const char*>(raw.data()),
                  static_cast<std::streamsize>(raw.size()));
    }
}

VideoVolume load_stv1(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("load_stv1: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "STV1")
        throw std::runtime_error("load_stv1: bad magic in " + path);
    uint32_t t = read_u32le(in), h = read_u32le(in), w = read_u32le(in), c = read_u32le(in);
    if (t == 0 || h == 0 || w == 0 || c == 0)
        throw std::runtime_error("load_stv1: zero dimension in " + path);
    VideoVolume vol(static_cast<int>(t), static_cast<int>(h), static_cast<int>(w),
                    static_cast<int>(c), Space::latent);
    read_f32le(in, vol.data.data(), vol.size());
    if (!in)
        throw std::runtime_error("load_stv1: truncated data in " + path);
    return vol;
}

void save_stv1(const VideoVolume& vol, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("save_stv1: cannot write " + path);
    out.write("STV1", 4);
    write_u32le(out, static_cast<uint32_t>(vol.n_frames));
    write_u32le(out, static_cast<uint32_t>(vol.height));
    write_u32le(out, static_cast<uint32_t>(vol.width));
    write_u32le(out, static_cast<uint32_t>(vol.channels));
    write_f32le(out, vol.data.data(), vol.size());
}

VideoVolume load_video(const std::string& path, VideoFormat* detected) {
    if (fs::is_directory(path)) {
        if (detected)
            *detected = VideoFormat::ppm_dir;
        return load_ppm_dir(path);
    }
    if (detected)
        *detected = VideoFormat::stv1;
    return load_stv1(path);
}

void save_video(const VideoVolume& vol, const std::string& path, VideoFormat format) {
    if (format == VideoFormat::ppm_dir)
        save_ppm_dir(vol, path);
    else
        save_stv1(vol, path);
}

} // namespace stvedit
