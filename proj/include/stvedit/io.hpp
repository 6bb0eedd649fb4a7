#pragma once

#include "stvedit/stvolume.hpp"

#include <string>

namespace stvedit {

// Frame-sequence directory: frame_%05d.ppm, binary PPM (P6), 8-bit.
// Byte b maps to b/127.5 - 1; writing rounds and clamps to [0, 255].
// Requires 3 channels.
VideoVolume load_ppm_dir(const std::string& dir);
void save_ppm_dir(const VideoVolume& vol, const std::string& dir);

// Raw tensor container "STV1": magic bytes, four u32 LE dims
// (n_frames, height, width, channels), then f32 LE data in (t, y, x, c) order.
VideoVolume load_stv1(const std::string& path);
void save_stv1(const VideoVolume& vol, const std::string& path);

enum class VideoFormat { ppm_dir, stv1 };

// A directory is treated as a PPM frame sequence, a file as STV1.
VideoVolume load_video(const std::string& path, VideoFormat* detected = nullptr);
void save_video(const VideoVolume& vol, const std::string& path, VideoFormat format);

} // namespace stvedit
