#pragma once

#include <cstdint>
#include <vector>

namespace stvedit {

enum class Space { pixel, latent };
enum class SliceAxis { XY, YT, XT };
enum class BlendMode { mean, independent };

// The (x, y, t) space-time tensor. Layout is frame-major (t, y, x, c) so XY
// slicing is a contiguous copy; YT/XT slicing pays the stride cost. Treated
// as an immutable value after construction wherever it is shared.
struct VideoVolume {
    int n_frames = 0;
    int height = 0;
    int width = 0;
    int channels = 0;
    Space space = Space::pixel;
    std::vector<float> data; // (t, y, x, c)

    VideoVolume() = default;
    VideoVolume(int t, int h, int w, int c, Space s = Space::pixel);

    size_t frame_size() const { return static_cast<size_t>(height) * width * channels; }
    size_t size() const { return static_cast<size_t>(n_frames) * frame_size(); }

    float& at(int t, int y, int x, int c) {
        return data[((static_cast<size_t>(t) * height + y) * width + x) * channels + c];
    }
    float at(int t, int y, int x, int c) const {
        return data[((static_cast<size_t>(t) * height + y) * width + x) * channels + c];
    }
    float* frame(int t) { return data.data() + static_cast<size_t>(t) * frame_size(); }
    const float* frame(int t) const {
        return data.data() + static_cast<size_t>(t) * frame_size();
    }

    bool same_geometry(const VideoVolume& o) const {
        return n_frames == o.n_frames && height == o.height && width == o.width &&
               channels == o.channels;
    }

    // Throws std::invalid_argument on non-finite values, or on pixel-space
    // values outside [-1, 1].
    void validate() const;
};

// One plane of the volume. Shape by axis:
//   XY: (height, width, c)   YT: (n_frames, height, c)   XT: (n_frames, width, c)
struct Slice2D {
    int rows = 0;
    int cols = 0;
    int channels = 0;
    SliceAxis axis = SliceAxis::XY;
    int index = 0; // position along the remaining axis
    std::vector<float> data; // (row, col, c)

    Slice2D() = default;
    Slice2D(int r, int c_, int ch, SliceAxis a = SliceAxis::XY, int idx = 0);

    size_t size() const { return static_cast<size_t>(rows) * cols * channels; }
    float& at(int r, int c_, int ch) {
        return data[(static_cast<size_t>(r) * cols + c_) * channels + ch];
    }
    float at(int r, int c_, int ch) const {
        return data[(static_cast<size_t>(r) * cols + c_) * channels + ch];
    }
};

// Overlapping cover of [0, n_frames) by equal-length segments.
struct Segment {
    int start = 0;
    int length = 0;
};

struct SegmentPlan {
    std::vector<Segment> segments;
    BlendMode weights_mode = BlendMode::mean;
    int n_frames = 0;
};

// Extract one plane. Throws std::out_of_range when index exceeds the extent
// of the sliced axis.
Slice2D slice(const VideoVolume& vol, SliceAxis axis, int index);

// Inverse of slice: rebuild a volume from the complete set of planes along
// one axis. dims = (n_frames, height, width, channels). Slices may arrive in
// any order; each position must be present exactly once.
VideoVolume assemble(const std::vector<Slice2D>& slices, SliceAxis axis,
                     int n_frames, int height, int width, int channels,
                     Space space = Space::latent);

// Seeded bijective rearrangement of the spatial positions of an XY slice
// (channels travel together). Same seed, same permutation.
Slice2D permute_pixels(const Slice2D& frame, uint64_t seed);

// Minimal number of seg_len-long segments covering [0, n_frames), first
// starting at 0, last ending at n_frames, starts spread as evenly as
// possible. Requires n_frames >= seg_len.
SegmentPlan segment_plan(int n_frames, int seg_len = 64,
                         BlendMode mode = BlendMode::mean);

// Per-frame weight of `seg` at absolute frame `f` before normalization:
// a tent over the segment, so overlaps get linear cross-fade ramps.
// Exposed for tests.
double segment_raw_weight(const Segment& seg, int f);

// Combine per-segment volumes into one full-length volume. Frames covered by
// a single segment pass through unchanged. In overlaps, mode `mean`
// normalizes weights to sum 1; mode `independent` rescales the same ramp so
// the squares sum to 1, preserving variance of independent noise inputs.
VideoVolume blend_segments(const std::vector<VideoVolume>& per_segment,
                           const SegmentPlan& plan);

} // namespace stvedit
