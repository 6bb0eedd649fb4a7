#include "stvedit/stvolume.hpp"

#include "stvedit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace stvedit {

VideoVolume::VideoVolume(int t, int h, int w, int c, Space s)
    : n_frames(t), height(h), width(w), channels(c), space(s) {
    if (t < 1 || h < 1 || w < 1 || c < 1)
        throw std::invalid_argument("VideoVolume: all dims must be >= 1");
    data.assign(size(), 0.0f);
}

void VideoVolume::validate() const {
    for (float v : data) {
        if (!std::isfinite(v))
            throw std::invalid_argument("VideoVolume: non-finite value");
        if (space == Space::pixel && (v < -1.0f || v > 1.0f))
            throw std::invalid_argument("VideoVolume: pixel value outside [-1, 1]");
    }
}

Slice2D::Slice2D(int r, int c_, int ch, SliceAxis a, int idx)
    : rows(r), cols(c_), channels(ch), axis(a), index(idx) {
    data.assign(size(), 0.0f);
}

Slice2D slice(const VideoVolume& vol, SliceAxis axis, int index) {
    const int C = vol.channels;
    switch (axis) {
        case SliceAxis::XY: {
            if (index < 0 || index >= vol.n_frames)
                throw std::out_of_range("slice: frame index " + std::to_string(index) +
                                        " out of range [0," + std::to_string(vol.n_frames) + ")");
            Slice2D s(vol.height, vol.width, C, axis, index);
            const float* src = vol.frame(index);
            std::copy(src, src + vol.frame_size(), s.data.begin());
            return s;
        }
        case SliceAxis::YT: {
            if (index < 0 || index >= vol.width)
                throw std::out_of_range("slice: x index " + std::to_string(index) +
                                        " out of range [0," + std::to_string(vol.width) + ")");
            Slice2D s(vol.n_frames, vol.height, C, axis, index);
            for (int t = 0; t < vol.n_frames; ++t)
                for (int y = 0; y < vol.height; ++y)
                    for (int c = 0; c < C; ++c)
                        s.at(t, y, c) = vol.at(t, y, index, c);
            return s;
        }
        case SliceAxis::XT: {
            if (index < 0 || index >= vol.height)
                throw std::out_of_range("slice: y index " + std::to_string(index) +
                                        " out of range [0," + std::to_string(vol.height) + ")");
            Slice2D s(vol.n_frames, vol.width, C, axis, index);
            for (int t = 0; t < vol.n_frames; ++t)
                for (int x = 0; x < vol.width; ++x)
                    for (int c = 0; c < C; ++c)
                        s.at(t, x, c) = vol.at(t, index, x, c);
            return s;
        }
    }
    throw std::invalid_argument("slice: bad axis");
}

VideoVolume assemble(const std::vector<Slice2D>& slices, SliceAxis axis,
                     int n_frames, int height, int width, int channels, Space space) {
    const int extent = axis == SliceAxis::XY ? n_frames
                     : axis == SliceAxis::YT ? width
                                             : height;
    if (static_cast<int>(slices.size()) != extent)
        throw std::invalid_argument("assemble: expected " + std::to_string(extent) +
                                    " slices, got " + std::to_string(slices.size()));

    const int want_rows = axis == SliceAxis::XY ? height : n_frames;
    const int want_cols = axis == SliceAxis::XY ? width
                        : axis == SliceAxis::YT ? height
                                                : width;

    VideoVolume vol(n_frames, height, width, channels, space);
    std::vector<bool> seen(extent, false);
    for (const Slice2D& s : slices) {
        if (s.axis != axis)
            throw std::invalid_argument("assemble: slice axis mismatch");
        if (s.rows != want_rows || s.cols != want_cols || s.channels != channels)
            throw std::invalid_argument("assemble: slice shape mismatch");
        if (s.index < 0 || s.index >= extent || seen[s.index])
            throw std::invalid_argument("assemble: bad or duplicate slice index " +
                                        std::to_string(s.index));
        seen[s.index] = true;
        switch (axis) {
            case SliceAxis::XY: {
                float* dst = vol.frame(s.index);
                std::copy(s.data.begin(), s.data.end(), dst);
                break;
            }
            case SliceAxis::YT:
                for (int t = 0; t < n_frames; ++t)
                    for (int y = 0; y < height; ++y)
                        for (int c = 0; c < channels; ++c)
                            vol.at(t, y, s.index, c) = s.at(t, y, c);
                break;
            case SliceAxis::XT:
                for (int t = 0; t < n_frames; ++t)
                    for (int x = 0; x < width; ++x)
                        for (int c = 0; c < channels; ++c)
                            vol.at(t, s.index, x, c) = s.at(t, x, c);
                break;
        }
    }
    for (int i = 0; i < extent; ++i)
        if (!seen[i])
            throw std::invalid_argument("assemble: missing slice index " + std::to_string(i));
    return vol;
}

Slice2D permute_pixels(const Slice2D& frame, uint64_t seed) {
    if (frame.axis != SliceAxis::XY)
        throw std::invalid_argument("permute_pixels: expects an XY slice");
    const size_t n = static_cast<size_t>(frame.rows) * frame.cols;
    std::vector<uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    Rng rng(mix_seed(seed, 0x9E3Dull));
    for (size_t i = n - 1; i > 0; --i) {
        size_t j = rng.below(i + 1);
        std::swap(perm[i], perm[j]);
    }
    Slice2D out(frame.rows, frame.cols, frame.channels, frame.axis, frame.index);
    const int C = frame.channels;
    for (size_t p = 0; p < n; ++p)
        for (int c = 0; c < C; ++c)
            out.data[p * C + c] = frame.data[static_cast<size_t>(perm[p]) * C + c];
    return out;
}

SegmentPlan segment_plan(int n_frames, int seg_len, BlendMode mode) {
    if (seg_len < 2)
        throw std::invalid_argument("segment_plan: seg_len must be >= 2");
    if (n_frames < seg_len)
        throw std::invalid_argument("segment_plan: n_frames " + std::to_string(n_frames) +
                                    " < seg_len " + std::to_string(seg_len) +
                                    " (interpolate first)");
    SegmentPlan plan;
    plan.weights_mode = mode;
    plan.n_frames = n_frames;
    if (n_frames == seg_len) {
        plan.segments.push_back({0, seg_len});
        return plan;
    }
    // minimal count with >= 1 frame of overlap between consecutive segments,
    // starts spread as evenly as possible
    const int span = n_frames - seg_len;
    const int k = 1 + (span + seg_len - 2) / (seg_len - 1);
    for (int i = 0; i < k; ++i) {
        int start = static_cast<int>(std::llround(static_cast<double>(i) * span / (k - 1)));
        plan.segments.push_back({start, seg_len});
    }
    return plan;
}

double segment_raw_weight(const Segment& seg, int f) {
    // tent: 1 at one frame past each edge, peaking mid-segment; in a two-way
    // overlap of length L this yields the linear ramps (j+1)/(L+1)
    const int from_left = f - seg.start + 1;
    const int from_right = seg.start + seg.length - f;
    return static_cast<double>(std::min(from_left, from_right));
}

VideoVolume blend_segments(const std::vector<VideoVolume>& per_segment,
                           const SegmentPlan& plan) {
    if (per_segment.size() != plan.segments.size())
        throw std::invalid_argument("blend_segments: prediction/plan count mismatch");
    if (per_segment.empty())
        throw std::invalid_argument("blend_segments: empty plan");
    const VideoVolume& first = per_segment[0];
    for (size_t i = 0; i < per_segment.size(); ++i) {
        if (per_segment[i].n_frames != plan.segments[i].length)
            throw std::invalid_argument("blend_segments: segment " + std::to_string(i) +
                                        " frame count does not match plan");
        if (per_segment[i].height != first.height || per_segment[i].width != first.width ||
            per_segment[i].channels != first.channels)
            throw std::invalid_argument("blend_segments: spatial dims differ across segments");
    }

    VideoVolume out(plan.n_frames, first.height, first.width, first.channels, first.space);
    const size_t fs = out.frame_size();
    std::vector<std::pair<size_t, double>> cover; // (segment idx, raw weight)
    for (int f = 0; f < plan.n_frames; ++f) {
        cover.clear();
        for (size_t s = 0; s < plan.segments.size(); ++s) {
            const Segment& seg = plan.segments[s];
            if (f >= seg.start && f < seg.start + seg.length)
                cover.push_back({s, segment_raw_weight(seg, f)});
        }
        if (cover.empty())
            throw std::invalid_argument("blend_segments: frame " + std::to_string(f) +
                                        " not covered by any segment");
        double norm = 0.0;
        for (auto& [s, w] : cover)
            norm += plan.weights_mode == BlendMode::mean ? w : w * w;
        if (plan.weights_mode == BlendMode::independent)
            norm = std::sqrt(norm);
        float* dst = out.frame(f);
        if (cover.size() == 1) {
            // single coverage is an exact pass-through
            const float* src = per_segment[cover[0].first].frame(
                f - plan.segments[cover[0].first].start);
            std::copy(src, src + fs, dst);
            continue;
        }
        // accumulate in double so identical inputs with partition-of-unity
        // weights come back bit-exact
        std::vector<double> acc(fs, 0.0);
        for (auto& [s, w] : cover) {
            const double wd = w / norm;
            const float* src = per_segment[s].frame(f - plan.segments[s].start);
            for (size_t i = 0; i < fs; ++i)
                acc[i] += wd * src[i];
        }
        for (size_t i = 0; i < fs; ++i)
            dst[i] = static_cast<float>(acc[i]);
    }
    return out;
}

} // namespace stvedit
