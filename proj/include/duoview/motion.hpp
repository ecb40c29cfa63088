#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "duoview/core.hpp"
#include "duoview/rng.hpp"

namespace duoview {

struct VibeParams {
    int samples = 20;          // N: bank size per pixel
    double radius_8bit = 20.0; // R, specified on the 8-bit scale
    int min_matches = 2;       // #min
    int subsample = 16;        // phi: update probability 1/phi

    void validate() const {
        if (samples < 1 || min_matches < 1 || samples < min_matches || subsample < 1)
            throw std::invalid_argument("VibeParams: need N >= min_matches >= 1 and phi >= 1");
    }
};

struct MotionMasks {
    BinaryMask raw;      // M: pixels in motion
    BinaryMask dilated;  // M+: enlarged mask used for gating and inference
};

namespace motiondetail {

// scalar fallback for widths that do not fill whole words
inline BinaryMask dilate_scalar(const BinaryMask& raw, int r) {
    const int w = raw.width(), h = raw.height();
    BinaryMask horiz(w, h);
    std::vector<int> dist(w);
    for (int y = 0; y < h; ++y) {
        int last = -2 * w;
        for (int x = 0; x < w; ++x) {
            if (raw.at(x, y)) last = x;
            dist[x] = x - last;
        }
        last = 2 * w;
        for (int x = w - 1; x >= 0; --x) {
            if (raw.at(x, y)) last = x;
            dist[x] = std::min(dist[x], last - x);
            if (dist[x] <= r) horiz.set(x, y);
        }
    }
    BinaryMask out(w, h);
    std::vector<int> lastv(w, -2 * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (horiz.at(x, y)) lastv[x] = y;
            if (y - lastv[x] <= r) out.set(x, y);
        }
    std::fill(lastv.begin(), lastv.end(), 2 * h);
    for (int y = h - 1; y >= 0; --y)
        for (int x = 0; x < w; ++x) {
            if (horiz.at(x, y)) lastv[x] = y;
            if (lastv[x] - y <= r && !out.at(x, y)) out.set(x, y);
        }
    return out;
}

// word-parallel path for word-aligned rows
inline BinaryMask dilate_words(const BinaryMask& raw, int r) {
    const int w = raw.width(), h = raw.height();
    const int nw = w / 64;
    BinaryMask horiz(w, h);
    std::vector<std::uint64_t> acc(static_cast<std::size_t>(nw));
    for (int y = 0; y < h; ++y) {
        const std::uint64_t* row = raw.words().data() + static_cast<std::size_t>(y) * nw;
        std::uint64_t* out = horiz.words().data() + static_cast<std::size_t>(y) * nw;
        for (int i = 0; i < nw; ++i) acc[static_cast<std::size_t>(i)] = row[i];
        for (int s = 1; s <= r; ++s) {
            for (int i = 0; i < nw; ++i) {
                std::uint64_t left = row[i] << s;
                if (i > 0) left |= row[i - 1] >> (64 - s);
                std::uint64_t right = row[i] >> s;
                if (i + 1 < nw) right |= row[i + 1] << (64 - s);
                acc[static_cast<std::size_t>(i)] |= left | right;
            }
        }
        for (int i = 0; i < nw; ++i) out[i] = acc[static_cast<std::size_t>(i)];
    }
    BinaryMask out(w, h);
    for (int y = 0; y < h; ++y) {
        std::uint64_t* dst = out.words().data() + static_cast<std::size_t>(y) * nw;
        int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
        for (int yy = y0; yy <= y1; ++yy) {
            const std::uint64_t* src = horiz.words().data() + static_cast<std::size_t>(yy) * nw;
            for (int i = 0; i < nw; ++i) dst[i] |= src[i];
        }
    }
    return out;
}

}  // namespace motiondetail

/// Square-kernel Minkowski dilation, kernel truncated at the borders.
inline BinaryMask dilate(const BinaryMask& raw, int kernel) {
    if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("dilate: kernel must be odd");
    if (kernel == 1) return raw;
    const int r = kernel / 2;
    if (raw.width() % 64 == 0 && r < 64) return motiondetail::dilate_words(raw, r);
    return motiondetail::dilate_scalar(raw, r);
}

/// ViBe background model: N intensity samples per pixel; a pixel is
/// background when at least min_matches samples lie within the match radius
/// of its current value. Background pixels stochastically refresh their own
/// bank and one neighbor's. Samples are kept on the 8-bit scale, which is
/// also the scale the radius is specified on. Single-writer: one owner calls
/// segment_update per frame, in frame order.
class VibeModel {
public:
    VibeModel() = default;

    /// Fills each pixel's bank with samples drawn from its 8-neighborhood
    /// (self included) in the first frame.
    VibeModel(const Frame& first_frame, const VibeParams& params, Pcg32& rng)
        : params_(params) {
        params_.validate();
        if (first_frame.width < 3 || first_frame.height < 3)
            throw std::invalid_argument("VibeModel: frame must be at least 3x3");
        width_ = first_frame.width;
        height_ = first_frame.height;
        const int n = params_.samples;
        bank_.resize(static_cast<std::size_t>(width_) * height_ * n);
        for (int y = 0; y < height_; ++y) {
            for (int x = 0; x < width_; ++x) {
                std::size_t base = (static_cast<std::size_t>(y) * width_ + x) * n;
                for (int i = 0; i < n; ++i) {
                    int nx = x + static_cast<int>(rng.next_below(3)) - 1;
                    int ny = y + static_cast<int>(rng.next_below(3)) - 1;
                    nx = std::clamp(nx, 0, width_ - 1);
                    ny = std::clamp(ny, 0, height_ - 1);
                    bank_[base + i] = quantize(luma(first_frame, nx, ny));
                }
            }
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    const VibeParams& params() const { return params_; }
    const std::vector<std::uint8_t>& bank() const { return bank_; }

    /// Classifies the frame and updates the model in place. Returns the raw
    /// motion mask (foreground pixels).
    BinaryMask segment_update(const Frame& frame, Pcg32& rng) {
        check_frame(frame);
        BinaryMask fg(width_, height_);
        const int n = params_.samples;
        const int radius = static_cast<int>(params_.radius_8bit + 0.5);
        const int need = params_.min_matches;
        const std::uint32_t phi = static_cast<std::uint32_t>(params_.subsample);
        const bool flat = frame.channels == 1;
        const float* data = frame.data.data();
        std::uint8_t* bank = bank_.data();
        for (int y = 0; y < height_; ++y) {
            std::size_t row = static_cast<std::size_t>(y) * width_;
            for (int x = 0; x < width_; ++x) {
                const int v = quantize(flat ? data[row + x] : luma(frame, x, y));
                std::uint8_t* b = bank + (row + x) * n;
                int matches = 0;
                for (int i = 0; i < n; ++i) {
                    int d = v - b[i];
                    if (d <= radius && d >= -radius && ++matches >= need) break;
                }
                if (matches < need) {
                    fg.set(x, y);
                    continue;
                }
                // background: one draw decides both stochastic updates
                std::uint32_t r = rng.next_u32();
                if (r % phi == 0) b[(r >> 8) % n] = static_cast<std::uint8_t>(v);
                if ((r >> 4) % phi == 0) {
                    int nx = x + static_cast<int>((r >> 12) % 3) - 1;
                    int ny = y + static_cast<int>((r >> 16) % 3) - 1;
                    if (nx >= 0 && nx < width_ && ny >= 0 && ny < height_) {
                        bank[(static_cast<std::size_t>(ny) * width_ + nx) * n + (r >> 20) % n] =
                            static_cast<std::uint8_t>(v);
                    }
                }
            }
        }
        return fg;
    }

    /// Classification only, model untouched. Used on augmented training
    /// frames so pasted players show up as motion without polluting the
    /// live background model.
    BinaryMask segment(const Frame& frame) const {
        check_frame(frame);
        BinaryMask fg(width_, height_);
        const int n = params_.samples;
        const int radius = static_cast<int>(params_.radius_8bit + 0.5);
        const int need = params_.min_matches;
        const bool flat = frame.channels == 1;
        const float* data = frame.data.data();
        const std::uint8_t* bank = bank_.data();
        for (int y = 0; y < height_; ++y) {
            std::size_t row = static_cast<std::size_t>(y) * width_;
            for (int x = 0; x < width_; ++x) {
                const int v = quantize(flat ? data[row + x] : luma(frame, x, y));
                const std::uint8_t* b = bank + (row + x) * n;
                int matches = 0;
                for (int i = 0; i < n; ++i) {
                    int d = v - b[i];
                    if (d <= radius && d >= -radius && ++matches >= need) break;
                }
                if (matches < need) fg.set(x, y);
            }
        }
        return fg;
    }

private:
    static std::uint8_t quantize(float v) {
        float s = v * 255.0f + 0.5f;
        if (s < 0.0f) s = 0.0f;
        if (s > 255.0f) s = 255.0f;
        return static_cast<std::uint8_t>(s);
    }

    void check_frame(const Frame& frame) const {
        if (frame.width != width_ || frame.height != height_)
            throw std::invalid_argument("VibeModel: frame dimensions do not match model");
    }

    VibeParams params_;
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bank_;
};

inline VibeModel vibe_init(const Frame& first_frame, const VibeParams& params, Pcg32& rng) {
    return VibeModel(first_frame, params, rng);
}

inline MotionMasks make_motion_masks(BinaryMask raw, int dilate_kernel) {
    MotionMasks mm;
    mm.dilated = dilate(raw, dilate_kernel);
    mm.raw = std::move(raw);
    return mm;
}

}  // namespace duoview
