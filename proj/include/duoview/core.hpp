#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace duoview {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }
inline double norm(Point p) { return std::hypot(p.x, p.y); }

enum class CameraId { kStudent, kTeacher };

/// Single- or three-channel image, row-major, intensities in [0,1].
struct Frame {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<float> data;
    double timestamp = 0.0;
    CameraId camera_id = CameraId::kStudent;

    Frame() = default;
    Frame(int w, int h, int c, float fill = 0.0f, double t = 0.0,
          CameraId cam = CameraId::kStudent)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill), timestamp(t), camera_id(cam) {
        if (w <= 0 || h <= 0 || (c != 1 && c != 3))
            throw std::invalid_argument("Frame: bad dimensions");
    }

    float& at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    float at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool contains(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

/// Fixed luma weights used whenever a 3-channel frame feeds a single-channel
/// consumer (ViBe, grid features).
inline float luma(const Frame& f, int x, int y) {
    if (f.channels == 1) return f.at(x, y);
    return 0.299f * f.at(x, y, 0) + 0.587f * f.at(x, y, 1) + 0.114f * f.at(x, y, 2);
}

inline Frame to_grayscale(const Frame& f) {
    if (f.channels == 1) return f;
    Frame g(f.width, f.height, 1, 0.0f, f.timestamp, f.camera_id);
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) g.at(x, y) = luma(f, x, y);
    return g;
}

/// Detection quadruplet (center, size) plus confidence.
struct Box {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
    double score = 1.0;

    double x0() const { return cx - 0.5 * w; }
    double y0() const { return cy - 0.5 * h; }
    double x1() const { return cx + 0.5 * w; }
    double y1() const { return cy + 0.5 * h; }
    double area() const { return w * h; }
    bool valid() const { return w > 0.0 && h > 0.0 && score >= 0.0 && score <= 1.0; }
};

inline Box box_from_extent(double x0, double y0, double x1, double y1, double score = 1.0) {
    return {0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0, score};
}

inline std::array<Point, 4> box_corners(const Box& b) {
    return {Point{b.x0(), b.y0()}, Point{b.x1(), b.y0()}, Point{b.x1(), b.y1()},
            Point{b.x0(), b.y1()}};
}

inline double box_iou(const Box& a, const Box& b) {
    double ix = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
    double iy = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

/// One bit per pixel, row-major.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int w, int h, bool fill = false)
        : width_(w), height_(h),
          words_((static_cast<std::size_t>(w) * h + 63) / 64, fill ? ~0ULL : 0ULL) {
        if (w <= 0 || h <= 0) throw std::invalid_argument("BinaryMask: bad dimensions");
        trim_tail();
    }

    int width() const { return width_; }
    int height() const { return height_; }

    bool at(int x, int y) const {
        std::size_t i = static_cast<std::size_t>(y) * width_ + x;
        return (words_[i >> 6] >> (i & 63)) & 1ULL;
    }
    bool at_clamped(int x, int y) const {
        if (x < 0 || x >= width_ || y < 0 || y >= height_) return false;
        return at(x, y);
    }
    void set(int x, int y, bool v = true) {
        std::size_t i = static_cast<std::size_t>(y) * width_ + x;
        if (v)
            words_[i >> 6] |= 1ULL << (i & 63);
        else
            words_[i >> 6] &= ~(1ULL << (i & 63));
    }

    std::size_t count() const {
        std::size_t n = 0;
        for (std::uint64_t w : words_) n += static_cast<std::size_t>(__builtin_popcountll(w));
        return n;
    }
    std::size_t size() const { return static_cast<std::size_t>(width_) * height_; }
    bool empty_mask() const {
        for (std::uint64_t w : words_)
            if (w) return false;
        return true;
    }

    bool same_shape(const BinaryMask& o) const {
        return width_ == o.width_ && height_ == o.height_;
    }
    /// True when every set bit of this mask is also set in `o`.
    bool subset_of(const BinaryMask& o) const {
        if (!same_shape(o)) return false;
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & ~o.words_[i]) return false;
        return true;
    }

    bool operator==(const BinaryMask& o) const {
        return width_ == o.width_ && height_ == o.height_ && words_ == o.words_;
    }

    const std::vector<std::uint64_t>& words() const { return words_; }
    std::vector<std::uint64_t>& words() { return words_; }

private:
    void trim_tail() {
        std::size_t n = size();
        if (n & 63) words_.back() &= (1ULL << (n & 63)) - 1;
    }
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint64_t> words_;
};

/// Per-pixel split of the student frame into the region also seen by the
/// teacher (OVERLAP) and the student-only remainder. Both cameras are fixed,
/// so this is computed once per run.
struct RegionPartition {
    BinaryMask overlap;

    bool in_overlap(int x, int y) const { return overlap.at_clamped(x, y); }
    std::size_t overlap_area() const { return overlap.count(); }
};

struct PolarCoord {
    double rho = 0.0;    // pixels from frame center
    double theta = 0.0;  // radians in (-pi, pi], x-right / y-down frame
};

/// Polar coordinates about the frame center. Angles follow the image axes
/// (y down), so a point above the center has theta = -pi/2.
inline PolarCoord to_polar(Point p, Point frame_center) {
    Point d = p - frame_center;
    double rho = norm(d);
    if (rho == 0.0) return {0.0, 0.0};
    return {rho, std::atan2(d.y, d.x)};
}

inline Point from_polar(const PolarCoord& pc, Point frame_center) {
    return {frame_center.x + pc.rho * std::cos(pc.theta),
            frame_center.y + pc.rho * std::sin(pc.theta)};
}

/// Smallest axis-aligned box containing all points. Degenerate extents
/// (all points on one line or coincident) yield nullopt.
inline std::optional<Box> enclosing_axis_aligned(std::span<const Point> pts,
                                                 double score = 1.0) {
    if (pts.empty()) throw std::invalid_argument("enclosing_axis_aligned: no points");
    double x0 = pts[0].x, x1 = pts[0].x, y0 = pts[0].y, y1 = pts[0].y;
    for (const Point& p : pts) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    constexpr double kMinExtent = 1e-12;
    if (x1 - x0 < kMinExtent || y1 - y0 < kMinExtent) return std::nullopt;
    return box_from_extent(x0, y0, x1, y1, score);
}

inline std::optional<Box> enclosing_axis_aligned(std::initializer_list<Point> pts,
                                                 double score = 1.0) {
    return enclosing_axis_aligned(std::span<const Point>(pts.begin(), pts.size()), score);
}

}  // namespace duoview
