#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "duoview/core.hpp"
#include "duoview/rng.hpp"

namespace duoview {

struct AugmentConfig {
    double alpha = 0.5;
    double beta = -0.004;  // per pixel of radius difference
    double gamma = 0.5;
    int crops_per_frame = 4;
    int max_retries = 10;
    double cluster_inflation = 1.5;  // boxes adjacent when inflated extents meet
    int crop_margin = 2;             // pixels around the cluster extent
    int blend_max_sweeps = 5000;
    double blend_tolerance = 1e-4;
    BinaryMask anchor_region;  // playable-field subset of OUTSIDE
};

/// Image crop around one cluster of boxes, with box coordinates local to the
/// patch and the polar position of the patch center in the source frame.
struct Crop {
    Frame image;
    std::vector<Box> boxes;
    PolarCoord source_center_polar;
    Point source_center;
};

/// Rescale factor alpha * exp(beta * (rho_f - rho_i)) + gamma applied to a
/// crop moved from radius rho_i to radius rho_f.
inline double scale_factor(double rho_i, double rho_f, const AugmentConfig& cfg) {
    return cfg.alpha * std::exp(cfg.beta * (rho_f - rho_i)) + cfg.gamma;
}

/// Even-odd scanline fill of a closed pixel polygon.
inline BinaryMask fill_polygon(int width, int height, std::span<const Point> vertices) {
    BinaryMask mask(width, height);
    if (vertices.size() < 3) return mask;
    std::vector<double> xs;
    for (int y = 0; y < height; ++y) {
        double sy = y + 0.5;
        xs.clear();
        for (std::size_t i = 0; i < vertices.size(); ++i) {
            Point a = vertices[i], b = vertices[(i + 1) % vertices.size()];
            if ((a.y <= sy) == (b.y <= sy)) continue;
            xs.push_back(a.x + (sy - a.y) / (b.y - a.y) * (b.x - a.x));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            int x0 = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
            int x1 = std::min(width - 1, static_cast<int>(std::floor(xs[k + 1] - 0.5)));
            for (int x = x0; x <= x1; ++x) mask.set(x, y);
        }
    }
    return mask;
}

/// Groups boxes whose inflated extents intersect, via union-find.
inline std::vector<std::vector<std::size_t>> cluster_boxes(std::span<const Box> boxes,
                                                           double inflation) {
    std::vector<std::size_t> parent(boxes.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    auto inflated = [&](const Box& b) {
        return Box{b.cx, b.cy, b.w * inflation, b.h * inflation, b.score};
    };
    for (std::size_t i = 0; i < boxes.size(); ++i)
        for (std::size_t j = i + 1; j < boxes.size(); ++j) {
            Box a = inflated(boxes[i]), b = inflated(boxes[j]);
            bool meet = a.x0() < b.x1() && b.x0() < a.x1() && a.y0() < b.y1() && b.y0() < a.y1();
            if (meet) parent[find(i)] = find(j);
        }
    std::vector<std::vector<std::size_t>> clusters;
    std::vector<long> slot(boxes.size(), -1);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        std::size_t r = find(i);
        if (slot[r] < 0) {
            slot[r] = static_cast<long>(clusters.size());
            clusters.emplace_back();
        }
        clusters[static_cast<std::size_t>(slot[r])].push_back(i);
    }
    return clusters;
}

/// Extracts cfg.crops_per_frame crops, each the extent of one randomly chosen
/// adjacency cluster plus a small margin, clipped to the frame.
inline std::vector<Crop> extract_crops(const Frame& frame, std::span<const Box> overlap_boxes,
                                       const AugmentConfig& cfg, Pcg32& rng) {
    std::vector<Crop> crops;
    if (overlap_boxes.empty() || cfg.crops_per_frame <= 0) return crops;
    auto clusters = cluster_boxes(overlap_boxes, cfg.cluster_inflation);
    Point frame_center{frame.width / 2.0, frame.height / 2.0};
    for (int k = 0; k < cfg.crops_per_frame; ++k) {
        const auto& members = clusters[rng.next_below(static_cast<std::uint32_t>(clusters.size()))];
        double x0 = 1e18, y0 = 1e18, x1 = -1e18, y1 = -1e18;
        for (std::size_t i : members) {
            const Box& b = overlap_boxes[i];
            x0 = std::min(x0, b.x0());
            y0 = std::min(y0, b.y0());
            x1 = std::max(x1, b.x1());
            y1 = std::max(y1, b.y1());
        }
        int ix0 = std::max(0, static_cast<int>(std::floor(x0)) - cfg.crop_margin);
        int iy0 = std::max(0, static_cast<int>(std::floor(y0)) - cfg.crop_margin);
        int ix1 = std::min(frame.width, static_cast<int>(std::ceil(x1)) + cfg.crop_margin);
        int iy1 = std::min(frame.height, static_cast<int>(std::ceil(y1)) + cfg.crop_margin);
        if (ix1 - ix0 < 2 || iy1 - iy0 < 2) continue;
        Crop crop;
        crop.image = Frame(ix1 - ix0, iy1 - iy0, frame.channels);
        for (int y = iy0; y < iy1; ++y)
            for (int x = ix0; x < ix1; ++x)
                for (int c = 0; c < frame.channels; ++c)
                    crop.image.at(x - ix0, y - iy0, c) = frame.at(x, y, c);
        for (std::size_t i : members) {
            Box b = overlap_boxes[i];
            b.cx -= ix0;
            b.cy -= iy0;
            crop.boxes.push_back(b);
        }
        crop.source_center = Point{0.5 * (ix0 + ix1), 0.5 * (iy0 + iy1)};
        crop.source_center_polar = to_polar(crop.source_center, frame_center);
        crops.push_back(std::move(crop));
    }
    return crops;
}

/// Warped patch: pixels plus a validity bit per pixel (the rotated rectangle
/// does not fill its own bounding box).
struct WarpedPatch {
    Frame image;
    BinaryMask valid;
    Point center;  // absolute frame position of the patch center (the anchor)
    int x0 = 0;    // top-left of the patch in frame coordinates
    int y0 = 0;
};

/// Scales the crop by the polar scale factor, rotates it by the polar angle
/// difference about its center (bilinear resampling), and positions it so
/// the center lands on the anchor. Boxes get the same similarity transform,
/// then an axis-aligned enclosure.
inline std::pair<WarpedPatch, std::vector<Box>> transform_crop(const Crop& crop, Point anchor,
                                                               const AugmentConfig& cfg,
                                                               Point frame_center) {
    PolarCoord dst = to_polar(anchor, frame_center);
    const double s = scale_factor(crop.source_center_polar.rho, dst.rho, cfg);
    const double dth = dst.theta - crop.source_center_polar.theta;
    const double c = std::cos(dth), sn = std::sin(dth);

    const double hw = crop.image.width / 2.0, hh = crop.image.height / 2.0;
    // extent of the transformed rectangle
    double ex = s * (std::abs(c) * hw + std::abs(sn) * hh);
    double ey = s * (std::abs(sn) * hw + std::abs(c) * hh);
    int ow = std::max(1, static_cast<int>(std::ceil(2.0 * ex)));
    int oh = std::max(1, static_cast<int>(std::ceil(2.0 * ey)));

    WarpedPatch patch;
    patch.image = Frame(ow, oh, crop.image.channels);
    patch.valid = BinaryMask(ow, oh);
    patch.center = anchor;
    patch.x0 = static_cast<int>(std::round(anchor.x - ow / 2.0));
    patch.y0 = static_cast<int>(std::round(anchor.y - oh / 2.0));

    // inverse map: out (relative to out center) -> source (relative to crop center)
    const double inv_s = 1.0 / s;
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            double rx = (ox + 0.5) - ow / 2.0;
            double ry = (oy + 0.5) - oh / 2.0;
            double sx = inv_s * (c * rx + sn * ry) + hw;
            double sy = inv_s * (-sn * rx + c * ry) + hh;
            if (sx < 0.5 || sx > crop.image.width - 0.5 || sy < 0.5 ||
                sy > crop.image.height - 0.5)
                continue;
            double fx = sx - 0.5, fy = sy - 0.5;
            int x0i = static_cast<int>(fx), y0i = static_cast<int>(fy);
            int x1i = std::min(x0i + 1, crop.image.width - 1);
            int y1i = std::min(y0i + 1, crop.image.height - 1);
            double ax = fx - x0i, ay = fy - y0i;
            for (int ch = 0; ch < crop.image.channels; ++ch) {
                double v = (1 - ax) * (1 - ay) * crop.image.at(x0i, y0i, ch) +
                           ax * (1 - ay) * crop.image.at(x1i, y0i, ch) +
                           (1 - ax) * ay * crop.image.at(x0i, y1i, ch) +
                           ax * ay * crop.image.at(x1i, y1i, ch);
                patch.image.at(ox, oy, ch) = static_cast<float>(v);
            }
            patch.valid.set(ox, oy);
        }
    }

    std::vector<Box> out_boxes;
    for (const Box& b : crop.boxes) {
        std::array<Point, 4> pts = box_corners(b);
        std::array<Point, 4> tp;
        for (int i = 0; i < 4; ++i) {
            double rx = pts[i].x - hw, ry = pts[i].y - hh;
            tp[i] = Point{s * (c * rx - sn * ry) + anchor.x, s * (sn * rx + c * ry) + anchor.y};
        }
        auto enc = enclosing_axis_aligned(std::span<const Point>(tp.data(), 4), b.score);
        if (enc) out_boxes.push_back(*enc);
    }
    return {std::move(patch), std::move(out_boxes)};
}

struct BlendStats {
    bool converged = true;
    int sweeps = 0;
    double residual = 0.0;
};

/// Gradient-domain paste: solves the Poisson equation over the patch's valid
/// region with the patch Laplacian as guidance and the surrounding target as
/// Dirichlet boundary, by Gauss-Seidel sweeps. The caller must place the
/// patch so every valid pixel has its 4-neighborhood inside the frame.
inline BlendStats blend_into(Frame& target, const WarpedPatch& patch,
                             int max_sweeps = 5000, double tolerance = 1e-4) {
    const int pw = patch.image.width, ph = patch.image.height;
    std::vector<int> idx(static_cast<std::size_t>(pw) * ph, -1);
    std::vector<std::pair<int, int>> cells;
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
            if (patch.valid.at(x, y)) {
                int fx = patch.x0 + x, fy = patch.y0 + y;
                if (fx < 1 || fx >= target.width - 1 || fy < 1 || fy >= target.height - 1)
                    continue;  // clipped pixels keep the target value
                idx[static_cast<std::size_t>(y) * pw + x] = static_cast<int>(cells.size());
                cells.emplace_back(x, y);
            }
    if (cells.empty()) return {};

    static constexpr int kDx[4] = {1, -1, 0, 0};
    static constexpr int kDy[4] = {0, 0, 1, -1};
    BlendStats stats;
    for (int ch = 0; ch < target.channels; ++ch) {
        std::vector<double> f(cells.size()), b(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            auto [x, y] = cells[i];
            double g = patch.image.at(x, y, ch);
            double rhs = 0.0;
            for (int k = 0; k < 4; ++k) {
                int nx = x + kDx[k], ny = y + kDy[k];
                bool in_patch = nx >= 0 && nx < pw && ny >= 0 && ny < ph &&
                                patch.valid.at(nx, ny);
                double gn = in_patch ? patch.image.at(nx, ny, ch) : g;
                rhs += g - gn;  // guidance gradient (zero across the patch rim)
                int j = in_patch ? idx[static_cast<std::size_t>(ny) * pw + nx] : -1;
                if (j < 0) rhs += target.at(patch.x0 + nx, patch.y0 + ny, ch);
            }
            b[i] = rhs;
            f[i] = target.at(patch.x0 + x, patch.y0 + y, ch);  // warm start
        }
        int sweep = 0;
        double res = 0.0;
        for (; sweep < max_sweeps; ++sweep) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                auto [x, y] = cells[i];
                double acc = b[i];
                for (int k = 0; k < 4; ++k) {
                    int nx = x + kDx[k], ny = y + kDy[k];
                    if (nx < 0 || nx >= pw || ny < 0 || ny >= ph) continue;
                    int j = idx[static_cast<std::size_t>(ny) * pw + nx];
                    if (j >= 0) acc += f[static_cast<std::size_t>(j)];
                }
                f[i] = 0.25 * acc;
            }
            res = 0.0;
            for (std::size_t i = 0; i < cells.size(); ++i) {
                auto [x, y] = cells[i];
                double acc = b[i] - 4.0 * f[i];
                for (int k = 0; k < 4; ++k) {
                    int nx = x + kDx[k], ny = y + kDy[k];
                    if (nx < 0 || nx >= pw || ny < 0 || ny >= ph) continue;
                    int j = idx[static_cast<std::size_t>(ny) * pw + nx];
                    if (j >= 0) acc += f[static_cast<std::size_t>(j)];
                }
                res = std::max(res, std::abs(acc));
            }
            if (res < tolerance) {
                ++sweep;
                break;
            }
        }
        stats.sweeps = std::max(stats.sweeps, sweep);
        stats.residual = std::max(stats.residual, res);
        if (res >= tolerance) stats.converged = false;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            auto [x, y] = cells[i];
            target.at(patch.x0 + x, patch.y0 + y, ch) =
                static_cast<float>(std::clamp(f[i], 0.0, 1.0));
        }
    }
    return stats;
}

struct BlendResult {
    Frame frame;
    BlendStats stats;
};

inline BlendResult seamless_blend(const Frame& target, const WarpedPatch& patch,
                                  int max_sweeps = 5000, double tolerance = 1e-4) {
    BlendResult r{target, {}};
    r.stats = blend_into(r.frame, patch, max_sweeps, tolerance);
    return r;
}

struct AugmentResult {
    Frame frame;
    std::vector<Box> artificial_boxes;  // score 1.0, centers in the anchor region
    int skipped_crops = 0;
};

/// Full augmentation pass: extract crops around the supplied OVERLAP boxes,
/// draw anchors in the anchor region, warp and blend each crop, and report
/// the transformed boxes. Returns the frame unchanged when there is nothing
/// to paste.
inline AugmentResult augment_frame(const Frame& frame, std::span<const Box> overlap_boxes,
                                   const AugmentConfig& cfg, Pcg32& rng) {
    AugmentResult result{frame, {}, 0};
    if (overlap_boxes.empty() || cfg.crops_per_frame <= 0) return result;
    if (cfg.anchor_region.width() != frame.width || cfg.anchor_region.height() != frame.height)
        throw std::invalid_argument("augment_frame: anchor_region does not match frame");

    std::vector<std::uint32_t> anchors;
    anchors.reserve(cfg.anchor_region.count());
    for (int y = 0; y < frame.height; ++y)
        for (int x = 0; x < frame.width; ++x)
            if (cfg.anchor_region.at(x, y))
                anchors.push_back(static_cast<std::uint32_t>(y) * frame.width + x);
    if (anchors.empty()) return result;

    Point frame_center{frame.width / 2.0, frame.height / 2.0};
    auto crops = extract_crops(frame, overlap_boxes, cfg, rng);
    for (const Crop& crop : crops) {
        bool placed = false;
        for (int attempt = 0; attempt <= cfg.max_retries && !placed; ++attempt) {
            std::uint32_t pick = anchors[rng.next_below(static_cast<std::uint32_t>(anchors.size()))];
            Point anchor{static_cast<double>(pick % frame.width) + 0.5,
                         static_cast<double>(pick / frame.width) + 0.5};
            auto [patch, boxes] = transform_crop(crop, anchor, cfg, frame_center);
            if (patch.x0 < 1 || patch.y0 < 1 || patch.x0 + patch.image.width > frame.width - 1 ||
                patch.y0 + patch.image.height > frame.height - 1)
                continue;
            bool centers_ok = true;
            for (const Box& b : boxes) {
                int bx = static_cast<int>(b.cx), by = static_cast<int>(b.cy);
                if (!cfg.anchor_region.at_clamped(bx, by)) {
                    centers_ok = false;
                    break;
                }
            }
            if (!centers_ok || boxes.empty()) continue;
            blend_into(result.frame, patch, cfg.blend_max_sweeps, cfg.blend_tolerance);
            for (Box& b : boxes) {
                b.score = 1.0;
                result.artificial_boxes.push_back(b);
            }
            placed = true;
        }
        if (!placed) ++result.skipped_crops;
    }
    return result;
}

}  // namespace duoview
