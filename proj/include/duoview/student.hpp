#pragma once

#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <span>
#include <vector>

#include "duoview/core.hpp"
#include "duoview/motion.hpp"
#include "duoview/supervise.hpp"

namespace duoview {

struct FeatureGrid {
    int grid = 0;
    int feature_count = 0;
    int frame_width = 0;
    int frame_height = 0;
    std::vector<float> data;  // grid*grid*feature_count

    const float* cell(int j, int i) const {
        return data.data() + (static_cast<std::size_t>(j) * grid + i) * feature_count;
    }
};

/// One dataset entry. Features are extracted once at push time so training
/// epochs do not re-touch pixels; the frame pointer may be dropped after
/// extraction unless the run keeps frames for debugging dumps.
struct TrainingExample {
    double t = 0.0;
    std::shared_ptr<const Frame> frame;
    std::shared_ptr<const SupervisionTarget> target;
    std::shared_ptr<const FeatureGrid> features;
};

/// Minimal detector contract used by the online loop. Detectors are
/// single-owner; the loop keeps one inference copy and one training copy and
/// moves immutable weight blobs between them.
class Detector {
public:
    virtual ~Detector() = default;
    virtual std::vector<Box> predict(const Frame& frame, const MotionMasks& masks) const = 0;
    virtual LossBreakdown train_step(std::span<const TrainingExample> batch, double lr) = 0;
    virtual std::vector<double> snapshot_weights() const = 0;
    virtual void load_weights(std::span<const double> blob) = 0;
    virtual std::unique_ptr<Detector> clone() const = 0;
};

/// Connected-component baseline: each 8-connected blob of the raw motion
/// mask within the area band becomes a score-1 box.
inline std::vector<Box> blob_detect(const MotionMasks& masks, double min_area, double max_area) {
    const BinaryMask& m = masks.raw;
    const int w = m.width(), h = m.height();
    std::vector<std::int32_t> label(static_cast<std::size_t>(w) * h, -1);
    std::vector<Box> out;
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!m.at(x, y) || label[static_cast<std::size_t>(y) * w + x] >= 0) continue;
            int id = static_cast<int>(out.size());
            stack.assign(1, {x, y});
            label[static_cast<std::size_t>(y) * w + x] = id;
            long area = 0;
            int x0 = x, x1 = x, y0 = y, y1 = y;
            while (!stack.empty()) {
                auto [px, py] = stack.back();
                stack.pop_back();
                ++area;
                x0 = std::min(x0, px);
                x1 = std::max(x1, px);
                y0 = std::min(y0, py);
                y1 = std::max(y1, py);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int nx = px + dx, ny = py + dy;
                        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                        std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                        if (m.at(nx, ny) && label[ni] < 0) {
                            label[ni] = id;
                            stack.push_back({nx, ny});
                        }
                    }
            }
            if (area >= min_area && area <= max_area)
                out.push_back(box_from_extent(x0, y0, x1 + 1, y1 + 1, 1.0));
        }
    }
    return out;
}

class BlobDetector final : public Detector {
public:
    explicit BlobDetector(double min_area = 8.0, double max_area = 1e5)
        : min_area_(min_area), max_area_(max_area) {}
    std::vector<Box> predict(const Frame&, const MotionMasks& masks) const override {
        return blob_detect(masks, min_area_, max_area_);
    }
    LossBreakdown train_step(std::span<const TrainingExample>, double) override { return {}; }
    std::vector<double> snapshot_weights() const override { return {}; }
    void load_weights(std::span<const double>) override {}
    std::unique_ptr<Detector> clone() const override {
        return std::make_unique<BlobDetector>(*this);
    }

private:
    double min_area_;
    double max_area_;
};

struct GridConfig {
    int grid = 40;
    int window_margin = 8;  // feature window extends this far past the cell
    double emission_threshold = 0.1;
    double match_iou = 0.5;
    // Training-objective weights. Centers regress in pixel space and sizes
    // in log space on the raw head outputs: frame-size normalization would
    // scale center gradients by 1/W^2 (nothing would ever move), and raw
    // pixel-size MSE through the exp decode is violently unstable under SGD.
    double lambda_coord = 2.0;
    double lambda_obj = 1.0;
    double lambda_noobj = 0.05;
    double log_size_min = -2.0;
    double log_size_max = 6.0;
    double grad_clip = 100.0;
};

namespace gridfeat {
constexpr int kFeatureCount = 9;
constexpr int kOutputs = 5;         // score logit, dx, dy, log w, log h
constexpr double kPosScale = 16.0;  // centroid offsets normalized by this
constexpr double kLogScale = 3.0;   // log extents normalized by this

inline int cell_lo(int i, int extent, int grid) {
    return static_cast<int>(static_cast<long>(i) * extent / grid);
}
inline int cell_hi(int i, int extent, int grid) {
    return static_cast<int>(static_cast<long>(i + 1) * extent / grid);
}
inline double cell_center(int i, int extent, int grid) {
    return 0.5 * (cell_lo(i, extent, grid) + cell_hi(i, extent, grid));
}
}  // namespace gridfeat

/// Per-cell feature vector: bias, motion density, motion centroid offset
/// (x, y), log motion extents, window intensity mean/stddev, radial position
/// of the cell center. Motion statistics come from the raw mask inside the
/// cell's window (cell rect grown by the margin on each side).
class GridFeatureExtractor {
public:
    explicit GridFeatureExtractor(const GridConfig& cfg) : cfg_(cfg) {}

    FeatureGrid extract(const Frame& frame, const BinaryMask& raw) const {
        using namespace gridfeat;
        const int W = frame.width, H = frame.height, G = cfg_.grid;
        FeatureGrid fg;
        fg.grid = G;
        fg.feature_count = kFeatureCount;
        fg.frame_width = W;
        fg.frame_height = H;
        fg.data.assign(static_cast<std::size_t>(G) * G * kFeatureCount, 0.0f);

        // integral images of luma and luma^2 for window statistics
        sum_.assign(static_cast<std::size_t>(W + 1) * (H + 1), 0.0);
        sq_.assign(static_cast<std::size_t>(W + 1) * (H + 1), 0.0);
        for (int y = 0; y < H; ++y) {
            double rs = 0.0, rq = 0.0;
            const std::size_t row = static_cast<std::size_t>(y + 1) * (W + 1);
            const std::size_t prev = static_cast<std::size_t>(y) * (W + 1);
            for (int x = 0; x < W; ++x) {
                double v = luma(frame, x, y);
                rs += v;
                rq += v * v;
                sum_[row + x + 1] = sum_[prev + x + 1] + rs;
                sq_[row + x + 1] = sq_[prev + x + 1] + rq;
            }
        }

        acc_.assign(static_cast<std::size_t>(G) * G, Acc{});
        const auto& words = raw.words();
        for (std::size_t wi = 0; wi < words.size(); ++wi) {
            std::uint64_t bits = words[wi];
            while (bits) {
                int b = __builtin_ctzll(bits);
                bits &= bits - 1;
                std::size_t pix = (wi << 6) + static_cast<std::size_t>(b);
                int y = static_cast<int>(pix / static_cast<std::size_t>(W));
                int x = static_cast<int>(pix % static_cast<std::size_t>(W));
                int ci = static_cast<int>(static_cast<long>(x) * G / W);
                int cj = static_cast<int>(static_cast<long>(y) * G / H);
                for (int j = std::max(0, cj - 1); j <= std::min(G - 1, cj + 1); ++j) {
                    if (y < cell_lo(j, H, G) - cfg_.window_margin ||
                        y >= cell_hi(j, H, G) + cfg_.window_margin)
                        continue;
                    for (int i = std::max(0, ci - 1); i <= std::min(G - 1, ci + 1); ++i) {
                        if (x < cell_lo(i, W, G) - cfg_.window_margin ||
                            x >= cell_hi(i, W, G) + cfg_.window_margin)
                            continue;
                        Acc& a = acc_[static_cast<std::size_t>(j) * G + i];
                        ++a.n;
                        a.sx += x;
                        a.sy += y;
                        a.minx = std::min(a.minx, x);
                        a.maxx = std::max(a.maxx, x);
                        a.miny = std::min(a.miny, y);
                        a.maxy = std::max(a.maxy, y);
                    }
                }
            }
        }

        const double half_min = 0.5 * std::min(W, H);
        for (int j = 0; j < G; ++j) {
            for (int i = 0; i < G; ++i) {
                int wx0 = std::max(0, cell_lo(i, W, G) - cfg_.window_margin);
                int wx1 = std::min(W, cell_hi(i, W, G) + cfg_.window_margin);
                int wy0 = std::max(0, cell_lo(j, H, G) - cfg_.window_margin);
                int wy1 = std::min(H, cell_hi(j, H, G) + cfg_.window_margin);
                double area = static_cast<double>(wx1 - wx0) * (wy1 - wy0);
                double s = window_sum(sum_, W, wx0, wy0, wx1, wy1);
                double q = window_sum(sq_, W, wx0, wy0, wx1, wy1);
                double mean = s / area;
                double var = std::max(0.0, q / area - mean * mean);
                const Acc& a = acc_[static_cast<std::size_t>(j) * G + i];
                double ccx = cell_center(i, W, G), ccy = cell_center(j, H, G);
                float* f = fg.data.data() +
                           (static_cast<std::size_t>(j) * G + i) * kFeatureCount;
                f[0] = 1.0f;
                f[1] = static_cast<float>(a.n / area);
                if (a.n > 0) {
                    f[2] = static_cast<float>(
                        (static_cast<double>(a.sx) / a.n + 0.5 - ccx) / kPosScale);
                    f[3] = static_cast<float>(
                        (static_cast<double>(a.sy) / a.n + 0.5 - ccy) / kPosScale);
                    f[4] = static_cast<float>(std::log1p(a.maxx - a.minx + 1.0) / kLogScale);
                    f[5] = static_cast<float>(std::log1p(a.maxy - a.miny + 1.0) / kLogScale);
                }
                f[6] = static_cast<float>(mean - 0.5);
                f[7] = static_cast<float>(std::sqrt(var));
                double rho = std::hypot(ccx - W / 2.0, ccy - H / 2.0);
                f[8] = static_cast<float>(rho / half_min - 0.5);
            }
        }
        return fg;
    }

private:
    struct Acc {
        std::int64_t n = 0;
        std::int64_t sx = 0, sy = 0;
        int minx = 1 << 30, maxx = -1, miny = 1 << 30, maxy = -1;
    };

    static double window_sum(const std::vector<double>& ii, int W, int x0, int y0, int x1,
                             int y1) {
        const std::size_t stride = static_cast<std::size_t>(W + 1);
        return ii[static_cast<std::size_t>(y1) * stride + x1] -
               ii[static_cast<std::size_t>(y0) * stride + x1] -
               ii[static_cast<std::size_t>(y1) * stride + x0] +
               ii[static_cast<std::size_t>(y0) * stride + x0];
    }

    GridConfig cfg_;
    mutable std::vector<double> sum_, sq_;
    mutable std::vector<Acc> acc_;
};

/// Trainable detector: a G x G grid of cells, each holding a small linear
/// map from the cell's feature vector to (score logit, center offset in
/// pixels, log box size). The decode is sigmoid on the logit and exp on the
/// sizes; gradients flow through both analytically.
class GridDetector final : public Detector {
public:
    explicit GridDetector(const GridConfig& cfg = {}, int frame_width = 1280,
                          int frame_height = 1280)
        : cfg_(cfg), width_(frame_width), height_(frame_height), extractor_(cfg) {
        weights_.assign(param_count(), 0.0);
    }

    const GridConfig& config() const { return cfg_; }
    int frame_width() const { return width_; }
    int frame_height() const { return height_; }
    std::size_t param_count() const {
        return static_cast<std::size_t>(cfg_.grid) * cfg_.grid * gridfeat::kOutputs *
               gridfeat::kFeatureCount;
    }

    FeatureGrid extract_features(const Frame& frame, const MotionMasks& masks) const {
        return extractor_.extract(frame, masks.raw);
    }

    /// Decodes every cell; a box is emitted when its confidence clears the
    /// emission threshold.
    std::vector<Box> predict(const Frame& frame, const MotionMasks& masks) const override {
        FeatureGrid fg = extractor_.extract(frame, masks.raw);
        return decode(fg, cfg_.emission_threshold);
    }

    std::vector<Box> decode(const FeatureGrid& fg, double emission_threshold) const {
        std::vector<Box> out;
        const int G = cfg_.grid;
        for (int j = 0; j < G; ++j)
            for (int i = 0; i < G; ++i) {
                Box b = decode_cell(fg, j, i);
                if (b.score >= emission_threshold) out.push_back(b);
            }
        return out;
    }

    Box decode_cell(const FeatureGrid& fg, int j, int i) const {
        const float* f = fg.cell(j, i);
        const double* w = cell_weights(j, i);
        double o[gridfeat::kOutputs];
        for (int r = 0; r < gridfeat::kOutputs; ++r) {
            double acc = 0.0;
            const double* row = w + static_cast<std::size_t>(r) * gridfeat::kFeatureCount;
            for (int k = 0; k < gridfeat::kFeatureCount; ++k) acc += row[k] * f[k];
            o[r] = acc;
        }
        double ccx = gridfeat::cell_center(i, width_, cfg_.grid);
        double ccy = gridfeat::cell_center(j, height_, cfg_.grid);
        double lw = std::clamp(o[3], cfg_.log_size_min, cfg_.log_size_max);
        double lh = std::clamp(o[4], cfg_.log_size_min, cfg_.log_size_max);
        return Box{ccx + o[1], ccy + o[2], std::exp(lw), std::exp(lh),
                   1.0 / (1.0 + std::exp(-o[0]))};
    }

    /// Pre-step loss (category means, as reported everywhere else), then one
    /// SGD step on the weighted-sum training objective, gradients averaged
    /// over the batch. Non-finite gradients skip the step and set a flag.
    LossBreakdown train_step(std::span<const TrainingExample> batch, double lr) override {
        LossBreakdown report;
        if (batch.empty()) return report;
        grad_.assign(param_count(), 0.0);
        int used = 0;
        for (const TrainingExample& ex : batch) {
            LossBreakdown lb = accumulate_gradient(ex, grad_);
            report.coord_loss += lb.coord_loss;
            report.obj_loss += lb.obj_loss;
            report.noobj_loss += lb.noobj_loss;
            report.matched += lb.matched;
            report.penalized += lb.penalized;
            report.ignored += lb.ignored;
            ++used;
        }
        report.coord_loss /= used;
        report.obj_loss /= used;
        report.noobj_loss /= used;
        report.total = report.coord_loss + report.obj_loss + report.noobj_loss;
        bool finite = true;
        for (double g : grad_)
            if (!std::isfinite(g)) {
                finite = false;
                break;
            }
        if (!finite) {
            ++skipped_steps_;
            return report;
        }
        const double scale = lr / used;
        for (std::size_t k = 0; k < weights_.size(); ++k) weights_[k] -= scale * grad_[k];
        return report;
    }

    /// Weighted-sum training objective for one example; the quantity the
    /// gradient check differentiates.
    double objective(const TrainingExample& ex) const {
        std::vector<double> unused;
        double value = 0.0;
        example_pass(ex, nullptr, &value);
        return value;
    }

    std::vector<double> objective_gradient(const TrainingExample& ex) const {
        std::vector<double> g(param_count(), 0.0);
        example_pass(ex, &g, nullptr);
        return g;
    }

    std::vector<double> snapshot_weights() const override { return weights_; }
    void load_weights(std::span<const double> blob) override {
        if (blob.size() != weights_.size())
            throw std::invalid_argument("GridDetector: weight blob size mismatch");
        weights_.assign(blob.begin(), blob.end());
    }
    std::unique_ptr<Detector> clone() const override {
        return std::make_unique<GridDetector>(*this);
    }

    int skipped_steps() const { return skipped_steps_; }

    double* cell_weights(int j, int i) {
        return weights_.data() + (static_cast<std::size_t>(j) * cfg_.grid + i) *
                                     gridfeat::kOutputs * gridfeat::kFeatureCount;
    }
    const double* cell_weights(int j, int i) const {
        return weights_.data() + (static_cast<std::size_t>(j) * cfg_.grid + i) *
                                     gridfeat::kOutputs * gridfeat::kFeatureCount;
    }

private:
    LossBreakdown accumulate_gradient(const TrainingExample& ex, std::vector<double>& grad) const {
        LossBreakdown lb;
        example_pass(ex, &grad, nullptr, &lb);
        return lb;
    }

    /// Shared forward/backward pass. Writes the weighted-sum objective into
    /// *value and/or its gradient into *grad; fills *report with the
    /// category-mean breakdown when given.
    void example_pass(const TrainingExample& ex, std::vector<double>* grad, double* value,
                      LossBreakdown* report = nullptr) const {
        if (!ex.target) throw std::invalid_argument("GridDetector: example without target");
        std::shared_ptr<const FeatureGrid> feats = ex.features;
        if (!feats) {
            if (!ex.frame) throw std::invalid_argument("GridDetector: example without features");
            feats = std::make_shared<FeatureGrid>(
                extractor_.extract(*ex.frame, ex.target->motion.raw));
        }
        const FeatureGrid& fg = *feats;
        const SupervisionTarget& target = *ex.target;
        const int G = cfg_.grid;
        const int n_cells = G * G;

        std::vector<Box> preds(static_cast<std::size_t>(n_cells));
        for (int j = 0; j < G; ++j)
            for (int i = 0; i < G; ++i)
                preds[static_cast<std::size_t>(j) * G + i] = decode_cell(fg, j, i);

        // Training assignment is cell responsibility: a ground truth trains
        // exactly the cell holding its center. Letting any overlapping cell
        // claim the match by IoU reinforces several cells per player and the
        // detector ends up emitting stable duplicates.
        std::vector<Classification> labels(preds.size());
        for (std::size_t p = 0; p < preds.size(); ++p) {
            int cx = static_cast<int>(preds[p].cx), cy = static_cast<int>(preds[p].cy);
            labels[p].label = target.ignore_at(cx, cy) ? PredictionLabel::kIgnored
                                                       : PredictionLabel::kPenalized;
        }
        for (std::size_t g = 0; g < target.gt_boxes.size(); ++g) {
            const Box& gt = target.gt_boxes[g];
            int ci = std::clamp(static_cast<int>(gt.cx * G / width_), 0, G - 1);
            int cj = std::clamp(static_cast<int>(gt.cy * G / height_), 0, G - 1);
            std::size_t p = static_cast<std::size_t>(cj) * G + ci;
            if (labels[p].label != PredictionLabel::kMatched)
                labels[p] = {PredictionLabel::kMatched, static_cast<int>(g),
                             box_iou(preds[p], gt)};
        }

        const double inv_w = 1.0 / width_, inv_h = 1.0 / height_;
        double obj_value = 0.0;
        LossBreakdown lb;
        for (int j = 0; j < G; ++j) {
            for (int i = 0; i < G; ++i) {
                std::size_t p = static_cast<std::size_t>(j) * G + i;
                const Box& pred = preds[p];
                const float* f = fg.cell(j, i);
                const double* w = cell_weights(j, i);
                double z = 0.0;
                for (int k = 0; k < gridfeat::kFeatureCount; ++k) z += w[k] * f[k];
                double s = clamp_score(pred.score);
                double d_out[gridfeat::kOutputs] = {0, 0, 0, 0, 0};
                switch (labels[p].label) {
                    case PredictionLabel::kMatched: {
                        const Box& gt =
                            target.gt_boxes[static_cast<std::size_t>(labels[p].gt_index)];
                        double dx = pred.cx - gt.cx;  // pixels
                        double dy = pred.cy - gt.cy;
                        // sizes regress in log space on the raw head outputs
                        double raw_lw = raw_output(w, f, 3);
                        double raw_lh = raw_output(w, f, 4);
                        double dlw = raw_lw - std::log(std::max(gt.w, 0.1));
                        double dlh = raw_lh - std::log(std::max(gt.h, 0.1));
                        double coord = 0.5 * (dx * dx + dy * dy) + 0.5 * (dlw * dlw + dlh * dlh);
                        double bce = -std::log(s);
                        obj_value += cfg_.lambda_coord * coord + cfg_.lambda_obj * bce;
                        double dww = (pred.w - gt.w) * inv_w, dhh = (pred.h - gt.h) * inv_h;
                        lb.coord_loss += 0.25 * (dx * dx * inv_w * inv_w + dy * dy * inv_h * inv_h +
                                                 dww * dww + dhh * dhh);
                        lb.obj_loss += bce;
                        ++lb.matched;
                        if (grad) {
                            d_out[0] = cfg_.lambda_obj * (s - 1.0);
                            d_out[1] = cfg_.lambda_coord * dx;
                            d_out[2] = cfg_.lambda_coord * dy;
                            d_out[3] = cfg_.lambda_coord * dlw;
                            d_out[4] = cfg_.lambda_coord * dlh;
                            for (double& g : d_out)
                                g = std::clamp(g, -cfg_.grad_clip, cfg_.grad_clip);
                        }
                        break;
                    }
                    case PredictionLabel::kPenalized: {
                        double bce = -std::log(1.0 - s);
                        obj_value += cfg_.lambda_noobj * bce;
                        lb.noobj_loss += bce;
                        ++lb.penalized;
                        if (grad) d_out[0] = cfg_.lambda_noobj * s;
                        break;
                    }
                    case PredictionLabel::kIgnored:
                        ++lb.ignored;
                        break;
                }
                if (grad) {
                    double* gcell = grad->data() + p * gridfeat::kOutputs * gridfeat::kFeatureCount;
                    for (int r = 0; r < gridfeat::kOutputs; ++r) {
                        if (d_out[r] == 0.0) continue;
                        double* grow = gcell + static_cast<std::size_t>(r) * gridfeat::kFeatureCount;
                        for (int k = 0; k < gridfeat::kFeatureCount; ++k)
                            grow[k] += d_out[r] * f[k];
                    }
                }
                (void)z;
            }
        }
        if (lb.matched > 0) {
            lb.coord_loss /= lb.matched;
            lb.obj_loss /= lb.matched;
        }
        if (lb.penalized > 0) lb.noobj_loss /= lb.penalized;
        lb.total = lb.coord_loss + lb.obj_loss + lb.noobj_loss;
        if (value) *value = obj_value;
        if (report) *report = lb;
    }

    static double raw_output(const double* w, const float* f, int row) {
        double acc = 0.0;
        const double* r = w + static_cast<std::size_t>(row) * gridfeat::kFeatureCount;
        for (int k = 0; k < gridfeat::kFeatureCount; ++k) acc += r[k] * f[k];
        return acc;
    }

    GridConfig cfg_;
    int width_;
    int height_;
    GridFeatureExtractor extractor_;
    std::vector<double> weights_;
    std::vector<double> grad_;
    int skipped_steps_ = 0;
};

/// Versioned binary weight file: magic, version, grid, feature count,
/// outputs, then the float64 array.
inline void save_weights(const std::string& path, const GridDetector& det) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_weights: cannot open " + path);
    const char magic[4] = {'D', 'V', 'G', 'W'};
    std::uint32_t header[4] = {1u, static_cast<std::uint32_t>(det.config().grid),
                               static_cast<std::uint32_t>(gridfeat::kFeatureCount),
                               static_cast<std::uint32_t>(gridfeat::kOutputs)};
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    auto w = det.snapshot_weights();
    out.write(reinterpret_cast<const char*>(w.data()),
              static_cast<std::streamsize>(w.size() * sizeof(double)));
    if (!out) throw std::runtime_error("save_weights: write failed for " + path);
}

inline void load_weights_file(const std::string& path, GridDetector& det) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_weights_file: cannot open " + path);
    char magic[4];
    std::uint32_t header[4];
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in || std::memcmp(magic, "DVGW", 4) != 0 || header[0] != 1)
        throw std::runtime_error("load_weights_file: bad header in " + path);
    if (header[1] != static_cast<std::uint32_t>(det.config().grid) ||
        header[2] != static_cast<std::uint32_t>(gridfeat::kFeatureCount) ||
        header[3] != static_cast<std::uint32_t>(gridfeat::kOutputs))
        throw std::runtime_error("load_weights_file: layout mismatch in " + path);
    std::vector<double> w(det.param_count());
    in.read(reinterpret_cast<char*>(w.data()),
            static_cast<std::streamsize>(w.size() * sizeof(double)));
    if (!in) throw std::runtime_error("load_weights_file: truncated file " + path);
    det.load_weights(w);
}

}  // namespace duoview
