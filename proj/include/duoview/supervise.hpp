#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <unordered_map>
#include <vector>

#include "duoview/core.hpp"
#include "duoview/geometry.hpp"
#include "duoview/motion.hpp"

namespace duoview {

/// How the loss treats unmatched predictions in OUTSIDE:
///   kMotion - zero the loss where there is motion (the full method)
///   kNone   - zero the loss everywhere in OUTSIDE
///   kAll    - keep the loss active everywhere in OUTSIDE
enum class GateMode { kMotion, kNone, kAll };

inline const char* to_string(GateMode m) {
    switch (m) {
        case GateMode::kMotion: return "motion";
        case GateMode::kNone: return "none";
        case GateMode::kAll: return "all";
    }
    return "?";
}

/// Per-frame training target: surrogate ground-truth boxes plus the region
/// masks that gate the loss. The ignore and penalize masks partition
/// OUTSIDE; together with OVERLAP they cover the frame.
struct SupervisionTarget {
    std::vector<Box> gt_boxes;  // projected teacher boxes + artificial boxes, score 1
    MotionMasks motion;         // masks of the (possibly augmented) training frame
    std::shared_ptr<const RegionPartition> partition;
    GateMode gate = GateMode::kMotion;
    int width = 0;
    int height = 0;

    bool in_overlap(int x, int y) const { return partition && partition->in_overlap(x, y); }

    /// OUTSIDE and in motion (uncertain, loss zeroed) under the gate mode.
    bool ignore_at(int x, int y) const {
        if (x < 0 || x >= width || y < 0 || y >= height) return false;
        if (in_overlap(x, y)) return false;
        switch (gate) {
            case GateMode::kMotion: return motion.dilated.at(x, y);
            case GateMode::kNone: return true;
            case GateMode::kAll: return false;
        }
        return false;
    }

    /// OUTSIDE and assuredly player-free (loss kept to penalize detections).
    bool penalize_at(int x, int y) const {
        if (x < 0 || x >= width || y < 0 || y >= height) return false;
        if (in_overlap(x, y)) return false;
        return !ignore_at(x, y);
    }

    BinaryMask ignore_mask() const {
        BinaryMask m(width, height);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (ignore_at(x, y)) m.set(x, y);
        return m;
    }
    BinaryMask penalize_mask() const {
        BinaryMask m(width, height);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (penalize_at(x, y)) m.set(x, y);
        return m;
    }
};

/// Projects the teacher boxes into the student frame and bundles them with
/// the artificial boxes and the loss-gating masks.
inline SupervisionTarget assemble_target(std::span<const Box> teacher_boxes, const ViewMap& view,
                                         std::span<const Box> artificial_boxes, MotionMasks masks,
                                         std::shared_ptr<const RegionPartition> partition,
                                         GateMode gate = GateMode::kMotion) {
    SupervisionTarget t;
    t.width = masks.raw.width();
    t.height = masks.raw.height();
    t.partition = std::move(partition);
    t.gate = gate;
    t.motion = std::move(masks);
    for (const Box& b : teacher_boxes) {
        auto proj = view.project_box_to_student(b);
        if (proj) {
            proj->score = 1.0;
            t.gt_boxes.push_back(*proj);
        }
    }
    for (const Box& b : artificial_boxes) {
        Box a = b;
        a.score = 1.0;
        t.gt_boxes.push_back(a);
    }
    return t;
}

enum class PredictionLabel { kMatched, kPenalized, kIgnored };

struct Classification {
    PredictionLabel label = PredictionLabel::kPenalized;
    int gt_index = -1;  // valid when matched
    double iou = 0.0;
};

/// Label for a single prediction in isolation: matched when its best-IoU
/// ground truth reaches match_iou (ties to the lowest gt index), otherwise
/// ignored or penalized by where its center falls.
inline Classification classify_prediction(const Box& pred, const SupervisionTarget& target,
                                          double match_iou) {
    Classification c;
    double best = 0.0;
    int best_idx = -1;
    for (std::size_t i = 0; i < target.gt_boxes.size(); ++i) {
        double iou = box_iou(pred, target.gt_boxes[i]);
        if (iou > best) {
            best = iou;
            best_idx = static_cast<int>(i);
        }
    }
    if (best_idx >= 0 && best >= match_iou) {
        c.label = PredictionLabel::kMatched;
        c.gt_index = best_idx;
        c.iou = best;
        return c;
    }
    int cx = static_cast<int>(pred.cx), cy = static_cast<int>(pred.cy);
    c.label = target.ignore_at(cx, cy) ? PredictionLabel::kIgnored : PredictionLabel::kPenalized;
    return c;
}

/// Set-level labeling with one-to-one assignment: pairs are claimed in
/// descending IoU order, each ground truth at most once; surplus predictions
/// on a claimed ground truth fall through to the ignore/penalize rule.
inline std::vector<Classification> classify_predictions(std::span<const Box> preds,
                                                        const SupervisionTarget& target,
                                                        double match_iou) {
    std::vector<Classification> out(preds.size());
    struct Cand {
        double iou;
        int pred;
        int gt;
    };
    std::vector<Cand> cands;
    for (std::size_t p = 0; p < preds.size(); ++p)
        for (std::size_t g = 0; g < target.gt_boxes.size(); ++g) {
            double iou = box_iou(preds[p], target.gt_boxes[g]);
            if (iou >= match_iou) cands.push_back({iou, static_cast<int>(p), static_cast<int>(g)});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.pred != b.pred) return a.pred < b.pred;
        return a.gt < b.gt;
    });
    std::vector<char> pred_used(preds.size(), 0), gt_used(target.gt_boxes.size(), 0);
    for (const Cand& c : cands) {
        if (pred_used[c.pred] || gt_used[c.gt]) continue;
        pred_used[c.pred] = gt_used[c.gt] = 1;
        out[c.pred] = {PredictionLabel::kMatched, c.gt, c.iou};
    }
    for (std::size_t p = 0; p < preds.size(); ++p) {
        if (pred_used[p]) continue;
        int cx = static_cast<int>(preds[p].cx), cy = static_cast<int>(preds[p].cy);
        out[p].label = target.ignore_at(cx, cy) ? PredictionLabel::kIgnored
                                                : PredictionLabel::kPenalized;
    }
    return out;
}

struct LossBreakdown {
    double coord_loss = 0.0;  // mean squared error on matched box coordinates
    double obj_loss = 0.0;    // BCE of matched scores against 1
    double noobj_loss = 0.0;  // BCE of penalized scores against 0
    double total = 0.0;
    int matched = 0;
    int penalized = 0;
    int ignored = 0;
};

inline double clamp_score(double s) {
    constexpr double kEps = 1e-7;
    return std::clamp(s, kEps, 1.0 - kEps);
}

/// Matched predictions pay a coordinate MSE (normalized by the frame size)
/// plus a confidence BCE toward 1; penalized predictions pay -ln(1-score);
/// ignored predictions pay nothing. Terms are averaged per category.
inline LossBreakdown detection_loss(std::span<const Box> preds, const SupervisionTarget& target,
                                    double match_iou) {
    LossBreakdown lb;
    auto labels = classify_predictions(preds, target, match_iou);
    const double inv_w = 1.0 / std::max(1, target.width);
    const double inv_h = 1.0 / std::max(1, target.height);
    for (std::size_t p = 0; p < preds.size(); ++p) {
        const Box& pred = preds[p];
        double s = clamp_score(pred.score);
        switch (labels[p].label) {
            case PredictionLabel::kMatched: {
                const Box& gt = target.gt_boxes[static_cast<std::size_t>(labels[p].gt_index)];
                double dx = (pred.cx - gt.cx) * inv_w;
                double dy = (pred.cy - gt.cy) * inv_h;
                double dw = (pred.w - gt.w) * inv_w;
                double dh = (pred.h - gt.h) * inv_h;
                lb.coord_loss += 0.25 * (dx * dx + dy * dy + dw * dw + dh * dh);
                lb.obj_loss += -std::log(s);
                ++lb.matched;
                break;
            }
            case PredictionLabel::kPenalized:
                lb.noobj_loss += -std::log(1.0 - s);
                ++lb.penalized;
                break;
            case PredictionLabel::kIgnored:
                ++lb.ignored;
                break;
        }
    }
    if (lb.matched > 0) {
        lb.coord_loss /= lb.matched;
        lb.obj_loss /= lb.matched;
    }
    if (lb.penalized > 0) lb.noobj_loss /= lb.penalized;
    lb.total = lb.coord_loss + lb.obj_loss + lb.noobj_loss;
    return lb;
}

/// Inference filter: a predicted box survives only if its center pixel is in
/// the enlarged motion mask.
inline std::vector<Box> postprocess_inference(std::span<const Box> preds,
                                              const MotionMasks& masks) {
    std::vector<Box> out;
    for (const Box& b : preds) {
        int cx = static_cast<int>(b.cx), cy = static_cast<int>(b.cy);
        if (masks.dilated.at_clamped(cx, cy)) out.push_back(b);
    }
    return out;
}

/// Greedy IoU suppression (descending score, ties by index), bucketed on box
/// centers so near-empty grids stay cheap.
inline std::vector<Box> nms(std::span<const Box> preds, double iou_threshold = 0.5) {
    if (preds.empty()) return {};
    std::vector<int> order(preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return preds[static_cast<std::size_t>(a)].score > preds[static_cast<std::size_t>(b)].score;
    });
    double max_dim = 1.0;
    for (const Box& b : preds) max_dim = std::max({max_dim, b.w, b.h});
    const double cell = std::max(64.0, max_dim);
    struct KeyHash {
        std::size_t operator()(const std::pair<long, long>& k) const {
            return std::hash<long>()(k.first * 1000003 + k.second);
        }
    };
    std::unordered_map<std::pair<long, long>, std::vector<int>, KeyHash> buckets;
    std::vector<Box> kept;
    std::vector<int> kept_idx;
    for (int i : order) {
        const Box& b = preds[static_cast<std::size_t>(i)];
        long bx = static_cast<long>(std::floor(b.cx / cell));
        long by = static_cast<long>(std::floor(b.cy / cell));
        bool suppressed = false;
        for (long dy = -1; dy <= 1 && !suppressed; ++dy)
            for (long dx = -1; dx <= 1 && !suppressed; ++dx) {
                auto it = buckets.find({bx + dx, by + dy});
                if (it == buckets.end()) continue;
                for (int k : it->second)
                    if (box_iou(b, kept[static_cast<std::size_t>(k)]) >= iou_threshold) {
                        suppressed = true;
                        break;
                    }
            }
        if (suppressed) continue;
        buckets[{bx, by}].push_back(static_cast<int>(kept.size()));
        kept.push_back(b);
        kept_idx.push_back(i);
    }
    // restore input order among the kept boxes
    std::vector<int> perm(kept.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(),
              [&](int a, int b) { return kept_idx[static_cast<std::size_t>(a)] < kept_idx[static_cast<std::size_t>(b)]; });
    std::vector<Box> out;
    out.reserve(kept.size());
    for (int i : perm) out.push_back(kept[static_cast<std::size_t>(i)]);
    return out;
}

}  // namespace duoview
