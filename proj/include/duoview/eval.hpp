#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "duoview/core.hpp"

namespace duoview {

struct EvalConfig {
    double tiou = 0.25;              // IoU threshold for a true positive
    double window = 180.0;           // rolling evaluation window, seconds
    double annotation_period = 10.0; // spacing of annotated frames, seconds
    double count_window = 60.0;      // sliding window for counting, seconds
};

struct MatchResult {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    std::vector<std::tuple<int, int, double>> pairs;  // (pred idx, gt idx, iou)
};

/// Each prediction pairs with its largest-IoU ground truth; it counts as a
/// true positive when that IoU reaches tiou and the ground truth is still
/// unclaimed. Claim order is descending score, ties by input index, so
/// duplicates on one ground truth demote to false positives.
inline MatchResult match_detections(std::span<const Box> preds, std::span<const Box> gts,
                                    double tiou) {
    MatchResult mr;
    std::vector<int> order(preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return preds[static_cast<std::size_t>(a)].score > preds[static_cast<std::size_t>(b)].score;
    });
    std::vector<char> claimed(gts.size(), 0);
    for (int p : order) {
        double best = -1.0;
        int best_g = -1;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            double iou = box_iou(preds[static_cast<std::size_t>(p)], gts[g]);
            if (iou > best) {
                best = iou;
                best_g = static_cast<int>(g);
            }
        }
        if (best_g >= 0 && best >= tiou && !claimed[static_cast<std::size_t>(best_g)]) {
            claimed[static_cast<std::size_t>(best_g)] = 1;
            ++mr.tp;
            mr.pairs.emplace_back(p, best_g, best);
        } else {
            ++mr.fp;
        }
    }
    mr.fn = static_cast<int>(gts.size()) - mr.tp;
    return mr;
}

/// Empty-set conventions: precision is 1 with no predictions, recall is 1
/// with no ground truths.
inline std::pair<double, double> precision_recall(const MatchResult& mr) {
    double p = (mr.tp + mr.fp) > 0 ? static_cast<double>(mr.tp) / (mr.tp + mr.fp) : 1.0;
    double r = (mr.tp + mr.fn) > 0 ? static_cast<double>(mr.tp) / (mr.tp + mr.fn) : 1.0;
    return {p, r};
}

/// Predictions and ground truths of one evaluated frame.
struct FramePair {
    std::vector<Box> preds;
    std::vector<Box> gts;
};

/// Area under the PR curve: sweep the score threshold over all distinct
/// prediction scores, match per frame, apply the monotone precision
/// envelope, integrate over recall. Undefined (nullopt) without any ground
/// truth.
inline std::optional<double> average_precision(std::span<const FramePair> frames, double tiou) {
    std::size_t total_gt = 0;
    for (const auto& f : frames) total_gt += f.gts.size();
    if (total_gt == 0) return std::nullopt;

    struct Entry {
        double score;
        int frame;
        int idx;
        bool tp = false;
    };
    std::vector<Entry> entries;
    for (std::size_t fi = 0; fi < frames.size(); ++fi)
        for (std::size_t p = 0; p < frames[fi].preds.size(); ++p)
            entries.push_back({frames[fi].preds[p].score, static_cast<int>(fi),
                               static_cast<int>(p), false});
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.idx < b.idx;
    });

    // Claims accumulate from high scores down, so one pass computes each
    // prediction's TP/FP flag for every threshold that includes it.
    std::vector<std::vector<char>> claimed(frames.size());
    for (std::size_t fi = 0; fi < frames.size(); ++fi)
        claimed[fi].assign(frames[fi].gts.size(), 0);
    for (Entry& e : entries) {
        const auto& f = frames[static_cast<std::size_t>(e.frame)];
        const Box& pred = f.preds[static_cast<std::size_t>(e.idx)];
        double best = -1.0;
        int best_g = -1;
        for (std::size_t g = 0; g < f.gts.size(); ++g) {
            double iou = box_iou(pred, f.gts[g]);
            if (iou > best) {
                best = iou;
                best_g = static_cast<int>(g);
            }
        }
        if (best_g >= 0 && best >= tiou && !claimed[static_cast<std::size_t>(e.frame)][static_cast<std::size_t>(best_g)]) {
            claimed[static_cast<std::size_t>(e.frame)][static_cast<std::size_t>(best_g)] = 1;
            e.tp = true;
        }
    }

    // PR point at every threshold boundary (groups of equal scores)
    std::vector<std::pair<double, double>> pr;  // (recall, precision)
    long tp = 0, fp = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].tp)
            ++tp;
        else
            ++fp;
        bool boundary = (i + 1 == entries.size()) || (entries[i + 1].score != entries[i].score);
        if (boundary)
            pr.emplace_back(static_cast<double>(tp) / static_cast<double>(total_gt),
                            static_cast<double>(tp) / static_cast<double>(tp + fp));
    }

    // monotone envelope from the right, then a step integral over recall
    std::vector<double> env(pr.size());
    double run = 0.0;
    for (std::size_t i = pr.size(); i-- > 0;) {
        run = std::max(run, pr[i].second);
        env[i] = run;
    }
    double ap = 0.0, prev_r = 0.0;
    for (std::size_t i = 0; i < pr.size(); ++i) {
        double r = pr[i].first;
        if (r > prev_r) ap += (r - prev_r) * env[i];
        prev_r = std::max(prev_r, r);
    }
    return ap;
}

/// Keep only boxes whose centers fall inside the region, then evaluate.
inline std::vector<Box> filter_by_region(std::span<const Box> boxes, const BinaryMask& region) {
    std::vector<Box> out;
    for (const Box& b : boxes)
        if (region.at_clamped(static_cast<int>(b.cx), static_cast<int>(b.cy))) out.push_back(b);
    return out;
}

inline std::optional<double> region_restricted_eval(std::span<const FramePair> frames,
                                                    const BinaryMask& region, double tiou) {
    std::vector<FramePair> filtered(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        filtered[i].preds = filter_by_region(frames[i].preds, region);
        filtered[i].gts = filter_by_region(frames[i].gts, region);
    }
    return average_precision(filtered, tiou);
}

struct TimedFramePair {
    double t = 0.0;
    FramePair pair;
};

struct WindowPoint {
    double t = 0.0;
    double ap = 0.0;
    int frames = 0;
};

/// AP over a running window [t, t+window) recomputed every
/// annotation_period seconds; windows without annotated frames or without
/// ground truth are skipped.
inline std::vector<WindowPoint> rolling_window_ap(std::span<const TimedFramePair> timeline,
                                                  const EvalConfig& cfg,
                                                  const BinaryMask* region = nullptr) {
    std::vector<WindowPoint> series;
    if (timeline.empty()) return series;
    double t_min = timeline.front().t, t_max = timeline.back().t;
    for (const auto& tf : timeline) {
        t_min = std::min(t_min, tf.t);
        t_max = std::max(t_max, tf.t);
    }
    for (double t0 = t_min; t0 + cfg.window <= t_max + 1e-9; t0 += cfg.annotation_period) {
        std::vector<FramePair> frames;
        for (const auto& tf : timeline)
            if (tf.t >= t0 - 1e-9 && tf.t < t0 + cfg.window - 1e-9) frames.push_back(tf.pair);
        if (frames.empty()) continue;
        std::optional<double> ap = region ? region_restricted_eval(frames, *region, cfg.tiou)
                                          : average_precision(frames, cfg.tiou);
        if (!ap) continue;
        series.push_back({t0, *ap, static_cast<int>(frames.size())});
    }
    return series;
}

/// AP as a function of the IoU threshold.
inline std::vector<std::pair<double, double>> tiou_sweep(std::span<const FramePair> frames,
                                                         std::span<const double> grid) {
    std::vector<std::pair<double, double>> out;
    for (double t : grid) {
        auto ap = average_precision(frames, t);
        out.emplace_back(t, ap.value_or(0.0));
    }
    return out;
}

struct CountPoint {
    double t = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
};

struct CountingResult {
    std::vector<CountPoint> series;
    std::optional<double> rmse;  // against ground-truth counts, where given
};

/// Sliding mean/std (population) of per-frame box counts over the trailing
/// count_window; RMSE compares the sliding mean against ground-truth counts
/// at their timestamps.
inline CountingResult counting_series(std::span<const std::pair<double, int>> counts,
                                      const EvalConfig& cfg,
                                      std::span<const std::pair<double, int>> gt_counts = {}) {
    CountingResult res;
    res.series.reserve(counts.size());
    std::size_t lo = 0;
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        sum += counts[i].second;
        sq += static_cast<double>(counts[i].second) * counts[i].second;
        ++n;
        while (lo < i && counts[lo].first < counts[i].first - cfg.count_window) {
            sum -= counts[lo].second;
            sq -= static_cast<double>(counts[lo].second) * counts[lo].second;
            --n;
            ++lo;
        }
        double mean = sum / static_cast<double>(n);
        double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
        res.series.push_back({counts[i].first, mean, std::sqrt(var)});
    }
    if (!gt_counts.empty() && !res.series.empty()) {
        double acc = 0.0;
        std::size_t used = 0;
        for (const auto& [t, c] : gt_counts) {
            // nearest series point
            auto it = std::lower_bound(res.series.begin(), res.series.end(), t,
                                       [](const CountPoint& p, double v) { return p.t < v; });
            if (it == res.series.end()) it = std::prev(res.series.end());
            if (it != res.series.begin() &&
                std::abs(std::prev(it)->t - t) < std::abs(it->t - t))
                it = std::prev(it);
            double d = it->mean - c;
            acc += d * d;
            ++used;
        }
        if (used > 0) res.rmse = std::sqrt(acc / static_cast<double>(used));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Detections / ground-truth files: JSON Lines, one record per frame,
//   {"t": <sec>, "boxes": [{"cx":..,"cy":..,"w":..,"h":..,"score":..}, ...]}
// Ground truth omits the score.

struct TimedBoxes {
    double t = 0.0;
    std::vector<Box> boxes;
};

inline void write_detections_jsonl(const std::string& path,
                                   std::span<const TimedBoxes> frames, bool with_score = true) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_detections_jsonl: cannot open " + path);
    for (const auto& f : frames) {
        nlohmann::json rec;
        rec["t"] = f.t;
        nlohmann::json arr = nlohmann::json::array();
        for (const Box& b : f.boxes) {
            nlohmann::json jb = {{"cx", b.cx}, {"cy", b.cy}, {"w", b.w}, {"h", b.h}};
            if (with_score) jb["score"] = b.score;
            arr.push_back(std::move(jb));
        }
        rec["boxes"] = std::move(arr);
        out << rec.dump() << "\n";
    }
}

inline std::vector<TimedBoxes> read_detections_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_detections_jsonl: cannot open " + path);
    std::vector<TimedBoxes> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line);
        TimedBoxes tb;
        tb.t = rec.at("t").get<double>();
        for (const auto& jb : rec.at("boxes")) {
            Box b;
            b.cx = jb.at("cx").get<double>();
            b.cy = jb.at("cy").get<double>();
            b.w = jb.at("w").get<double>();
            b.h = jb.at("h").get<double>();
            b.score = jb.value("score", 1.0);
            tb.boxes.push_back(b);
        }
        out.push_back(std::move(tb));
    }
    return out;
}

inline void write_series_csv(const std::string& path, const std::string& header,
                             std::span<const std::vector<double>> rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_series_csv: cannot open " + path);
    out << header << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
}

}  // namespace duoview
