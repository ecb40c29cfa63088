#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "duoview/eval.hpp"
#include "duoview/rng.hpp"

using namespace duoview;

namespace {

// Brute-force AP oracle: evaluate (P, R) by a fresh per-threshold matching at
// every distinct score, apply the monotone envelope, integrate over recall.
double ap_oracle(std::span<const FramePair> frames, double tiou) {
    std::size_t total_gt = 0;
    std::set<double> scores;
    for (const auto& f : frames) {
        total_gt += f.gts.size();
        for (const Box& p : f.preds) scores.insert(p.score);
    }
    REQUIRE(total_gt > 0);
    std::vector<std::pair<double, double>> pr;  // recall, precision
    for (auto it = scores.rbegin(); it != scores.rend(); ++it) {
        double thr = *it;
        long tp = 0, fp = 0;
        for (const auto& f : frames) {
            std::vector<Box> kept;
            for (const Box& p : f.preds)
                if (p.score >= thr) kept.push_back(p);
            MatchResult mr = match_detections(kept, f.gts, tiou);
            tp += mr.tp;
            fp += mr.fp;
        }
        pr.emplace_back(static_cast<double>(tp) / total_gt,
                        tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 1.0);
    }
    double ap = 0.0, prev_r = 0.0;
    for (std::size_t i = 0; i < pr.size(); ++i) {
        double env = 0.0;
        for (std::size_t j = i; j < pr.size(); ++j) env = std::max(env, pr[j].second);
        if (pr[i].first > prev_r) ap += (pr[i].first - prev_r) * env;
        prev_r = std::max(prev_r, pr[i].first);
    }
    return ap;
}

Box at(double cx, double cy, double score = 1.0) { return {cx, cy, 10, 10, score}; }

}  // namespace

TEST_CASE("match_detections") {
    std::vector<Box> gts = {at(10, 10), at(40, 40)};
    SECTION("exact predictions all match") {
        auto mr = match_detections(gts, gts, 0.5);
        CHECK(mr.tp == 2);
        CHECK(mr.fp == 0);
        CHECK(mr.fn == 0);
    }
    SECTION("duplicates on one gt demote to false positives") {
        std::vector<Box> preds = {at(10, 10, 0.9), at(10, 10, 0.8)};
        auto mr = match_detections(preds, {gts.data(), 1}, 0.5);
        CHECK(mr.tp == 1);
        CHECK(mr.fp == 1);
    }
    SECTION("disjoint boxes") {
        std::vector<Box> preds = {at(100, 100)};
        auto mr = match_detections(preds, {gts.data(), 1}, 0.5);
        CHECK(mr.tp == 0);
        CHECK(mr.fp == 1);
        CHECK(mr.fn == 1);
    }
    SECTION("claim order follows score") {
        // the lower-scored pred has the better IoU but the higher one claims first
        std::vector<Box> preds = {{12, 10, 10, 10, 0.9}, {10, 10, 10, 10, 0.2}};
        auto mr = match_detections(preds, {gts.data(), 1}, 0.25);
        CHECK(mr.tp == 1);
        REQUIRE(mr.pairs.size() == 1);
        CHECK(std::get<0>(mr.pairs[0]) == 0);
    }
}

TEST_CASE("precision_recall conventions") {
    CHECK(precision_recall({8, 2, 2, {}}) == std::pair<double, double>{0.8, 0.8});
    auto [p0, r0] = precision_recall({0, 0, 5, {}});
    CHECK(p0 == 1.0);  // no predictions
    CHECK(r0 == 0.0);
    auto [p1, r1] = precision_recall({0, 3, 0, {}});
    CHECK(p1 == 0.0);
    CHECK(r1 == 1.0);  // no ground truths
}

TEST_CASE("average_precision worked example") {
    // 2 gts; preds: score .9 TP, .8 FP, .7 TP -> AP = 0.5 + 0.5 * 2/3
    std::vector<FramePair> frames(1);
    frames[0].gts = {at(10, 10), at(50, 50)};
    frames[0].preds = {at(10, 10, 0.9), at(100, 100, 0.8), at(50, 50, 0.7)};
    auto ap = average_precision(frames, 0.5);
    REQUIRE(ap);
    CHECK(*ap == Catch::Approx(0.5 + 0.5 * (2.0 / 3.0)).margin(1e-12));
    CHECK(*ap == Catch::Approx(ap_oracle(frames, 0.5)).margin(1e-12));
}

TEST_CASE("average_precision endpoints") {
    std::vector<FramePair> frames(1);
    frames[0].gts = {at(10, 10)};
    SECTION("perfect detection") {
        frames[0].preds = {at(10, 10, 0.7)};
        CHECK(*average_precision(frames, 0.5) == Catch::Approx(1.0));
    }
    SECTION("no predictions") {
        CHECK(*average_precision(frames, 0.5) == Catch::Approx(0.0));
    }
    SECTION("no ground truth is undefined") {
        frames[0].gts.clear();
        frames[0].preds = {at(10, 10, 0.7)};
        CHECK_FALSE(average_precision(frames, 0.5));
    }
}

TEST_CASE("average_precision equals the brute-force oracle") {
    Pcg32 rng(101);
    for (int trial = 0; trial < 40; ++trial) {
        int nframes = 1 + static_cast<int>(rng.next_below(3));
        std::vector<FramePair> frames(static_cast<std::size_t>(nframes));
        std::size_t gt_total = 0;
        for (auto& f : frames) {
            int ng = static_cast<int>(rng.next_below(4));
            int np = static_cast<int>(rng.next_below(6));
            for (int g = 0; g < ng; ++g)
                f.gts.push_back({rng.uniform(0, 80), rng.uniform(0, 80), rng.uniform(4, 14),
                                 rng.uniform(4, 14), 1.0});
            for (int p = 0; p < np; ++p) {
                // half the predictions hover near a gt
                if (!f.gts.empty() && rng.next_below(2) == 0) {
                    const Box& g = f.gts[rng.next_below(static_cast<std::uint32_t>(f.gts.size()))];
                    f.preds.push_back({g.cx + rng.uniform(-4, 4), g.cy + rng.uniform(-4, 4),
                                       g.w * rng.uniform(0.7, 1.3), g.h * rng.uniform(0.7, 1.3),
                                       rng.uniform(0.05, 1.0)});
                } else {
                    f.preds.push_back({rng.uniform(0, 80), rng.uniform(0, 80), rng.uniform(4, 14),
                                       rng.uniform(4, 14), rng.uniform(0.05, 1.0)});
                }
            }
            gt_total += f.gts.size();
        }
        if (gt_total == 0) continue;
        for (double tiou : {0.25, 0.5}) {
            auto fast = average_precision(frames, tiou);
            REQUIRE(fast);
            CHECK(*fast == Catch::Approx(ap_oracle(frames, tiou)).margin(1e-12));
        }
    }
}

TEST_CASE("ap invariant under monotone score rescaling") {
    Pcg32 rng(55);
    std::vector<FramePair> frames(2);
    for (auto& f : frames) {
        for (int g = 0; g < 3; ++g)
            f.gts.push_back({rng.uniform(0, 80), rng.uniform(0, 80), 8, 8, 1.0});
        for (int p = 0; p < 5; ++p)
            f.preds.push_back({f.gts[p % 3].cx + rng.uniform(-3, 3), f.gts[p % 3].cy,
                               8, 8, rng.uniform(0.1, 0.9)});
    }
    auto base = average_precision(frames, 0.25);
    auto rescaled = frames;
    for (auto& f : rescaled)
        for (auto& p : f.preds) p.score = 0.1 + 0.5 * std::tanh(3.0 * p.score);
    auto after = average_precision(rescaled, 0.25);
    REQUIRE(base);
    REQUIRE(after);
    CHECK(*base == Catch::Approx(*after).margin(1e-12));
}

TEST_CASE("region restricted evaluation") {
    BinaryMask left(100, 100), empty(100, 100);
    for (int y = 0; y < 100; ++y)
        for (int x = 0; x < 50; ++x) left.set(x, y);
    BinaryMask full(100, 100, true);

    std::vector<FramePair> frames(1);
    frames[0].gts = {at(20, 50), at(80, 50)};
    frames[0].preds = {at(20, 50, 0.9), at(80, 50, 0.3)};

    auto unrestricted = average_precision(frames, 0.5);
    auto full_ap = region_restricted_eval(frames, full, 0.5);
    REQUIRE(unrestricted);
    REQUIRE(full_ap);
    CHECK(*unrestricted == Catch::Approx(*full_ap));
    CHECK_FALSE(region_restricted_eval(frames, empty, 0.5));

    // left and right restrict to disjoint sets; each is perfect
    BinaryMask right(100, 100);
    for (int y = 0; y < 100; ++y)
        for (int x = 50; x < 100; ++x) right.set(x, y);
    CHECK(*region_restricted_eval(frames, left, 0.5) == Catch::Approx(1.0));
    CHECK(*region_restricted_eval(frames, right, 0.5) == Catch::Approx(1.0));
}

TEST_CASE("rolling window series") {
    // perfect detector, annotated every 10 s over 600 s, 180 s window
    std::vector<TimedFramePair> timeline;
    for (int k = 0; k <= 59; ++k) {
        TimedFramePair tf;
        tf.t = 10.0 * k;
        tf.pair.gts = {at(30, 30)};
        tf.pair.preds = {at(30, 30, 0.9)};
        timeline.push_back(tf);
    }
    EvalConfig cfg;
    auto series = rolling_window_ap(timeline, cfg);
    // floor((590 - 180)/10) + 1 points
    CHECK(series.size() == 42);
    CHECK(series.front().frames == 18);  // 18 annotated frames in the first window
    for (const auto& p : series) CHECK(p.ap == Catch::Approx(1.0));
}

TEST_CASE("tiou sweep is non-increasing") {
    Pcg32 rng(77);
    std::vector<FramePair> frames(3);
    for (auto& f : frames) {
        for (int g = 0; g < 4; ++g)
            f.gts.push_back({rng.uniform(10, 90), rng.uniform(10, 90), 10, 10, 1.0});
        for (const Box& g : f.gts)
            f.preds.push_back({g.cx + rng.uniform(-3, 3), g.cy + rng.uniform(-3, 3), 10.5, 9.5,
                               rng.uniform(0.3, 1.0)});
    }
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(0.05 * i);
    auto sweep = tiou_sweep(frames, grid);
    for (std::size_t i = 1; i < sweep.size(); ++i)
        CHECK(sweep[i].second <= sweep[i - 1].second + 1e-12);
    CHECK(sweep.front().second == Catch::Approx(1.0));  // tiou 0 with overlapping preds
    CHECK(sweep.back().second == Catch::Approx(0.0));   // tiou 1 with imperfect boxes
}

TEST_CASE("counting series") {
    EvalConfig cfg;
    cfg.count_window = 60.0;
    SECTION("constant counts") {
        std::vector<std::pair<double, int>> counts, gts;
        for (int i = 0; i < 200; ++i) counts.push_back({i * 0.5, 10});
        gts = {{30.0, 10}, {60.0, 10}};
        auto r = counting_series(counts, cfg, gts);
        CHECK(r.series.back().mean == Catch::Approx(10.0));
        CHECK(r.series.back().stddev == Catch::Approx(0.0));
        REQUIRE(r.rmse);
        CHECK(*r.rmse == Catch::Approx(0.0));
    }
    SECTION("alternating counts") {
        std::vector<std::pair<double, int>> counts;
        for (int i = 0; i < 240; ++i) counts.push_back({i * 0.5, i % 2 ? 11 : 9});
        auto r = counting_series(counts, cfg);
        CHECK(r.series.back().mean == Catch::Approx(10.0).margin(0.02));
        CHECK(r.series.back().stddev == Catch::Approx(1.0).margin(0.01));
    }
    SECTION("window mean equals the brute-force average") {
        Pcg32 rng(3);
        std::vector<std::pair<double, int>> counts;
        for (int i = 0; i < 300; ++i)
            counts.push_back({i * 0.7, static_cast<int>(rng.next_below(30))});
        auto r = counting_series(counts, cfg);
        for (std::size_t i = 50; i < counts.size(); i += 37) {
            double sum = 0;
            int n = 0;
            for (const auto& [t, c] : counts)
                if (t >= counts[i].first - cfg.count_window && t <= counts[i].first) {
                    sum += c;
                    ++n;
                }
            CHECK(r.series[i].mean == Catch::Approx(sum / n).margin(1e-9));
        }
    }
}

TEST_CASE("detections jsonl round trip") {
    namespace fs = std::filesystem;
    auto path = (fs::temp_directory_path() / "duoview_dets.jsonl").string();
    std::vector<TimedBoxes> frames = {{0.0, {at(10, 20, 0.5), at(30, 40, 0.25)}},
                                      {1.5, {}},
                                      {3.0, {at(5, 5, 1.0)}}};
    write_detections_jsonl(path, frames);
    auto back = read_detections_jsonl(path);
    REQUIRE(back.size() == 3);
    CHECK(back[0].t == 0.0);
    REQUIRE(back[0].boxes.size() == 2);
    CHECK(back[0].boxes[1].score == Catch::Approx(0.25));
    CHECK(back[1].boxes.empty());

    // ground truth omits scores; reading defaults them to 1
    write_detections_jsonl(path, frames, false);
    auto gt = read_detections_jsonl(path);
    CHECK(gt[0].boxes[1].score == 1.0);
    fs::remove(path);
}
