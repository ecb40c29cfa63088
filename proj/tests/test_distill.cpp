#include <catch2/catch_amalgamated.hpp>

#include "duoview/pipeline.hpp"

using namespace duoview;

namespace {

TrainingExample stamped(double t) {
    TrainingExample ex;
    ex.t = t;
    return ex;
}

// tiny world so end-to-end engine tests stay fast
RunConfig tiny_config() {
    RunConfig cfg;
    cfg.seed = 9;
    cfg.sim.student_size = 320;
    cfg.sim.fisheye_focal = 100.0;
    cfg.sim.undistort_focal = 100.0;
    cfg.sim.teacher_width = 160;
    cfg.sim.teacher_height_px = 120;
    cfg.sim.teacher_focal = 205.0;
    cfg.sim.player_count = 10;
    cfg.sim.duration = 5.0;
    cfg.sim.fps = 6.0;
    cfg.distill.fps = 6.0;
    cfg.distill.swap_period = 2.0;
    cfg.student.grid.grid = 20;
    cfg.augment.crops_per_frame = 2;
    return config_from_json(config_to_json(cfg));  // normalize + validate
}

}  // namespace

TEST_CASE("online dataset window and ordering") {
    OnlineDataset ds(300.0);
    for (int t = 0; t <= 600; t += 10) ds.push(stamped(t));
    CHECK(ds.newest() == 600.0);
    CHECK(ds.oldest() >= 300.0);  // five-minute memory
    CHECK(ds.size() == 31);

    OnlineDataset one(300.0);
    one.push(stamped(5.0));
    CHECK(one.size() == 1);
    CHECK_THROWS_AS(one.push(stamped(4.0)), std::invalid_argument);
}

TEST_CASE("dataset snapshots are stable") {
    OnlineDataset ds(100.0);
    ds.push(stamped(1.0));
    ds.push(stamped(2.0));
    auto snap = ds.snapshot();
    ds.push(stamped(200.0));  // evicts both
    CHECK(snap->size() == 2);
    CHECK(ds.size() == 1);
}

TEST_CASE("replay runs are bit-reproducible") {
    RunConfig cfg = tiny_config();
    auto run_once = [&] {
        PipelineSetup p = build_sim_pipeline(cfg);
        Engine eng(*p.source, p.view, p.partition, p.settings);
        return eng.run();
    };
    RunOutputs a = run_once();
    RunOutputs b = run_once();
    REQUIRE(a.detections.size() == b.detections.size());
    for (std::size_t i = 0; i < a.detections.size(); ++i) {
        REQUIRE(a.detections[i].boxes.size() == b.detections[i].boxes.size());
        for (std::size_t k = 0; k < a.detections[i].boxes.size(); ++k) {
            CHECK(a.detections[i].boxes[k].cx == b.detections[i].boxes[k].cx);
            CHECK(a.detections[i].boxes[k].score == b.detections[i].boxes[k].score);
        }
    }
    CHECK(a.swaps == b.swaps);
    CHECK(a.final_weights == b.final_weights);
    CHECK(a.swaps >= 1);
    CHECK(a.supervised_frames == 5);
}

TEST_CASE("trainer disabled keeps the initial weights") {
    RunConfig cfg = tiny_config();
    PipelineSetup p = build_sim_pipeline(cfg);
    p.settings.trainer_enabled = false;
    Engine eng(*p.source, p.view, p.partition, p.settings);
    RunOutputs out = eng.run();
    CHECK(out.swaps == 0);
    CHECK(out.training_log.empty());
    // zero weights: every decoded score is exactly 0.5
    for (const auto& f : out.detections)
        for (const Box& b : f.boxes) CHECK(b.score == Catch::Approx(0.5));
}

TEST_CASE("offline mode trains after collection") {
    RunConfig cfg = tiny_config();
    cfg.distill.offline_epochs = 3;
    PipelineSetup p = build_sim_pipeline(cfg);
    p.settings.mode = RunMode::kOffline;
    Engine eng(*p.source, p.view, p.partition, p.settings);
    RunOutputs out = eng.run();
    CHECK(out.swaps == 1);
    CHECK(out.training_log.size() == 3);
    CHECK(out.detections.size() == static_cast<std::size_t>(out.frames));
}

TEST_CASE("wall clock mode with unpaced inference") {
    RunConfig cfg = tiny_config();
    cfg.sim.duration = 3.0;
    PipelineSetup p = build_sim_pipeline(cfg);
    p.settings.clock = ClockMode::kWall;
    p.settings.pace_realtime = false;
    Engine eng(*p.source, p.view, p.partition, p.settings);
    RunOutputs out = eng.run();
    CHECK(out.frames == 18);
    CHECK(out.frame_latencies.size() == 18);
    for (double l : out.frame_latencies) CHECK(l < 1.0);
}

TEST_CASE("blob student runs the same loop") {
    RunConfig cfg = tiny_config();
    cfg.student.kind = "blob";
    PipelineSetup p = build_sim_pipeline(cfg);
    Engine eng(*p.source, p.view, p.partition, p.settings);
    RunOutputs out = eng.run();
    CHECK(out.frames == 30);
    // blob boxes always carry score 1
    for (const auto& f : out.detections)
        for (const Box& b : f.boxes) CHECK(b.score == 1.0);
}

TEST_CASE("annotated timeline joins detections with ground truth") {
    std::vector<TimedBoxes> det, gt;
    for (int i = 0; i < 120; ++i) {
        det.push_back({i / 12.0, {}});
        gt.push_back({i / 12.0, {}});
    }
    auto tl = annotated_timeline(det, gt, 1.0, 12.0);
    REQUIRE(tl.size() == 10);
    CHECK(tl[0].t == Catch::Approx(0.0));
    CHECK(tl[1].t == Catch::Approx(1.0));
}
