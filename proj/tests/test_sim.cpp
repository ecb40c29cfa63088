#include <catch2/catch_amalgamated.hpp>

#include "duoview/sim.hpp"

using namespace duoview;

namespace {

SimConfig short_config() {
    SimConfig cfg;
    cfg.duration = 4.0;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("simulator is deterministic per seed") {
    SimConfig cfg = short_config();
    Simulator a(cfg), b(cfg);
    CHECK(a.student_frame(7).data == b.student_frame(7).data);
    CHECK(a.teacher_frame(7).data == b.teacher_frame(7).data);
    auto ga = a.student_gt(7), gb = b.student_gt(7);
    REQUIRE(ga.size() == gb.size());
    for (std::size_t i = 0; i < ga.size(); ++i) CHECK(ga[i].cx == gb[i].cx);

    cfg.seed = 6;
    Simulator c(cfg);
    CHECK(a.student_frame(7).data != c.student_frame(7).data);
}

TEST_CASE("every player gets a student-view box") {
    SimConfig cfg = short_config();
    Simulator sim(cfg);
    CHECK(sim.student_gt(0).size() == static_cast<std::size_t>(cfg.player_count));
}

TEST_CASE("stationary player keeps an identical box") {
    SimConfig cfg = short_config();
    cfg.speed_min = cfg.speed_max = 0.0;
    Simulator sim(cfg);
    auto b0 = sim.student_gt(0), b1 = sim.student_gt(20);
    REQUIRE(b0.size() == b1.size());
    for (std::size_t i = 0; i < b0.size(); ++i) {
        CHECK(b0[i].cx == Catch::Approx(b1[i].cx).margin(1e-12));
        CHECK(b0[i].w == Catch::Approx(b1[i].w).margin(1e-12));
    }
}

TEST_CASE("rendered players clear the ViBe match radius") {
    SimConfig cfg = short_config();
    Simulator sim(cfg);
    Frame f = sim.student_frame(3);
    auto boxes = sim.student_gt(3);
    const float bg = static_cast<float>(cfg.background_field);
    const float radius = 20.0f / 255.0f;
    int strong = 0, total = 0;
    for (const Box& b : boxes) {
        // probe the box center: it is always on the body
        int x = static_cast<int>(b.cx), y = static_cast<int>(b.cy);
        ++total;
        if (std::fabs(f.at(x, y) - bg) > radius) ++strong;
    }
    CHECK(strong == total);
}

TEST_CASE("homography projects teacher boxes onto student boxes") {
    SimConfig cfg = short_config();
    Simulator sim(cfg);
    ViewMap vm = sim.view_map();
    int checked = 0;
    for (int idx = 0; idx < sim.frame_count(); idx += 6) {
        auto tb = sim.teacher_gt(idx);
        auto sb = sim.student_gt(idx);
        for (const Box& b : tb) {
            auto p = vm.project_box_to_student(b);
            REQUIRE(p);
            double best = 0.0;
            for (const Box& s : sb) best = std::max(best, box_iou(*p, s));
            CHECK(best >= 0.7);
            ++checked;
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("overlap and field fractions match the physical setup") {
    SimConfig cfg = short_config();
    Simulator sim(cfg);
    auto part = build_region_partition(sim.view_map(), cfg.teacher_width, cfg.teacher_height_px,
                                       cfg.student_size, cfg.student_size);
    double overlap_frac =
        static_cast<double>(part.overlap.count()) / static_cast<double>(part.overlap.size());
    CHECK(overlap_frac > 0.04);
    CHECK(overlap_frac < 0.08);

    auto field = sim.field_mask();
    std::size_t on_field = 0, both = 0;
    for (int y = 0; y < field.height(); ++y)
        for (int x = 0; x < field.width(); ++x)
            if (field.at(x, y)) {
                ++on_field;
                both += part.overlap.at(x, y);
            }
    double cov = static_cast<double>(both) / static_cast<double>(on_field);
    CHECK(cov > 0.19);
    CHECK(cov < 0.25);
}

TEST_CASE("teacher oracle noise model") {
    SimConfig cfg = short_config();
    Simulator sim(cfg);

    SECTION("zero noise reproduces the ground truth") {
        auto exact = sim.teacher_oracle(3, {0.0, 0.0, 0.0});
        auto gt = sim.teacher_gt(3);
        REQUIRE(exact.size() == gt.size());
        for (std::size_t i = 0; i < gt.size(); ++i) {
            CHECK(exact[i].cx == Catch::Approx(gt[i].cx));
            CHECK(exact[i].w == Catch::Approx(gt[i].w));
        }
    }
    SECTION("drop probability one empties the output") {
        CHECK(sim.teacher_oracle(3, {0.0, 0.0, 1.0}).empty());
    }
    SECTION("center jitter displacement follows the half-normal mean") {
        // mean displacement of (N(0,s), N(0,s)) from the origin is s*sqrt(pi/2)
        const double sigma = 1.0;
        double acc = 0.0;
        int n = 0;
        for (int idx = 0; idx < sim.frame_count() && n < 10000; ++idx) {
            auto gt = sim.teacher_gt(idx);
            auto noisy = sim.teacher_oracle(idx, {sigma, 0.0, 0.0});
            REQUIRE(noisy.size() == gt.size());
            for (std::size_t i = 0; i < gt.size(); ++i) {
                acc += std::hypot(noisy[i].cx - gt[i].cx, noisy[i].cy - gt[i].cy);
                ++n;
            }
        }
        // with a limited sample keep a loose band around sigma*sqrt(pi/2) = 1.2533
        double mean = acc / n;
        CHECK(mean > 1.2533 * 0.85);
        CHECK(mean < 1.2533 * 1.15);
    }
}

TEST_CASE("field polygon encloses the field mask") {
    SimConfig cfg = short_config();
    Simulator sim(cfg);
    auto poly = sim.field_polygon();
    CHECK(poly.size() == 64);
    // the polygon's pixel center must lie inside the frame and the mask
    auto mask = sim.field_mask();
    Point center = sim.ground_to_student({0.0, 0.0});
    CHECK(mask.at(static_cast<int>(center.x), static_cast<int>(center.y)));
}

TEST_CASE("simulator rejects impossible geometry") {
    SimConfig cfg = short_config();
    cfg.fisheye_focal = 1200.0;  // field corners fall outside the image circle
    CHECK_THROWS_AS(Simulator(cfg), std::invalid_argument);
}
