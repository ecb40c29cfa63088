#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "duoview/augment.hpp"

using namespace duoview;

namespace {

// independent clustering oracle: BFS over the pairwise adjacency matrix
int cluster_count_oracle(std::span<const Box> boxes, double inflation) {
    const std::size_t n = boxes.size();
    std::vector<std::vector<int>> adj(n);
    auto infl = [&](const Box& b) { return Box{b.cx, b.cy, b.w * inflation, b.h * inflation, 1.0}; };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            Box a = infl(boxes[i]), b = infl(boxes[j]);
            if (a.x0() < b.x1() && b.x0() < a.x1() && a.y0() < b.y1() && b.y0() < a.y1()) {
                adj[i].push_back(static_cast<int>(j));
                adj[j].push_back(static_cast<int>(i));
            }
        }
    std::vector<char> seen(n, 0);
    int comps = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (seen[s]) continue;
        ++comps;
        std::vector<int> stack{static_cast<int>(s)};
        seen[s] = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v : adj[static_cast<std::size_t>(u)])
                if (!seen[v]) {
                    seen[v] = 1;
                    stack.push_back(v);
                }
        }
    }
    return comps;
}

Frame flat_frame(int w, int h, float v) { return Frame(w, h, 1, v); }

}  // namespace

TEST_CASE("scale_factor formula") {
    AugmentConfig cfg;
    CHECK(scale_factor(100.0, 100.0, cfg) == Catch::Approx(1.0).epsilon(1e-15));
    // closed-form inversion: rho_f - rho_i = ln(2)/0.004 gives 0.75
    double d = std::log(2.0) / 0.004;
    CHECK(scale_factor(0.0, d, cfg) == Catch::Approx(0.75).margin(1e-12));
    // asymptote gamma
    CHECK(scale_factor(0.0, 1e7, cfg) == Catch::Approx(cfg.gamma).margin(1e-9));
    // strictly decreasing on a grid
    double prev = 1e18;
    for (int i = 0; i < 1000; ++i) {
        double v = scale_factor(0.0, i * 2.0, cfg);
        CHECK(v < prev);
        CHECK(v > cfg.gamma);
        prev = v;
    }
}

TEST_CASE("cluster_boxes") {
    std::vector<Box> one = {{10, 10, 4, 4, 1}};
    CHECK(cluster_boxes(one, 1.5).size() == 1);

    std::vector<Box> touching = {{10, 10, 6, 6, 1}, {13, 10, 6, 6, 1}};
    CHECK(cluster_boxes(touching, 1.5).size() == 1);

    std::vector<Box> mixed = {{10, 10, 6, 6, 1}, {14, 11, 6, 6, 1}, {100, 100, 6, 6, 1}};
    auto clusters = cluster_boxes(mixed, 1.5);
    CHECK(clusters.size() == 2);
    CHECK(static_cast<int>(clusters.size()) == cluster_count_oracle(mixed, 1.5));

    // random instances against the BFS oracle
    Pcg32 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Box> boxes;
        int n = 2 + static_cast<int>(rng.next_below(8));
        for (int i = 0; i < n; ++i)
            boxes.push_back({rng.uniform(0, 60), rng.uniform(0, 60), rng.uniform(2, 10),
                             rng.uniform(2, 10), 1.0});
        CHECK(static_cast<int>(cluster_boxes(boxes, 1.5).size()) ==
              cluster_count_oracle(boxes, 1.5));
    }
}

TEST_CASE("extract_crops isolated box") {
    Frame f = flat_frame(100, 100, 0.3f);
    std::vector<Box> boxes = {{50, 50, 10, 12, 1}};
    AugmentConfig cfg;
    cfg.crops_per_frame = 1;
    Pcg32 rng(1);
    auto crops = extract_crops(f, boxes, cfg, rng);
    REQUIRE(crops.size() == 1);
    // box extent plus the 2 px margin
    CHECK(crops[0].image.width == 14);
    CHECK(crops[0].image.height == 16);
    REQUIRE(crops[0].boxes.size() == 1);
    CHECK(crops[0].boxes[0].cx == Catch::Approx(50.0 - 43.0));

    CHECK(extract_crops(f, {}, cfg, rng).empty());
}

TEST_CASE("transform_crop identity is translation") {
    Crop crop;
    crop.image = flat_frame(20, 30, 0.5f);
    crop.boxes = {{10, 15, 6, 10, 1.0}};
    Point frame_center{100, 100};
    crop.source_center = {150, 100};
    crop.source_center_polar = to_polar(crop.source_center, frame_center);

    AugmentConfig cfg;
    cfg.beta = 0.0;  // scale alpha+gamma = 1 at any radius
    Point anchor{60, 40};
    // same angle: anchor on the same ray from the center
    Point anchor_same_ray{170, 100};
    auto [patch, boxes] = transform_crop(crop, anchor_same_ray, cfg, frame_center);
    REQUIRE(boxes.size() == 1);
    CHECK(boxes[0].w == Catch::Approx(6.0).margin(1e-9));
    CHECK(boxes[0].h == Catch::Approx(10.0).margin(1e-9));
    CHECK(boxes[0].cx == Catch::Approx(anchor_same_ray.x).margin(1e-9));
    (void)anchor;
}

TEST_CASE("transform_crop quarter turn swaps extents") {
    Crop crop;
    crop.image = flat_frame(16, 16, 0.5f);
    crop.boxes = {{8, 8, 4, 8, 1.0}};
    Point frame_center{100, 100};
    crop.source_center = {150, 100};  // theta = 0
    crop.source_center_polar = to_polar(crop.source_center, frame_center);

    AugmentConfig cfg;
    cfg.beta = 0.0;
    Point anchor{100, 150};  // theta = +pi/2
    auto [patch, boxes] = transform_crop(crop, anchor, cfg, frame_center);
    REQUIRE(boxes.size() == 1);
    CHECK(boxes[0].w == Catch::Approx(8.0).margin(1e-9));
    CHECK(boxes[0].h == Catch::Approx(4.0).margin(1e-9));
}

TEST_CASE("transform_crop matches the corner oracle") {
    Crop crop;
    crop.image = flat_frame(10, 10, 0.5f);
    Box b{4.0, 6.0, 1.0, 1.0, 1.0};
    crop.boxes = {b};
    Point frame_center{0, 0};
    crop.source_center = {200, 0};
    crop.source_center_polar = to_polar(crop.source_center, frame_center);

    AugmentConfig cfg;
    // pick an anchor whose radius gives scale 0.75 and a 30 degree turn
    double d = std::log(2.0) / 0.004;
    double rho_f = crop.source_center_polar.rho + d;
    double ang = 30.0 * 3.14159265358979323846 / 180.0;
    Point anchor{rho_f * std::cos(ang), rho_f * std::sin(ang)};
    auto [patch, boxes] = transform_crop(crop, anchor, cfg, frame_center);
    REQUIRE(boxes.size() == 1);

    // oracle: explicit 2x2 rotation+scale on the corners about the crop center
    double s = 0.75, c = std::cos(ang), sn = std::sin(ang);
    double x0 = 1e18, x1 = -1e18, y0 = 1e18, y1 = -1e18;
    for (Point corner : box_corners(b)) {
        double rx = corner.x - 5.0, ry = corner.y - 5.0;
        double tx = s * (c * rx - sn * ry) + anchor.x;
        double ty = s * (sn * rx + c * ry) + anchor.y;
        x0 = std::min(x0, tx);
        x1 = std::max(x1, tx);
        y0 = std::min(y0, ty);
        y1 = std::max(y1, ty);
    }
    CHECK(boxes[0].x0() == Catch::Approx(x0).margin(1e-9));
    CHECK(boxes[0].x1() == Catch::Approx(x1).margin(1e-9));
    CHECK(boxes[0].y0() == Catch::Approx(y0).margin(1e-9));
    CHECK(boxes[0].y1() == Catch::Approx(y1).margin(1e-9));
}

TEST_CASE("seamless blend no-op on identical content") {
    Frame target(40, 40, 1);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x) target.at(x, y) = 0.2f + 0.01f * ((x * 3 + y) % 7);
    WarpedPatch patch;
    patch.image = Frame(10, 10, 1);
    patch.valid = BinaryMask(10, 10, true);
    patch.x0 = 12;
    patch.y0 = 14;
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) patch.image.at(x, y) = target.at(12 + x, 14 + y);
    auto result = seamless_blend(target, patch);
    CHECK(result.stats.converged);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x)
            CHECK(std::abs(result.frame.at(x, y) - target.at(x, y)) < 1e-6f);
}

TEST_CASE("seamless blend constant patch vs dense solve") {
    // 5x5 constant patch on a constant background: solve the 25-unknown
    // Poisson system directly and compare
    const float bg = 0.25f, fg = 0.9f;
    Frame target(20, 20, 1, bg);
    WarpedPatch patch;
    patch.image = Frame(5, 5, 1, fg);
    patch.valid = BinaryMask(5, 5, true);
    patch.x0 = 7;
    patch.y0 = 7;
    auto result = seamless_blend(target, patch, 20000, 1e-7);
    CHECK(result.stats.converged);

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(25, 25);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(25);
    auto idx = [](int x, int y) { return y * 5 + x; };
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            int i = idx(x, y);
            A(i, i) = 4.0;
            const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
            for (int k = 0; k < 4; ++k) {
                int nx = x + dx[k], ny = y + dy[k];
                // constant guidance: zero gradient everywhere
                if (nx >= 0 && nx < 5 && ny >= 0 && ny < 5)
                    A(i, idx(nx, ny)) -= 1.0;
                else
                    rhs(i) += bg;
            }
        }
    Eigen::VectorXd sol = A.fullPivLu().solve(rhs);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x)
            CHECK(std::abs(result.frame.at(7 + x, 7 + y) - sol(idx(x, y))) < 1e-3);
    // constant patch on constant background washes out to the background
    CHECK(std::abs(result.frame.at(9, 9) - bg) < 1e-3);
}

TEST_CASE("blend residual is non-increasing across sweeps") {
    Pcg32 rng(23);
    Frame target(30, 30, 1);
    for (auto& v : target.data) v = static_cast<float>(rng.next_unit());
    WarpedPatch patch;
    patch.image = Frame(8, 8, 1);
    for (auto& v : patch.image.data) v = static_cast<float>(rng.next_unit());
    patch.valid = BinaryMask(8, 8, true);
    patch.x0 = 10;
    patch.y0 = 10;
    // run sweep-by-sweep via the max_sweeps knob and track the residual
    double prev = 1e18;
    for (int sweeps = 1; sweeps <= 40; sweeps += 1) {
        auto r = seamless_blend(target, patch, sweeps, 0.0);
        CHECK(r.stats.residual <= prev + 1e-12);
        prev = r.stats.residual;
    }
}

TEST_CASE("augment_frame") {
    Pcg32 rng(31);
    Frame f(128, 128, 1, 0.3f);
    // one "player" blob in the overlap area
    for (int y = 30; y < 40; ++y)
        for (int x = 30; x < 36; ++x) f.at(x, y) = 0.8f;
    std::vector<Box> boxes = {{33, 35, 6, 10, 1.0}};

    AugmentConfig cfg;
    cfg.crops_per_frame = 2;
    cfg.anchor_region = BinaryMask(128, 128);
    for (int y = 70; y < 120; ++y)
        for (int x = 20; x < 120; ++x) cfg.anchor_region.set(x, y);

    SECTION("zero crops is the identity") {
        cfg.crops_per_frame = 0;
        auto r = augment_frame(f, boxes, cfg, rng);
        CHECK(r.artificial_boxes.empty());
        CHECK(r.frame.data == f.data);
    }

    SECTION("no boxes is the identity") {
        auto r = augment_frame(f, {}, cfg, rng);
        CHECK(r.artificial_boxes.empty());
        CHECK(r.frame.data == f.data);
    }

    SECTION("pastes land in the anchor region and leave the rest untouched") {
        auto r = augment_frame(f, boxes, cfg, rng);
        REQUIRE(!r.artificial_boxes.empty());
        for (const Box& b : r.artificial_boxes) {
            CHECK(b.score == 1.0);
            CHECK(cfg.anchor_region.at(static_cast<int>(b.cx), static_cast<int>(b.cy)));
        }
        // pixels far from any paste are untouched
        int changed_outside_region = 0;
        for (int y = 0; y < 60; ++y)
            for (int x = 0; x < 128; ++x)
                if (f.at(x, y) != r.frame.at(x, y)) ++changed_outside_region;
        CHECK(changed_outside_region == 0);
    }

    SECTION("fixed seed reproduces bit-identically") {
        Pcg32 r1(77), r2(77);
        auto a = augment_frame(f, boxes, cfg, r1);
        auto b = augment_frame(f, boxes, cfg, r2);
        CHECK(a.frame.data == b.frame.data);
        REQUIRE(a.artificial_boxes.size() == b.artificial_boxes.size());
        for (std::size_t i = 0; i < a.artificial_boxes.size(); ++i)
            CHECK(a.artificial_boxes[i].cx == b.artificial_boxes[i].cx);
    }
}

TEST_CASE("box transform round trip recovers extents at right angles") {
    Crop crop;
    crop.image = flat_frame(16, 16, 0.5f);
    crop.boxes = {{8, 8, 4, 8, 1.0}};
    Point frame_center{100, 100};
    crop.source_center = {150, 100};
    crop.source_center_polar = to_polar(crop.source_center, frame_center);
    AugmentConfig cfg;
    cfg.beta = 0.0;

    Point anchor{100, 150};  // +90 degrees
    auto [patch, fwd] = transform_crop(crop, anchor, cfg, frame_center);
    REQUIRE(fwd.size() == 1);

    Crop back_crop;
    back_crop.image = flat_frame(16, 16, 0.5f);
    back_crop.boxes = {Box{8.0, 8.0, fwd[0].w, fwd[0].h, 1.0}};
    back_crop.source_center = anchor;
    back_crop.source_center_polar = to_polar(anchor, frame_center);
    auto [patch2, back] = transform_crop(back_crop, crop.source_center, cfg, frame_center);
    REQUIRE(back.size() == 1);
    CHECK(back[0].w == Catch::Approx(4.0).margin(1e-6));
    CHECK(back[0].h == Catch::Approx(8.0).margin(1e-6));
}

TEST_CASE("fill_polygon") {
    std::vector<Point> square = {{2, 2}, {10, 2}, {10, 10}, {2, 10}};
    auto m = fill_polygon(16, 16, square);
    CHECK(m.at(5, 5));
    CHECK_FALSE(m.at(12, 12));
    CHECK_FALSE(m.at(0, 0));
    CHECK(m.count() == 64);  // pixel centers strictly inside
}
