#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "duoview/core.hpp"
#include "duoview/image_io.hpp"
#include "duoview/rng.hpp"

using namespace duoview;

namespace {

// independent IoU oracle: rasterize both boxes on a fine grid
double rasterized_iou(const Box& a, const Box& b, int res = 400) {
    double x0 = std::min(a.x0(), b.x0()), x1 = std::max(a.x1(), b.x1());
    double y0 = std::min(a.y0(), b.y0()), y1 = std::max(a.y1(), b.y1());
    auto inside = [](const Box& bx, double x, double y) {
        return x >= bx.x0() && x < bx.x1() && y >= bx.y0() && y < bx.y1();
    };
    long inter = 0, uni = 0;
    for (int i = 0; i < res; ++i)
        for (int j = 0; j < res; ++j) {
            double x = x0 + (x1 - x0) * (i + 0.5) / res;
            double y = y0 + (y1 - y0) * (j + 0.5) / res;
            bool ia = inside(a, x, y), ib = inside(b, x, y);
            inter += ia && ib;
            uni += ia || ib;
        }
    return uni ? static_cast<double>(inter) / uni : 0.0;
}

}  // namespace

TEST_CASE("to_polar axis-aligned offsets") {
    Point c{640, 640};
    auto p = to_polar({650, 640}, c);
    CHECK(p.rho == Catch::Approx(10.0));
    CHECK(p.theta == Catch::Approx(0.0));

    auto o = to_polar(c, c);
    CHECK(o.rho == 0.0);
    CHECK(o.theta == 0.0);

    // y-down convention: a point above the center has negative theta
    auto up = to_polar({640, 630}, c);
    CHECK(up.rho == Catch::Approx(10.0));
    CHECK(up.theta == Catch::Approx(std::atan2(-10.0, 0.0)));
    CHECK(up.theta == Catch::Approx(-1.5707963267948966));
}

TEST_CASE("to_polar round trip") {
    Pcg32 rng(42);
    Point c{321.5, 200.25};
    for (int i = 0; i < 200; ++i) {
        Point p{rng.uniform(-1000, 1000), rng.uniform(-1000, 1000)};
        Point back = from_polar(to_polar(p, c), c);
        CHECK(std::abs(back.x - p.x) < 1e-9);
        CHECK(std::abs(back.y - p.y) < 1e-9);
    }
}

TEST_CASE("box_iou basics") {
    Box a{10, 10, 4, 6, 1.0};
    CHECK(box_iou(a, a) == Catch::Approx(1.0));
    Box far{100, 100, 4, 6, 1.0};
    CHECK(box_iou(a, far) == 0.0);

    // unit squares offset by half a side: IoU 1/3
    Box u1{0, 0, 1, 1, 1.0}, u2{0.5, 0, 1, 1, 1.0};
    CHECK(box_iou(u1, u2) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(rasterized_iou(u1, u2) == Catch::Approx(1.0 / 3.0).margin(5e-3));
}

TEST_CASE("box_iou properties") {
    Pcg32 rng(7);
    for (int i = 0; i < 300; ++i) {
        Box a{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(0.1, 8), rng.uniform(0.1, 8),
              1.0};
        Box b{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(0.1, 8), rng.uniform(0.1, 8),
              1.0};
        double ab = box_iou(a, b), ba = box_iou(b, a);
        CHECK(ab == Catch::Approx(ba));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0 + 1e-12);
    }
}

TEST_CASE("enclosing_axis_aligned") {
    std::vector<Point> rect = {{1, 2}, {5, 2}, {5, 8}, {1, 8}};
    auto b = enclosing_axis_aligned(rect);
    REQUIRE(b);
    CHECK(b->x0() == Catch::Approx(1.0));
    CHECK(b->y1() == Catch::Approx(8.0));

    // idempotent on axis-aligned boxes
    auto corners = box_corners(*b);
    auto again = enclosing_axis_aligned(std::span<const Point>(corners.data(), 4));
    REQUIRE(again);
    CHECK(again->cx == Catch::Approx(b->cx));
    CHECK(again->w == Catch::Approx(b->w));

    // unit square rotated 45 degrees encloses into side sqrt(2)
    double s = std::sqrt(0.5);
    std::vector<Point> rot = {{0, s}, {s, 0}, {0, -s}, {-s, 0}};
    auto rb = enclosing_axis_aligned(rot);
    REQUIRE(rb);
    CHECK(rb->w == Catch::Approx(std::sqrt(2.0)));
    CHECK(rb->h == Catch::Approx(std::sqrt(2.0)));

    std::vector<Point> degen = {{3, 3}, {3, 3}, {3, 3}, {3, 3}};
    CHECK_FALSE(enclosing_axis_aligned(degen));
    CHECK_THROWS_AS(enclosing_axis_aligned(std::span<const Point>{}), std::invalid_argument);
}

TEST_CASE("binary mask bit ops") {
    BinaryMask m(70, 3);
    m.set(0, 0);
    m.set(69, 2);
    CHECK(m.count() == 2);
    CHECK(m.at(0, 0));
    CHECK(m.at(69, 2));
    CHECK_FALSE(m.at(1, 0));
    CHECK_FALSE(m.at_clamped(-1, 0));
    BinaryMask all(70, 3, true);
    CHECK(all.count() == 210);
    CHECK(m.subset_of(all));
    CHECK_FALSE(all.subset_of(m));
}

TEST_CASE("frame and luma") {
    Frame f(4, 3, 3, 0.5f);
    CHECK(f.data.size() == 36);
    f.at(1, 1, 0) = 1.0f;
    f.at(1, 1, 1) = 0.0f;
    f.at(1, 1, 2) = 0.0f;
    CHECK(luma(f, 1, 1) == Catch::Approx(0.299));
    CHECK_THROWS_AS(Frame(0, 3, 1), std::invalid_argument);
    CHECK_THROWS_AS(Frame(3, 3, 2), std::invalid_argument);
}

TEST_CASE("image io round trips") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "duoview_io_test";
    fs::create_directories(dir);

    Frame gray(31, 17, 1);
    Pcg32 rng(5);
    for (auto& v : gray.data) v = static_cast<float>(rng.next_unit());
    Frame rgb(13, 9, 3);
    for (auto& v : rgb.data) v = static_cast<float>(rng.next_unit());

    for (const char* ext : {".pgm", ".png"}) {
        std::string path = (dir / (std::string("g") + ext)).string();
        save_image(gray, path);
        Frame back = load_image(path);
        REQUIRE(back.width == gray.width);
        REQUIRE(back.channels == 1);
        for (std::size_t i = 0; i < gray.data.size(); ++i)
            CHECK(std::abs(back.data[i] - gray.data[i]) <= 0.5f / 255.0f + 1e-6f);
    }
    for (const char* ext : {".ppm", ".png"}) {
        std::string path = (dir / (std::string("c") + ext)).string();
        save_image(rgb, path);
        Frame back = load_image(path);
        REQUIRE(back.channels == 3);
        for (std::size_t i = 0; i < rgb.data.size(); ++i)
            CHECK(std::abs(back.data[i] - rgb.data[i]) <= 0.5f / 255.0f + 1e-6f);
    }

    BinaryMask m(23, 11);
    for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 23; ++x)
            if ((x * 7 + y * 3) % 5 == 0) m.set(x, y);
    std::string mp = (dir / "m.pgm").string();
    save_mask_pgm(m, mp);
    CHECK(load_mask_pgm(mp) == m);

    fs::remove_all(dir);
}
