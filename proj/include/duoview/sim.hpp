#pragma once

#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "duoview/core.hpp"
#include "duoview/geometry.hpp"
#include "duoview/rng.hpp"

namespace duoview {

/// Synthetic dual-camera world: players walking waypoint paths on a planar
/// field, rendered into a wide fisheye student view and a narrow pinhole
/// teacher view, with exact ground-truth boxes in both. The cameras sit on
/// one pole at the side of the field.
struct SimConfig {
    double field_length = 100.0;  // meters, along world x
    double field_width = 60.0;    // meters, along world y
    double pole_offset = 5.0;     // meters outside the near sideline
    double student_height = 9.5;  // fisheye camera height
    double teacher_height = 9.8;  // thermal-stand-in camera height

    int student_size = 1280;        // square fisheye frame
    double fisheye_focal = 400.0;   // pixels per radian, equidistant
    double undistort_focal = 400.0;

    int teacher_width = 640;
    int teacher_height_px = 480;
    double teacher_focal = 820.0;
    double teacher_pitch_deg = 28.0;  // down from horizontal, toward the field

    int player_count = 24;
    double player_height = 1.8;   // meters
    double player_radius = 0.25;  // meters
    double speed_min = 0.8;       // m/s
    double speed_max = 2.2;

    double background_field = 0.36;
    double background_ground = 0.30;
    double background_sky = 0.06;
    double noise_sigma = 1.0 / 255.0;

    double duration = 600.0;  // seconds of simulated video
    double fps = 12.0;
    std::uint64_t seed = 1;

    // teacher imperfection
    double oracle_center_sigma = 1.0;  // pixels
    double oracle_size_sigma = 0.05;   // relative
    double oracle_drop_prob = 0.02;
};

struct TeacherNoise {
    double center_sigma = 1.0;
    double size_sigma = 0.05;
    double drop_prob = 0.02;
};

struct PlayerState {
    Point ground;  // meters
    double speed = 0.0;
};

class Simulator {
public:
    explicit Simulator(const SimConfig& cfg) : cfg_(cfg) {
        if (cfg_.player_count < 1 || cfg_.duration <= 0.0 || cfg_.fps <= 0.0)
            throw std::invalid_argument("Simulator: bad config");
        pole_y_ = -(cfg_.field_width / 2.0 + cfg_.pole_offset);
        const double d = cfg_.teacher_pitch_deg * kPi / 180.0;
        fwd_ = {0.0, std::cos(d), -std::sin(d)};
        right_ = {1.0, 0.0, 0.0};
        down_ = {0.0, -std::sin(d), -std::cos(d)};
        check_coverage();
        build_paths();
        build_background();
        build_noise_pool();
    }

    const SimConfig& config() const { return cfg_; }
    int frame_count() const { return static_cast<int>(cfg_.duration * cfg_.fps + 0.5); }
    double frame_time(int idx) const { return idx / cfg_.fps; }

    FisheyeModel lens() const {
        FisheyeModel m;
        m.focal = cfg_.fisheye_focal;
        m.center = {cfg_.student_size / 2.0, cfg_.student_size / 2.0};
        m.max_theta = kPi / 2.0;
        m.undistort_focal = cfg_.undistort_focal;
        return m;
    }

    /// Exact ground-plane homography from the teacher image to the student's
    /// undistorted pinhole plane (both are pinhole views of the plane z=0).
    Homography homography() const {
        Eigen::Matrix3d gt = ground_to_view(teacher_center(), right_, down_, fwd_,
                                            cfg_.teacher_focal, cfg_.teacher_width / 2.0,
                                            cfg_.teacher_height_px / 2.0);
        Eigen::Matrix3d gs = ground_to_view(student_center(), {1, 0, 0}, {0, 1, 0}, {0, 0, -1},
                                            cfg_.undistort_focal, cfg_.student_size / 2.0,
                                            cfg_.student_size / 2.0);
        return Homography::from_matrix(gs * gt.inverse());
    }

    ViewMap view_map() const { return ViewMap{homography(), lens()}; }

    std::vector<PlayerState> players_at(double t) const {
        std::vector<PlayerState> out;
        out.reserve(paths_.size());
        for (const auto& path : paths_) {
            std::size_t k = 0;
            while (k + 1 < path.size() && path[k + 1].t <= t) ++k;
            const Way& a = path[k];
            const Way& b = path[std::min(k + 1, path.size() - 1)];
            double span = std::max(1e-9, b.t - a.t);
            double u = std::clamp((t - a.t) / span, 0.0, 1.0);
            Point p{a.p.x + u * (b.p.x - a.p.x), a.p.y + u * (b.p.y - a.p.y)};
            double speed = norm(b.p - a.p) / span;
            out.push_back({p, speed});
        }
        return out;
    }

    Frame student_frame(int idx) const {
        Frame f(cfg_.student_size, cfg_.student_size, 1, 0.0f, frame_time(idx),
                CameraId::kStudent);
        const std::size_t n = f.data.size();
        const std::size_t off = noise_offset(idx);
        const std::size_t mask = noise_pool_.size() - 1;
        for (std::size_t i = 0; i < n; ++i) {
            float v = base_student_[i] + noise_pool_[(off + i) & mask];
            f.data[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        }
        auto players = players_at(frame_time(idx));
        for (int pi : student_paint_order(players))
            paint_player_student(f, players[static_cast<std::size_t>(pi)].ground, pi);
        return f;
    }

    Frame teacher_frame(int idx) const {
        Frame f(cfg_.teacher_width, cfg_.teacher_height_px, 1, 0.0f, frame_time(idx),
                CameraId::kTeacher);
        const std::size_t off = noise_offset(idx) ^ 0x5bd1e995u;
        const std::size_t mask = noise_pool_.size() - 1;
        for (std::size_t i = 0; i < f.data.size(); ++i) {
            float v = base_teacher_[i] + noise_pool_[(off + i) & mask];
            f.data[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        }
        auto players = players_at(frame_time(idx));
        for (std::size_t pi = 0; pi < players.size(); ++pi)
            paint_player_teacher(f, players[pi].ground, static_cast<int>(pi));
        return f;
    }

    /// Exact boxes of every player in the student view.
    std::vector<Box> student_gt(int idx) const {
        std::vector<Box> out;
        auto players = players_at(frame_time(idx));
        for (std::size_t pi = 0; pi < players.size(); ++pi) {
            auto e = student_ellipse(players[pi].ground, static_cast<int>(pi));
            if (e) out.push_back(e->box());
        }
        return out;
    }

    /// Exact boxes of the players visible in the teacher view.
    std::vector<Box> teacher_gt(int idx) const {
        std::vector<Box> out;
        auto players = players_at(frame_time(idx));
        for (std::size_t pi = 0; pi < players.size(); ++pi) {
            auto e = teacher_ellipse(players[pi].ground, static_cast<int>(pi));
            if (!e) continue;
            Box b = e->box();
            double x0 = std::max(0.0, b.x0()), y0 = std::max(0.0, b.y0());
            double x1 = std::min<double>(cfg_.teacher_width, b.x1());
            double y1 = std::min<double>(cfg_.teacher_height_px, b.y1());
            if (x1 - x0 <= 1.0 || y1 - y0 <= 1.0) continue;
            // partially visible players are not reported: real detectors are
            // unreliable at the frame border and a clipped box would project
            // onto a fraction of the player
            if ((x1 - x0) * (y1 - y0) < 0.92 * b.area()) continue;
            out.push_back(box_from_extent(x0, y0, x1, y1, 1.0));
        }
        return out;
    }

    /// Teacher detections: ground truth perturbed by center/size jitter and
    /// random drops, standing in for an imperfect detector network.
    std::vector<Box> teacher_oracle(int idx, const TeacherNoise& noise) const {
        Pcg32 rng = Pcg32(cfg_.seed, 77).fork(static_cast<std::uint64_t>(idx));
        std::vector<Box> out;
        for (const Box& gt : teacher_gt(idx)) {
            if (rng.next_unit() < noise.drop_prob) continue;
            Box b = gt;
            b.cx += noise.center_sigma * rng.normal();
            b.cy += noise.center_sigma * rng.normal();
            b.w *= std::max(0.2, 1.0 + noise.size_sigma * rng.normal());
            b.h *= std::max(0.2, 1.0 + noise.size_sigma * rng.normal());
            b.score = 1.0;
            out.push_back(b);
        }
        return out;
    }

    TeacherNoise default_noise() const {
        return {cfg_.oracle_center_sigma, cfg_.oracle_size_sigma, cfg_.oracle_drop_prob};
    }

    /// Student pixels whose ground ray lands on the field.
    BinaryMask field_mask() const {
        const int W = cfg_.student_size;
        BinaryMask m(W, W);
        for (int y = 0; y < W; ++y)
            for (int x = 0; x < W; ++x) {
                auto g = pixel_to_ground(x + 0.5, y + 0.5);
                if (g && on_field(*g)) m.set(x, y);
            }
        return m;
    }

    /// Field boundary sampled into a pixel polygon (the config-file interface
    /// for the augmentation anchor region).
    std::vector<Point> field_polygon(int samples_per_side = 16) const {
        std::vector<Point> poly;
        const double hx = cfg_.field_length / 2.0, hy = cfg_.field_width / 2.0;
        auto push_edge = [&](Point a, Point b) {
            for (int i = 0; i < samples_per_side; ++i) {
                double u = static_cast<double>(i) / samples_per_side;
                Point g{a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)};
                poly.push_back(ground_to_student({g.x, g.y}));
            }
        };
        push_edge({-hx, -hy}, {hx, -hy});
        push_edge({hx, -hy}, {hx, hy});
        push_edge({hx, hy}, {-hx, hy});
        push_edge({-hx, hy}, {-hx, -hy});
        return poly;
    }

    Point ground_to_student(Point g) const {
        return fisheye_px(g.x, g.y, 0.0);
    }

private:
    static constexpr double kPi = 3.14159265358979323846;

    struct Way {
        double t;
        Point p;
    };

    struct Vec3 {
        double x, y, z;
    };

    struct Ellipse {
        Point center;
        Point axis_dir;  // unit vector along the body
        double a = 0.0;  // semi-axis along the body
        double b = 0.0;  // semi-axis across
        Box box() const {
            double nx = -axis_dir.y, ny = axis_dir.x;
            double ex = std::sqrt(a * a * axis_dir.x * axis_dir.x + b * b * nx * nx);
            double ey = std::sqrt(a * a * axis_dir.y * axis_dir.y + b * b * ny * ny);
            return Box{center.x, center.y, 2.0 * ex, 2.0 * ey, 1.0};
        }
    };

    Vec3 student_center() const { return {0.0, pole_y_, cfg_.student_height}; }
    Vec3 teacher_center() const { return {0.0, pole_y_, cfg_.teacher_height}; }

    static Eigen::Matrix3d ground_to_view(Vec3 C, Vec3 r, Vec3 d, Vec3 w, double fl, double cx,
                                          double cy) {
        auto dot = [](Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; };
        Eigen::Matrix3d M;
        Vec3 ex{1, 0, 0}, ey{0, 1, 0}, v0{-C.x, -C.y, -C.z};
        Vec3 cols[3] = {ex, ey, v0};
        for (int j = 0; j < 3; ++j) {
            M(0, j) = fl * dot(cols[j], r) + cx * dot(cols[j], w);
            M(1, j) = fl * dot(cols[j], d) + cy * dot(cols[j], w);
            M(2, j) = dot(cols[j], w);
        }
        return M;
    }

    Point fisheye_px(double x, double y, double z) const {
        Vec3 C = student_center();
        double dx = x - C.x, dy = y - C.y, dz = z - C.z;
        double horiz = std::hypot(dx, dy);
        double theta = std::atan2(horiz, -dz);
        double phi = std::atan2(dy, dx);
        double r = cfg_.fisheye_focal * theta;
        double c = cfg_.student_size / 2.0;
        return {c + r * std::cos(phi), c + r * std::sin(phi)};
    }

    std::optional<Point> teacher_px(double x, double y, double z) const {
        Vec3 C = teacher_center();
        Vec3 v{x - C.x, y - C.y, z - C.z};
        auto dot = [](Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; };
        double Z = dot(v, fwd_);
        if (Z < 0.2) return std::nullopt;
        return Point{cfg_.teacher_width / 2.0 + cfg_.teacher_focal * dot(v, right_) / Z,
                     cfg_.teacher_height_px / 2.0 + cfg_.teacher_focal * dot(v, down_) / Z};
    }

    std::optional<Point> pixel_to_ground(double px, double py) const {
        double c = cfg_.student_size / 2.0;
        double rx = px - c, ry = py - c;
        double r = std::hypot(rx, ry);
        double theta = r / cfg_.fisheye_focal;
        if (theta >= kPi / 2.0 * 0.999) return std::nullopt;
        double phi = std::atan2(ry, rx);
        double horiz = cfg_.student_height * std::tan(theta);
        if (horiz > 2000.0) return std::nullopt;
        return Point{horiz * std::cos(phi), pole_y_ + horiz * std::sin(phi)};
    }

    bool on_field(Point g) const {
        return std::abs(g.x) <= cfg_.field_length / 2.0 && std::abs(g.y) <= cfg_.field_width / 2.0;
    }

    double player_tone(int pi) const {
        double f = pi * 0.6180339887498949;
        return 0.55 + 0.38 * (f - std::floor(f));
    }

    template <typename ProjFn>
    std::optional<Ellipse> body_ellipse(Point ground, ProjFn&& proj, Vec3 cam) const {
        auto foot = proj(ground.x, ground.y, 0.0);
        auto head = proj(ground.x, ground.y, cfg_.player_height);
        if (!foot || !head) return std::nullopt;
        double ax = std::hypot(ground.x - cam.x, ground.y - cam.y);
        Point az{(ground.x - cam.x) / std::max(ax, 1e-9), (ground.y - cam.y) / std::max(ax, 1e-9)};
        Point perp{-az.y, az.x};
        auto w0 = proj(ground.x - cfg_.player_radius * perp.x, ground.y - cfg_.player_radius * perp.y,
                       cfg_.player_height / 2.0);
        auto w1 = proj(ground.x + cfg_.player_radius * perp.x, ground.y + cfg_.player_radius * perp.y,
                       cfg_.player_height / 2.0);
        if (!w0 || !w1) return std::nullopt;
        Ellipse e;
        e.center = {0.5 * (foot->x + head->x), 0.5 * (foot->y + head->y)};
        Point body = *head - *foot;
        double len = norm(body);
        e.b = 0.5 * norm(*w1 - *w0);
        if (e.b < 0.4) e.b = 0.4;
        e.a = 0.5 * len + 0.5 * e.b;
        if (e.a < e.b) e.a = e.b;
        e.axis_dir = len > 1e-9 ? Point{body.x / len, body.y / len} : Point{0.0, 1.0};
        return e;
    }

    std::optional<Ellipse> student_ellipse(Point ground, int) const {
        auto proj = [this](double x, double y, double z) -> std::optional<Point> {
            return fisheye_px(x, y, z);
        };
        return body_ellipse(ground, proj, student_center());
    }

    std::optional<Ellipse> teacher_ellipse(Point ground, int) const {
        auto proj = [this](double x, double y, double z) { return teacher_px(x, y, z); };
        auto e = body_ellipse(ground, proj, teacher_center());
        if (!e) return e;
        Box b = e->box();
        if (b.x1() < 0 || b.x0() >= cfg_.teacher_width || b.y1() < 0 ||
            b.y0() >= cfg_.teacher_height_px)
            return std::nullopt;
        return e;
    }

    void paint_ellipse(Frame& f, const Ellipse& e, float tone, int pi) const {
        Box b = e.box();
        int x0 = std::max(0, static_cast<int>(std::floor(b.x0())));
        int y0 = std::max(0, static_cast<int>(std::floor(b.y0())));
        int x1 = std::min(f.width - 1, static_cast<int>(std::ceil(b.x1())));
        int y1 = std::min(f.height - 1, static_cast<int>(std::ceil(b.y1())));
        Point n{-e.axis_dir.y, e.axis_dir.x};
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double dx = (x + 0.5) - e.center.x, dy = (y + 0.5) - e.center.y;
                double u = (dx * e.axis_dir.x + dy * e.axis_dir.y) / e.a;
                double v = (dx * n.x + dy * n.y) / e.b;
                if (u * u + v * v > 1.0) continue;
                float tex = static_cast<float>(
                    0.04 * std::sin(0.9 * x + 1.7 * y + 2.1 * pi));
                f.at(x, y) = std::clamp(tone + tex, 0.0f, 1.0f);
            }
    }

    void paint_player_student(Frame& f, Point ground, int pi) const {
        auto e = student_ellipse(ground, pi);
        if (e) paint_ellipse(f, *e, static_cast<float>(player_tone(pi)), pi);
    }

    void paint_player_teacher(Frame& f, Point ground, int pi) const {
        auto e = teacher_ellipse(ground, pi);
        if (e) paint_ellipse(f, *e, static_cast<float>(player_tone(pi)), pi);
    }

    std::vector<int> student_paint_order(const std::vector<PlayerState>& players) const {
        std::vector<int> order(players.size());
        std::iota(order.begin(), order.end(), 0);
        Vec3 C = student_center();
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            auto da = std::hypot(players[static_cast<std::size_t>(a)].ground.x - C.x,
                                 players[static_cast<std::size_t>(a)].ground.y - C.y);
            auto db = std::hypot(players[static_cast<std::size_t>(b)].ground.x - C.x,
                                 players[static_cast<std::size_t>(b)].ground.y - C.y);
            return da > db;
        });
        return order;
    }

    void check_coverage() const {
        // the student view must see the whole field inside its image circle
        const double hx = cfg_.field_length / 2.0, hy = cfg_.field_width / 2.0;
        for (Point corner : {Point{hx, hy}, Point{-hx, hy}, Point{hx, -hy}, Point{-hx, -hy}}) {
            Point px = fisheye_px(corner.x, corner.y, 0.0);
            double c = cfg_.student_size / 2.0;
            double r = std::hypot(px.x - c, px.y - c);
            if (r >= c || r >= cfg_.fisheye_focal * kPi / 2.0)
                throw std::invalid_argument("Simulator: field not covered by the student view");
        }
    }

    void build_paths() {
        Pcg32 rng(cfg_.seed, 11);
        const double hx = cfg_.field_length / 2.0 - 1.0, hy = cfg_.field_width / 2.0 - 1.0;
        paths_.resize(static_cast<std::size_t>(cfg_.player_count));
        for (auto& path : paths_) {
            double t = 0.0;
            Point p{rng.uniform(-hx, hx), rng.uniform(-hy, hy)};
            path.push_back({t, p});
            while (t < cfg_.duration + 10.0) {
                Point q{rng.uniform(-hx, hx), rng.uniform(-hy, hy)};
                double speed = rng.uniform(cfg_.speed_min, cfg_.speed_max);
                double dt = norm(q - p) / speed;
                if (dt < 0.5) continue;
                t += dt;
                p = q;
                path.push_back({t, p});
            }
        }
    }

    void build_background() {
        const int W = cfg_.student_size;
        base_student_.assign(static_cast<std::size_t>(W) * W, 0.0f);
        for (int y = 0; y < W; ++y)
            for (int x = 0; x < W; ++x) {
                auto g = pixel_to_ground(x + 0.5, y + 0.5);
                float tone = static_cast<float>(cfg_.background_sky);
                if (g)
                    tone = on_field(*g) ? static_cast<float>(cfg_.background_field)
                                        : static_cast<float>(cfg_.background_ground);
                base_student_[static_cast<std::size_t>(y) * W + x] = tone;
            }
        base_teacher_.assign(
            static_cast<std::size_t>(cfg_.teacher_width) * cfg_.teacher_height_px, 0.0f);
        for (int y = 0; y < cfg_.teacher_height_px; ++y)
            for (int x = 0; x < cfg_.teacher_width; ++x) {
                // intersect the pixel ray with the ground
                auto dot = [](Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; };
                double rx = (x + 0.5 - cfg_.teacher_width / 2.0) / cfg_.teacher_focal;
                double ry = (y + 0.5 - cfg_.teacher_height_px / 2.0) / cfg_.teacher_focal;
                Vec3 dir{rx * right_.x + ry * down_.x + fwd_.x,
                         rx * right_.y + ry * down_.y + fwd_.y,
                         rx * right_.z + ry * down_.z + fwd_.z};
                (void)dot;
                float tone = static_cast<float>(cfg_.background_sky);
                if (dir.z < -1e-6) {
                    double s = cfg_.teacher_height / -dir.z;
                    Point g{0.0 + s * dir.x, pole_y_ + s * dir.y};
                    if (s * std::hypot(dir.x, dir.y) < 2000.0)
                        tone = on_field(g) ? static_cast<float>(cfg_.background_field)
                                           : static_cast<float>(cfg_.background_ground);
                }
                base_teacher_[static_cast<std::size_t>(y) * cfg_.teacher_width + x] = tone;
            }
    }

    void build_noise_pool() {
        noise_pool_.resize(std::size_t{1} << 22);
        Pcg32 rng(cfg_.seed, 13);
        for (auto& v : noise_pool_)
            v = static_cast<float>(cfg_.noise_sigma * rng.normal());
    }

    std::size_t noise_offset(int idx) const {
        std::uint64_t z = (cfg_.seed * 0x9e3779b97f4a7c15ULL) ^
                          (static_cast<std::uint64_t>(idx) + 0x632be59bd9b4e019ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return static_cast<std::size_t>(z ^ (z >> 31)) & (noise_pool_.size() - 1);
    }

    SimConfig cfg_;
    double pole_y_ = -35.0;
    Vec3 fwd_{0, 1, 0}, right_{1, 0, 0}, down_{0, 0, -1};
    std::vector<std::vector<Way>> paths_;
    std::vector<float> base_student_;
    std::vector<float> base_teacher_;
    std::vector<float> noise_pool_;
};

}  // namespace duoview
