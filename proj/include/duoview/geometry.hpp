#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "duoview/core.hpp"

namespace duoview {

/// 3x3 projective map, normalized so m[2][2] = 1 where possible.
struct Homography {
    std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

    static Homography identity() { return {}; }

    static Homography from_matrix(const Eigen::Matrix3d& e) {
        Homography h;
        double s = std::abs(e(2, 2)) > 1e-15 ? 1.0 / e(2, 2) : 1.0;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) h.m[r][c] = e(r, c) * s;
        return h;
    }

    Eigen::Matrix3d matrix() const {
        Eigen::Matrix3d e;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) e(r, c) = m[r][c];
        return e;
    }

    double det() const { return matrix().determinant(); }
    bool invertible() const { return std::abs(det()) > 1e-12; }

    Homography inverse() const {
        if (!invertible()) throw std::runtime_error("Homography: not invertible");
        return from_matrix(matrix().inverse());
    }
};

/// Homogeneous transform + perspective divide. Points that map to infinity
/// (w ~ 0) yield nullopt.
inline std::optional<Point> project_point(const Homography& h, Point p) {
    double w = h.m[2][0] * p.x + h.m[2][1] * p.y + h.m[2][2];
    if (std::abs(w) < 1e-12) return std::nullopt;
    double x = h.m[0][0] * p.x + h.m[0][1] * p.y + h.m[0][2];
    double y = h.m[1][0] * p.x + h.m[1][1] * p.y + h.m[1][2];
    return Point{x / w, y / w};
}

/// Projects the four corners and takes the smallest axis-aligned enclosure;
/// the score rides along untouched.
inline std::optional<Box> project_box(const Homography& h, const Box& b) {
    std::array<Point, 4> proj;
    auto corners = box_corners(b);
    for (int i = 0; i < 4; ++i) {
        auto p = project_point(h, corners[i]);
        if (!p) return std::nullopt;
        proj[i] = *p;
    }
    return enclosing_axis_aligned(std::span<const Point>(proj.data(), 4), b.score);
}

struct Correspondence {
    Point teacher;
    Point student;
};

struct HomographyFit {
    Homography h;  // teacher -> student
    double mean_reprojection_error = 0.0;
};

/// Normalized DLT: translate each point set to its centroid, scale to mean
/// distance sqrt(2), solve the 2n x 9 system by SVD. Throws on < 4 pairs or
/// a rank-deficient configuration (e.g. collinear points).
inline HomographyFit estimate_homography(std::span<const Correspondence> pairs) {
    const std::size_t n = pairs.size();
    if (n < 4) throw std::invalid_argument("estimate_homography: need >= 4 correspondences");

    auto normalize = [&](bool teacher_side) {
        Point c{0, 0};
        for (const auto& pr : pairs) {
            Point p = teacher_side ? pr.teacher : pr.student;
            c.x += p.x / n;
            c.y += p.y / n;
        }
        double mean_dist = 0.0;
        for (const auto& pr : pairs) {
            Point p = teacher_side ? pr.teacher : pr.student;
            mean_dist += norm(p - c) / n;
        }
        double s = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
        Eigen::Matrix3d T;
        T << s, 0, -s * c.x, 0, s, -s * c.y, 0, 0, 1;
        return T;
    };

    Eigen::Matrix3d Ts = normalize(true);
    Eigen::Matrix3d Td = normalize(false);

    Eigen::MatrixXd A(2 * n, 9);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::Vector3d s = Ts * Eigen::Vector3d(pairs[i].teacher.x, pairs[i].teacher.y, 1.0);
        Eigen::Vector3d d = Td * Eigen::Vector3d(pairs[i].student.x, pairs[i].student.y, 1.0);
        double x = s.x(), y = s.y(), u = d.x(), v = d.y();
        A.row(2 * i) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
        A.row(2 * i + 1) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    int k = static_cast<int>(sv.size());
    // With a unique solution exactly one singular value is ~0; a second tiny
    // one signals a degenerate configuration.
    if (k >= 2 && sv(k - 2) < 1e-9 * std::max(sv(0), 1e-300))
        throw std::invalid_argument("estimate_homography: degenerate correspondences");

    Eigen::VectorXd hvec = svd.matrixV().col(8);
    Eigen::Matrix3d Hn;
    Hn << hvec(0), hvec(1), hvec(2), hvec(3), hvec(4), hvec(5), hvec(6), hvec(7), hvec(8);
    Eigen::Matrix3d H = Td.inverse() * Hn * Ts;

    HomographyFit fit;
    fit.h = Homography::from_matrix(H);
    if (!fit.h.invertible())
        throw std::invalid_argument("estimate_homography: singular solution");
    double err = 0.0;
    for (const auto& pr : pairs) {
        auto p = project_point(fit.h, pr.teacher);
        err += p ? norm(*p - pr.student) : 1e9;
    }
    fit.mean_reprojection_error = err / n;
    return fit;
}

/// Equidistant fisheye: a ray theta off the optical axis lands at radius
/// focal * theta around the image center.
struct FisheyeModel {
    double focal = 400.0;            // pixels per radian
    Point center{640.0, 640.0};
    double max_theta = 1.5707963267948966;  // radians
    double undistort_focal = 400.0;  // pinhole focal of the undistorted plane

    std::optional<Point> project(double theta, double phi) const {
        if (theta < 0.0 || theta > max_theta) return std::nullopt;
        double r = focal * theta;
        return Point{center.x + r * std::cos(phi), center.y + r * std::sin(phi)};
    }

    /// Fisheye pixel -> undistorted pinhole-plane pixel. Points at or past
    /// the horizon (theta >= pi/2) have no pinhole image.
    std::optional<Point> undistort(Point p) const {
        Point d = p - center;
        double r = norm(d);
        if (r < 1e-12) return center;
        double theta = r / focal;
        if (theta >= std::min(max_theta, 1.5697963267948966)) return std::nullopt;
        double ru = undistort_focal * std::tan(theta);
        return center + (ru / r) * d;
    }

    /// Undistorted pinhole-plane pixel -> fisheye pixel.
    std::optional<Point> distort(Point p) const {
        Point d = p - center;
        double ru = norm(d);
        if (ru < 1e-12) return center;
        double theta = std::atan(ru / undistort_focal);
        if (theta > max_theta) return std::nullopt;
        double rd = focal * theta;
        return center + (rd / ru) * d;
    }
};

/// Projection chain from the teacher image into the student frame: the
/// homography relates the two undistorted image planes; when the student
/// camera has a fisheye lens its model maps that plane onto actual student
/// pixels. Without a lens the student frame is the undistorted plane itself.
struct ViewMap {
    Homography h;  // teacher undistorted plane -> student undistorted plane
    std::optional<FisheyeModel> student_lens;

    std::optional<Point> to_student(Point teacher_px) const {
        auto q = project_point(h, teacher_px);
        if (!q) return std::nullopt;
        if (!student_lens) return q;
        return student_lens->distort(*q);
    }

    std::optional<Point> from_student(Point student_px) const {
        Point u = student_px;
        if (student_lens) {
            auto uu = student_lens->undistort(student_px);
            if (!uu) return std::nullopt;
            u = *uu;
        }
        return project_point(h.inverse(), u);
    }

    std::optional<Box> project_box_to_student(const Box& b) const {
        std::array<Point, 4> proj;
        auto corners = box_corners(b);
        for (int i = 0; i < 4; ++i) {
            auto p = to_student(corners[i]);
            if (!p) return std::nullopt;
            proj[i] = *p;
        }
        return enclosing_axis_aligned(std::span<const Point>(proj.data(), 4), b.score);
    }
};

/// A student pixel belongs to OVERLAP iff its preimage lands inside the
/// teacher frame bounds. Throws if the overlap comes out empty (the cameras
/// would not share any view, which violates the setup).
inline RegionPartition build_region_partition(const ViewMap& vm, int teacher_w, int teacher_h,
                                              int student_w, int student_h) {
    Homography hinv = vm.h.inverse();
    RegionPartition part{BinaryMask(student_w, student_h)};
    for (int y = 0; y < student_h; ++y) {
        for (int x = 0; x < student_w; ++x) {
            Point sp{x + 0.5, y + 0.5};
            Point u = sp;
            if (vm.student_lens) {
                auto uu = vm.student_lens->undistort(sp);
                if (!uu) continue;
                u = *uu;
            }
            auto q = project_point(hinv, u);
            if (!q) continue;
            if (q->x >= 0.0 && q->x < teacher_w && q->y >= 0.0 && q->y < teacher_h)
                part.overlap.set(x, y);
        }
    }
    if (part.overlap.empty_mask())
        throw std::runtime_error("build_region_partition: empty OVERLAP");
    return part;
}

inline RegionPartition build_region_partition(const Homography& h, int teacher_w, int teacher_h,
                                              int student_w, int student_h) {
    return build_region_partition(ViewMap{h, std::nullopt}, teacher_w, teacher_h, student_w,
                                  student_h);
}

/// Correspondence files: one `tx ty sx sy` row per pair, '#' comments allowed.
inline std::vector<Correspondence> load_correspondences(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_correspondences: cannot open " + path);
    std::vector<Correspondence> out;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        Correspondence c;
        char comma;
        if (ss >> c.teacher.x) {
            if (ss.peek() == ',') ss >> comma;
            ss >> c.teacher.y;
            if (ss.peek() == ',') ss >> comma;
            ss >> c.student.x;
            if (ss.peek() == ',') ss >> comma;
            ss >> c.student.y;
            if (!ss.fail()) out.push_back(c);
        }
    }
    return out;
}

}  // namespace duoview
