#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <string>

#include <json.hpp>

#include "duoview/augment.hpp"
#include "duoview/eval.hpp"
#include "duoview/geometry.hpp"
#include "duoview/motion.hpp"
#include "duoview/sim.hpp"
#include "duoview/student.hpp"
#include "duoview/supervise.hpp"

namespace duoview {

/// Bad or unknown configuration; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace cfgdetail {

using nlohmann::json;
using Handler = std::function<void(const json&)>;

/// Applies handlers by key and rejects anything unknown.
inline void walk_object(const json& obj, const std::string& prefix,
                        const std::map<std::string, Handler>& handlers) {
    if (!obj.is_object()) throw ConfigError("config: expected object at '" + prefix + "'");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        auto h = handlers.find(it.key());
        if (h == handlers.end())
            throw ConfigError("config: unknown key '" + prefix + it.key() + "'");
        try {
            h->second(it.value());
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError("config: bad value for '" + prefix + it.key() + "': " + e.what());
        }
    }
}

template <typename T>
Handler store(T& target) {
    return [&target](const json& v) { target = v.get<T>(); };
}

}  // namespace cfgdetail

struct GeometrySettings {
    std::string homography_file;  // required for directory-sourced runs
    bool lens_enabled = false;
    FisheyeModel lens;

    std::optional<FisheyeModel> lens_opt() const {
        return lens_enabled ? std::optional<FisheyeModel>(lens) : std::nullopt;
    }
};

struct AugmentSettings {
    bool enabled = true;
    double alpha = 0.5;
    double beta = -0.004;
    double gamma = 0.5;
    int crops_per_frame = 4;
    int max_retries = 10;
    double cluster_inflation = 1.5;
    std::vector<Point> field_polygon;    // pixel vertices; empty = take from sim
    std::string field_polygon_file;
};

struct StudentSettings {
    std::string kind = "grid";  // grid | blob
    GridConfig grid;
    double blob_min_area = 8.0;
    double blob_max_area = 1e5;
    double nms_iou = 0.5;
    double lr = 0.05;
    int batch = 1;
};

struct DistillSettings {
    double teacher_period = 1.0;    // seconds between supervised frames
    double memory_window = 300.0;   // online dataset memory, seconds
    double fps = 12.0;
    double swap_period = 5.0;       // replay mode: train one epoch per this much video
    int offline_epochs = 30;
    bool store_frames = false;      // keep frame pixels in dataset entries
};

struct RunConfig {
    std::uint64_t seed = 1;
    SimConfig sim;
    GeometrySettings geometry;
    VibeParams vibe;
    int dilate_kernel = 11;
    AugmentSettings augment;
    GateMode gate = GateMode::kMotion;
    StudentSettings student;
    DistillSettings distill;
    EvalConfig eval;
};

inline GateMode gate_from_string(const std::string& s) {
    if (s == "motion") return GateMode::kMotion;
    if (s == "none") return GateMode::kNone;
    if (s == "all") return GateMode::kAll;
    throw ConfigError("config: gate.mode must be one of motion|none|all, got '" + s + "'");
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    using cfgdetail::store;
    using cfgdetail::walk_object;
    using nlohmann::json;
    RunConfig c;

    walk_object(
        j, "",
        {
            {"seed", store(c.seed)},
            {"sim",
             [&](const json& js) {
                 SimConfig& s = c.sim;
                 walk_object(js, "sim.",
                             {{"field_length", store(s.field_length)},
                              {"field_width", store(s.field_width)},
                              {"pole_offset", store(s.pole_offset)},
                              {"student_height", store(s.student_height)},
                              {"teacher_height", store(s.teacher_height)},
                              {"student_size", store(s.student_size)},
                              {"fisheye_focal", store(s.fisheye_focal)},
                              {"undistort_focal", store(s.undistort_focal)},
                              {"teacher_width", store(s.teacher_width)},
                              {"teacher_height_px", store(s.teacher_height_px)},
                              {"teacher_focal", store(s.teacher_focal)},
                              {"teacher_pitch_deg", store(s.teacher_pitch_deg)},
                              {"player_count", store(s.player_count)},
                              {"player_height", store(s.player_height)},
                              {"player_radius", store(s.player_radius)},
                              {"speed_min", store(s.speed_min)},
                              {"speed_max", store(s.speed_max)},
                              {"background_field", store(s.background_field)},
                              {"background_ground", store(s.background_ground)},
                              {"background_sky", store(s.background_sky)},
                              {"noise_sigma", store(s.noise_sigma)},
                              {"duration", store(s.duration)},
                              {"fps", store(s.fps)},
                              {"oracle_center_sigma", store(s.oracle_center_sigma)},
                              {"oracle_size_sigma", store(s.oracle_size_sigma)},
                              {"oracle_drop_prob", store(s.oracle_drop_prob)}});
                 s.seed = c.seed;
             }},
            {"geometry",
             [&](const json& jg) {
                 GeometrySettings& g = c.geometry;
                 walk_object(
                     jg, "geometry.",
                     {{"homography_file", store(g.homography_file)},
                      {"lens", [&](const json& jl) {
                           walk_object(jl, "geometry.lens.",
                                       {{"enabled", store(g.lens_enabled)},
                                        {"focal", store(g.lens.focal)},
                                        {"cx", store(g.lens.center.x)},
                                        {"cy", store(g.lens.center.y)},
                                        {"max_theta", store(g.lens.max_theta)},
                                        {"undistort_focal", store(g.lens.undistort_focal)}});
                       }}});
             }},
            {"vibe",
             [&](const json& jv) {
                 walk_object(jv, "vibe.",
                             {{"n", store(c.vibe.samples)},
                              {"radius", store(c.vibe.radius_8bit)},
                              {"min_matches", store(c.vibe.min_matches)},
                              {"phi", store(c.vibe.subsample)}});
             }},
            {"dilate",
             [&](const json& jd) {
                 walk_object(jd, "dilate.", {{"kernel", store(c.dilate_kernel)}});
             }},
            {"augment",
             [&](const json& ja) {
                 AugmentSettings& a = c.augment;
                 walk_object(ja, "augment.",
                             {{"enabled", store(a.enabled)},
                              {"alpha", store(a.alpha)},
                              {"beta", store(a.beta)},
                              {"gamma", store(a.gamma)},
                              {"crops_per_frame", store(a.crops_per_frame)},
                              {"max_retries", store(a.max_retries)},
                              {"cluster_inflation", store(a.cluster_inflation)},
                              {"field_polygon_file", store(a.field_polygon_file)},
                              {"field_polygon", [&](const json& jp) {
                                   a.field_polygon.clear();
                                   for (const auto& v : jp)
                                       a.field_polygon.push_back(
                                           {v.at(0).get<double>(), v.at(1).get<double>()});
                               }}});
             }},
            {"gate",
             [&](const json& jg) {
                 std::string mode = "motion";
                 walk_object(jg, "gate.", {{"mode", store(mode)}});
                 c.gate = gate_from_string(mode);
             }},
            {"student",
             [&](const json& js) {
                 StudentSettings& s = c.student;
                 walk_object(js, "student.",
                             {{"kind", store(s.kind)},
                              {"blob_min_area", store(s.blob_min_area)},
                              {"blob_max_area", store(s.blob_max_area)},
                              {"nms_iou", store(s.nms_iou)},
                              {"lr", store(s.lr)},
                              {"batch", store(s.batch)},
                              {"grid", [&](const json& jgr) {
                                   GridConfig& g = s.grid;
                                   walk_object(jgr, "student.grid.",
                                               {{"g", store(g.grid)},
                                                {"window_margin", store(g.window_margin)},
                                                {"emission_threshold",
                                                 store(g.emission_threshold)},
                                                {"match_iou", store(g.match_iou)},
                                                {"lambda_coord", store(g.lambda_coord)},
                                                {"lambda_obj", store(g.lambda_obj)},
                                                {"lambda_noobj", store(g.lambda_noobj)}});
                               }}});
                 if (s.kind != "grid" && s.kind != "blob")
                     throw ConfigError("config: student.kind must be grid|blob");
             }},
            {"distill",
             [&](const json& jd) {
                 DistillSettings& d = c.distill;
                 walk_object(jd, "distill.",
                             {{"teacher_period", store(d.teacher_period)},
                              {"memory_window", store(d.memory_window)},
                              {"fps", store(d.fps)},
                              {"swap_period", store(d.swap_period)},
                              {"offline_epochs", store(d.offline_epochs)},
                              {"store_frames", store(d.store_frames)}});
             }},
            {"eval",
             [&](const json& je) {
                 walk_object(je, "eval.",
                             {{"tiou", store(c.eval.tiou)},
                              {"window", store(c.eval.window)},
                              {"annotation_period", store(c.eval.annotation_period)},
                              {"count_window", store(c.eval.count_window)}});
             }},
        });

    c.sim.seed = c.seed;
    c.sim.fps = c.distill.fps;
    if (c.distill.teacher_period < 1.0 / c.distill.fps)
        throw ConfigError("config: distill.teacher_period must be >= 1/fps");
    if (c.dilate_kernel < 1 || c.dilate_kernel % 2 == 0)
        throw ConfigError("config: dilate.kernel must be odd");
    return c;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["sim"] = {{"field_length", c.sim.field_length},
                {"field_width", c.sim.field_width},
                {"pole_offset", c.sim.pole_offset},
                {"student_height", c.sim.student_height},
                {"teacher_height", c.sim.teacher_height},
                {"student_size", c.sim.student_size},
                {"fisheye_focal", c.sim.fisheye_focal},
                {"undistort_focal", c.sim.undistort_focal},
                {"teacher_width", c.sim.teacher_width},
                {"teacher_height_px", c.sim.teacher_height_px},
                {"teacher_focal", c.sim.teacher_focal},
                {"teacher_pitch_deg", c.sim.teacher_pitch_deg},
                {"player_count", c.sim.player_count},
                {"player_height", c.sim.player_height},
                {"player_radius", c.sim.player_radius},
                {"speed_min", c.sim.speed_min},
                {"speed_max", c.sim.speed_max},
                {"background_field", c.sim.background_field},
                {"background_ground", c.sim.background_ground},
                {"background_sky", c.sim.background_sky},
                {"noise_sigma", c.sim.noise_sigma},
                {"duration", c.sim.duration},
                {"fps", c.sim.fps},
                {"oracle_center_sigma", c.sim.oracle_center_sigma},
                {"oracle_size_sigma", c.sim.oracle_size_sigma},
                {"oracle_drop_prob", c.sim.oracle_drop_prob}};
    j["geometry"] = {{"homography_file", c.geometry.homography_file},
                     {"lens",
                      {{"enabled", c.geometry.lens_enabled},
                       {"focal", c.geometry.lens.focal},
                       {"cx", c.geometry.lens.center.x},
                       {"cy", c.geometry.lens.center.y},
                       {"max_theta", c.geometry.lens.max_theta},
                       {"undistort_focal", c.geometry.lens.undistort_focal}}}};
    j["vibe"] = {{"n", c.vibe.samples},
                 {"radius", c.vibe.radius_8bit},
                 {"min_matches", c.vibe.min_matches},
                 {"phi", c.vibe.subsample}};
    j["dilate"] = {{"kernel", c.dilate_kernel}};
    nlohmann::json poly = nlohmann::json::array();
    for (const Point& p : c.augment.field_polygon) poly.push_back({p.x, p.y});
    j["augment"] = {{"enabled", c.augment.enabled},
                    {"alpha", c.augment.alpha},
                    {"beta", c.augment.beta},
                    {"gamma", c.augment.gamma},
                    {"crops_per_frame", c.augment.crops_per_frame},
                    {"max_retries", c.augment.max_retries},
                    {"cluster_inflation", c.augment.cluster_inflation},
                    {"field_polygon", poly},
                    {"field_polygon_file", c.augment.field_polygon_file}};
    j["gate"] = {{"mode", to_string(c.gate)}};
    j["student"] = {{"kind", c.student.kind},
                    {"blob_min_area", c.student.blob_min_area},
                    {"blob_max_area", c.student.blob_max_area},
                    {"nms_iou", c.student.nms_iou},
                    {"lr", c.student.lr},
                    {"batch", c.student.batch},
                    {"grid",
                     {{"g", c.student.grid.grid},
                      {"window_margin", c.student.grid.window_margin},
                      {"emission_threshold", c.student.grid.emission_threshold},
                      {"match_iou", c.student.grid.match_iou},
                      {"lambda_coord", c.student.grid.lambda_coord},
                      {"lambda_obj", c.student.grid.lambda_obj},
                      {"lambda_noobj", c.student.grid.lambda_noobj}}}};
    j["distill"] = {{"teacher_period", c.distill.teacher_period},
                    {"memory_window", c.distill.memory_window},
                    {"fps", c.distill.fps},
                    {"swap_period", c.distill.swap_period},
                    {"offline_epochs", c.distill.offline_epochs},
                    {"store_frames", c.distill.store_frames}};
    j["eval"] = {{"tiou", c.eval.tiou},
                 {"window", c.eval.window},
                 {"annotation_period", c.eval.annotation_period},
                 {"count_window", c.eval.count_window}};
    return j;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config: parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

inline void save_config(const RunConfig& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("config: cannot write " + path);
    out << config_to_json(c).dump(2) << "\n";
}

/// Homography files: 9 row-major floats in a JSON array.
inline void save_homography(const Homography& h, const std::string& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) arr.push_back(h.m[r][c]);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_homography: cannot open " + path);
    out << arr.dump() << "\n";
}

inline Homography load_homography(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_homography: cannot open " + path);
    nlohmann::json arr;
    in >> arr;
    if (!arr.is_array() || arr.size() != 9)
        throw std::runtime_error("load_homography: expected 9 floats in " + path);
    Homography h;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) h.m[r][c] = arr[static_cast<std::size_t>(3 * r + c)].get<double>();
    if (!h.invertible()) throw std::runtime_error("load_homography: singular matrix in " + path);
    return h;
}

inline void save_field_polygon(std::span<const Point> poly, const std::string& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Point& p : poly) arr.push_back({p.x, p.y});
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_field_polygon: cannot open " + path);
    out << arr.dump() << "\n";
}

inline std::vector<Point> load_field_polygon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_field_polygon: cannot open " + path);
    nlohmann::json arr;
    in >> arr;
    std::vector<Point> poly;
    for (const auto& v : arr) poly.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    return poly;
}

}  // namespace duoview
