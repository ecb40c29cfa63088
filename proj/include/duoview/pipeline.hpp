#pragma once

#include <memory>
#include <string>

#include "duoview/config.hpp"
#include "duoview/distill.hpp"

namespace duoview {

/// Everything a run needs, assembled from one RunConfig.
struct PipelineSetup {
    std::shared_ptr<const Simulator> sim;  // set for simulator-sourced runs
    std::unique_ptr<FrameSource> source;
    ViewMap view;
    std::shared_ptr<const RegionPartition> partition;
    BinaryMask field_mask;  // playable-field pixels in the student frame
    EngineSettings settings;
};

inline EngineSettings engine_settings_from_config(const RunConfig& cfg) {
    EngineSettings s;
    s.vibe = cfg.vibe;
    s.dilate_kernel = cfg.dilate_kernel;
    s.augment_enabled = cfg.augment.enabled;
    s.augment.alpha = cfg.augment.alpha;
    s.augment.beta = cfg.augment.beta;
    s.augment.gamma = cfg.augment.gamma;
    s.augment.crops_per_frame = cfg.augment.crops_per_frame;
    s.augment.max_retries = cfg.augment.max_retries;
    s.augment.cluster_inflation = cfg.augment.cluster_inflation;
    s.gate = cfg.gate;
    s.student = cfg.student;
    s.distill = cfg.distill;
    s.eval = cfg.eval;
    s.seed = cfg.seed;
    return s;
}

inline BinaryMask anchor_region_from(const BinaryMask& field, const RegionPartition& part) {
    BinaryMask anchor = field;
    auto& words = anchor.words();
    const auto& overlap = part.overlap.words();
    for (std::size_t i = 0; i < words.size(); ++i) words[i] &= ~overlap[i];
    return anchor;
}

/// Simulator-sourced pipeline: geometry, partition and the anchor region all
/// come from the synthetic world.
inline PipelineSetup build_sim_pipeline(const RunConfig& cfg) {
    PipelineSetup p;
    p.sim = std::make_shared<Simulator>(cfg.sim);
    p.source = std::make_unique<SimSource>(p.sim);
    p.view = p.sim->view_map();
    p.partition = std::make_shared<RegionPartition>(
        build_region_partition(p.view, cfg.sim.teacher_width, cfg.sim.teacher_height_px,
                               cfg.sim.student_size, cfg.sim.student_size));
    if (!cfg.augment.field_polygon.empty())
        p.field_mask =
            fill_polygon(cfg.sim.student_size, cfg.sim.student_size, cfg.augment.field_polygon);
    else
        p.field_mask = p.sim->field_mask();
    p.settings = engine_settings_from_config(cfg);
    p.settings.augment.anchor_region = anchor_region_from(p.field_mask, *p.partition);
    return p;
}

/// Directory-sourced pipeline: the homography comes from a file, the student
/// lens from the config, the anchor region from the configured field polygon
/// (falling back to all of OUTSIDE).
inline PipelineSetup build_dir_pipeline(const RunConfig& cfg, const std::string& dir) {
    PipelineSetup p;
    p.source = std::make_unique<DirSource>(dir, cfg.distill.fps);
    std::string hfile = cfg.geometry.homography_file.empty()
                            ? dir + "/homography.json"
                            : cfg.geometry.homography_file;
    p.view = ViewMap{load_homography(hfile), cfg.geometry.lens_opt()};
    Frame probe = p.source->student_frame(0);
    p.partition = std::make_shared<RegionPartition>(
        build_region_partition(p.view, cfg.sim.teacher_width, cfg.sim.teacher_height_px,
                               probe.width, probe.height));
    std::vector<Point> poly = cfg.augment.field_polygon;
    if (poly.empty() && !cfg.augment.field_polygon_file.empty())
        poly = load_field_polygon(cfg.augment.field_polygon_file);
    if (!poly.empty())
        p.field_mask = fill_polygon(probe.width, probe.height, poly);
    else
        p.field_mask = BinaryMask(probe.width, probe.height, true);
    p.settings = engine_settings_from_config(cfg);
    p.settings.augment.anchor_region = anchor_region_from(p.field_mask, *p.partition);
    return p;
}

/// Annotated-frame timeline for evaluation: detections joined with ground
/// truth at the annotation period.
inline std::vector<TimedFramePair> annotated_timeline(std::span<const TimedBoxes> detections,
                                                      std::span<const TimedBoxes> gt,
                                                      double annotation_period,
                                                      double fps) {
    std::vector<TimedFramePair> timeline;
    const double half_frame = 0.5 / fps;
    std::size_t gi = 0;
    double next_t = 0.0;
    for (const TimedBoxes& det : detections) {
        if (det.t + half_frame < next_t) continue;
        while (gi < gt.size() && gt[gi].t + half_frame < det.t) ++gi;
        if (gi >= gt.size() || std::abs(gt[gi].t - det.t) > half_frame) continue;
        timeline.push_back({det.t, {det.boxes, gt[gi].boxes}});
        next_t = det.t + annotation_period - half_frame;
    }
    return timeline;
}

}  // namespace duoview
