// duoview command-line front end: simulate a dual-camera world, run the
// online/offline distillation pipeline, evaluate detections, or estimate a
// homography from a correspondence file.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "duoview/config.hpp"
#include "duoview/distill.hpp"
#include "duoview/eval.hpp"
#include "duoview/image_io.hpp"
#include "duoview/pipeline.hpp"

namespace fs = std::filesystem;
using namespace duoview;

namespace {

int log_level() {
    const char* env = std::getenv("DUOVIEW_LOG");
    if (!env) return 1;
    std::string v(env);
    if (v == "debug") return 2;
    if (v == "quiet" || v == "error") return 0;
    return 1;
}

void info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[duoview] " << msg << "\n";
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
    RunConfig cfg = load_config(config_path);
    fs::create_directories(out_dir);
    Simulator sim(cfg.sim);
    const int frames = sim.frame_count();
    info("simulate: " + std::to_string(frames) + " frames to " + out_dir);

    std::vector<TimedBoxes> gt_student, gt_teacher, oracle;
    TeacherNoise noise = sim.default_noise();
    for (int i = 0; i < frames; ++i) {
        double t = sim.frame_time(i);
        char name[64];
        std::snprintf(name, sizeof(name), "/student_%06d.pgm", i);
        save_pnm(sim.student_frame(i), out_dir + name);
        std::snprintf(name, sizeof(name), "/teacher_%06d.pgm", i);
        save_pnm(sim.teacher_frame(i), out_dir + name);
        gt_student.push_back({t, sim.student_gt(i)});
        gt_teacher.push_back({t, sim.teacher_gt(i)});
        oracle.push_back({t, sim.teacher_oracle(i, noise)});
    }
    write_detections_jsonl(out_dir + "/gt.jsonl", gt_student, false);
    write_detections_jsonl(out_dir + "/gt_teacher.jsonl", gt_teacher, false);
    write_detections_jsonl(out_dir + "/teacher_boxes.jsonl", oracle, true);
    save_homography(sim.homography(), out_dir + "/homography.json");
    auto poly = sim.field_polygon();
    save_field_polygon(poly, out_dir + "/field_polygon.json");
    info("simulate: done");
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& in_dir,
            const std::string& out_dir, const std::string& mode_str,
            const std::string& clock_str, bool dump_supervision, bool no_train) {
    RunConfig cfg = load_config(config_path);
    fs::create_directories(out_dir);

    PipelineSetup p = in_dir.empty() ? build_sim_pipeline(cfg) : build_dir_pipeline(cfg, in_dir);
    p.settings.mode = mode_str == "offline" ? RunMode::kOffline : RunMode::kOnline;
    p.settings.clock = clock_str == "wall" ? ClockMode::kWall : ClockMode::kReplay;
    p.settings.trainer_enabled = !no_train;

    FrameHook hook;
    if (dump_supervision) {
        fs::create_directories(out_dir + "/supervision");
        hook = [&](int idx, double, const Frame&, const MotionMasks&,
                   const SupervisionTarget* target) {
            if (!target) return;
            char name[96];
            std::snprintf(name, sizeof(name), "/supervision/target_%06d.json", idx);
            std::ofstream js(out_dir + name);
            nlohmann::json arr = nlohmann::json::array();
            for (const Box& b : target->gt_boxes)
                arr.push_back({{"cx", b.cx}, {"cy", b.cy}, {"w", b.w}, {"h", b.h}});
            js << arr.dump() << "\n";
            std::snprintf(name, sizeof(name), "/supervision/ignore_%06d.pgm", idx);
            save_mask_pgm(target->ignore_mask(), out_dir + name);
            std::snprintf(name, sizeof(name), "/supervision/penalize_%06d.pgm", idx);
            save_mask_pgm(target->penalize_mask(), out_dir + name);
        };
    }

    Engine engine(*p.source, p.view, p.partition, p.settings);
    info("run: " + std::to_string(p.source->frame_count()) + " frames, mode=" + mode_str +
         ", clock=" + clock_str);
    RunOutputs out = engine.run(hook);

    write_detections_jsonl(out_dir + "/detections.jsonl", out.detections);
    write_detections_jsonl(out_dir + "/detections_raw.jsonl", out.raw_detections);
    write_training_log_csv(out_dir + "/training_log.csv", out.training_log);
    save_mask_pgm(p.partition->overlap, out_dir + "/overlap.pgm");
    save_config(cfg, out_dir + "/run_config.json");
    if (p.sim) {
        std::vector<TimedBoxes> gt;
        for (int i = 0; i < p.sim->frame_count(); ++i)
            gt.push_back({p.sim->frame_time(i), p.sim->student_gt(i)});
        write_detections_jsonl(out_dir + "/gt.jsonl", gt, false);
    }
    if (cfg.student.kind == "grid" && !out.final_weights.empty()) {
        GridDetector det(cfg.student.grid, p.partition->overlap.width(),
                         p.partition->overlap.height());
        det.load_weights(out.final_weights);
        save_weights(out_dir + "/weights.bin", det);
    }
    info("run: " + std::to_string(out.frames) + " frames, " + std::to_string(out.swaps) +
         " weight swaps, " + std::to_string(out.supervised_frames) + " supervised frames");
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& det_path,
             const std::string& gt_path, const std::string& out_dir,
             const std::string& overlap_path) {
    RunConfig cfg = load_config(config_path);
    fs::create_directories(out_dir);
    auto detections = read_detections_jsonl(det_path);
    auto gt = read_detections_jsonl(gt_path);
    if (detections.empty() || gt.empty())
        throw std::runtime_error("eval: empty detections or ground truth");

    auto timeline =
        annotated_timeline(detections, gt, cfg.eval.annotation_period, cfg.distill.fps);
    if (timeline.empty()) throw std::runtime_error("eval: no overlapping timestamps");

    std::optional<BinaryMask> overlap;
    if (!overlap_path.empty()) overlap = load_mask_pgm(overlap_path);

    auto series_to_rows = [](const std::vector<WindowPoint>& s) {
        std::vector<std::vector<double>> rows;
        for (const auto& p : s) rows.push_back({p.t, p.ap});
        return rows;
    };

    auto overall = rolling_window_ap(timeline, cfg.eval);
    write_series_csv(out_dir + "/ap_overall.csv", "t,ap", series_to_rows(overall));

    nlohmann::json summary;
    std::vector<FramePair> all_frames;
    for (const auto& tf : timeline) all_frames.push_back(tf.pair);
    summary["frames"] = detections.size();
    summary["annotated_frames"] = timeline.size();
    summary["tiou"] = cfg.eval.tiou;
    auto ap_all = average_precision(all_frames, cfg.eval.tiou);
    summary["ap_overall"] = ap_all ? nlohmann::json(*ap_all) : nlohmann::json();

    if (overlap) {
        BinaryMask outside(overlap->width(), overlap->height());
        for (int y = 0; y < outside.height(); ++y)
            for (int x = 0; x < outside.width(); ++x)
                if (!overlap->at(x, y)) outside.set(x, y);
        auto in_series = rolling_window_ap(timeline, cfg.eval, &*overlap);
        auto out_series = rolling_window_ap(timeline, cfg.eval, &outside);
        write_series_csv(out_dir + "/ap_overlap.csv", "t,ap", series_to_rows(in_series));
        write_series_csv(out_dir + "/ap_outside.csv", "t,ap", series_to_rows(out_series));
        auto ap_in = region_restricted_eval(all_frames, *overlap, cfg.eval.tiou);
        auto ap_out = region_restricted_eval(all_frames, outside, cfg.eval.tiou);
        summary["ap_overlap"] = ap_in ? nlohmann::json(*ap_in) : nlohmann::json();
        summary["ap_outside"] = ap_out ? nlohmann::json(*ap_out) : nlohmann::json();
    }

    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(i * 0.05);
    auto sweep = tiou_sweep(all_frames, grid);
    {
        std::vector<std::vector<double>> rows;
        for (auto& [tv, ap] : sweep) rows.push_back({tv, ap});
        write_series_csv(out_dir + "/tiou_sweep.csv", "tiou,ap", rows);
    }

    std::vector<std::pair<double, int>> counts, gt_counts;
    for (const auto& d : detections) counts.push_back({d.t, static_cast<int>(d.boxes.size())});
    for (const auto& tf : timeline)
        gt_counts.push_back({tf.t, static_cast<int>(tf.pair.gts.size())});
    auto counting = counting_series(counts, cfg.eval, gt_counts);
    {
        std::vector<std::vector<double>> rows;
        for (const auto& p : counting.series) rows.push_back({p.t, p.mean, p.stddev});
        write_series_csv(out_dir + "/counting.csv", "t,mean,std", rows);
    }
    summary["counting_rmse"] =
        counting.rmse ? nlohmann::json(*counting.rmse) : nlohmann::json();

    std::ofstream js(out_dir + "/summary.json");
    js << summary.dump(2) << "\n";
    info("eval: " + std::to_string(timeline.size()) + " annotated frames");
    return 0;
}

int cmd_homography(const std::string& points_path, const std::string& out_path,
                   const std::string& config_path) {
    auto pairs = load_correspondences(points_path);
    std::optional<FisheyeModel> lens;
    if (!config_path.empty()) {
        RunConfig cfg = load_config(config_path);
        lens = cfg.geometry.lens_opt();
    }
    if (lens) {
        // the homography relates the undistorted planes, so undo the student
        // lens on the student-side points first
        std::vector<Correspondence> undist;
        for (const auto& c : pairs) {
            auto u = lens->undistort(c.student);
            if (u) undist.push_back({c.teacher, *u});
        }
        pairs = std::move(undist);
    }
    HomographyFit fit = estimate_homography(pairs);
    save_homography(fit.h, out_path);
    std::printf("homography: %zu correspondences, mean reprojection error %.6f px\n",
                pairs.size(), fit.mean_reprojection_error);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"duoview: multiview online distillation for player detection"};
    app.require_subcommand(1);

    std::string config_path, out_dir, in_dir, det_path, gt_path, overlap_path, points_path,
        out_path;
    std::string mode = "online", clock = "replay";
    bool dump_supervision = false, no_train = false;

    auto* sim = app.add_subcommand("simulate", "render a synthetic dual-camera recording");
    sim->add_option("--config", config_path, "run configuration (JSON)")->required();
    sim->add_option("--out", out_dir, "output directory")->required();

    auto* run = app.add_subcommand("run", "run the detection + distillation pipeline");
    run->add_option("--config", config_path, "run configuration (JSON)")->required();
    run->add_option("--in", in_dir, "input directory (omit to stream from the simulator)");
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--mode", mode, "online|offline")
        ->check(CLI::IsMember({"online", "offline"}));
    run->add_option("--clock", clock, "replay|wall")->check(CLI::IsMember({"replay", "wall"}));
    run->add_flag("--dump-supervision", dump_supervision, "write per-frame supervision dumps");
    run->add_flag("--no-train", no_train, "disable the trainer (initial weights only)");

    auto* ev = app.add_subcommand("eval", "evaluate detections against ground truth");
    ev->add_option("--config", config_path, "run configuration (JSON)")->required();
    ev->add_option("--detections", det_path, "detections.jsonl")->required();
    ev->add_option("--gt", gt_path, "ground-truth jsonl")->required();
    ev->add_option("--out", out_dir, "output directory")->required();
    ev->add_option("--overlap", overlap_path, "overlap mask PGM for region-restricted AP");

    auto* ho = app.add_subcommand("homography", "estimate a homography from correspondences");
    ho->add_option("--points", points_path, "text file: tx ty sx sy per line")->required();
    ho->add_option("--out", out_path, "output homography JSON")->required();
    ho->add_option("--config", config_path, "config providing the student lens (optional)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(config_path, out_dir);
        if (run->parsed())
            return cmd_run(config_path, in_dir, out_dir, mode, clock, dump_supervision, no_train);
        if (ev->parsed()) return cmd_eval(config_path, det_path, gt_path, out_dir, overlap_path);
        if (ho->parsed()) return cmd_homography(points_path, out_path, config_path);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
