#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "duoview/augment.hpp"
#include "duoview/config.hpp"
#include "duoview/eval.hpp"
#include "duoview/geometry.hpp"
#include "duoview/image_io.hpp"
#include "duoview/motion.hpp"
#include "duoview/sim.hpp"
#include "duoview/student.hpp"
#include "duoview/supervise.hpp"

namespace duoview {

/// Rolling supervised dataset with a fixed memory horizon. Pushes must be in
/// time order; entries older than the newest timestamp minus the window are
/// evicted. Snapshots are immutable copies of the entry list (entries
/// themselves are shared and immutable).
class OnlineDataset {
public:
    explicit OnlineDataset(double memory_window = 300.0) : window_(memory_window) {}

    void push(TrainingExample ex) {
        if (!entries_.empty() && ex.t < entries_.back().t)
            throw std::invalid_argument("OnlineDataset: out-of-order timestamp");
        entries_.push_back(std::move(ex));
        double cutoff = entries_.back().t - window_;
        while (!entries_.empty() && entries_.front().t < cutoff) entries_.pop_front();
    }

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    double newest() const { return entries_.empty() ? 0.0 : entries_.back().t; }
    double oldest() const { return entries_.empty() ? 0.0 : entries_.front().t; }
    double window() const { return window_; }
    void set_window(double w) { window_ = w; }

    std::shared_ptr<const std::vector<TrainingExample>> snapshot() const {
        return std::make_shared<const std::vector<TrainingExample>>(entries_.begin(),
                                                                    entries_.end());
    }

private:
    double window_;
    std::deque<TrainingExample> entries_;
};

/// Ordered student frames plus synchronized teacher detections.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual int frame_count() const = 0;
    virtual double fps() const = 0;
    virtual Frame student_frame(int idx) const = 0;
    virtual std::vector<Box> teacher_boxes(int idx) const = 0;
};

class SimSource final : public FrameSource {
public:
    explicit SimSource(std::shared_ptr<const Simulator> sim)
        : sim_(std::move(sim)), noise_(sim_->default_noise()) {}
    int frame_count() const override { return sim_->frame_count(); }
    double fps() const override { return sim_->config().fps; }
    Frame student_frame(int idx) const override { return sim_->student_frame(idx); }
    std::vector<Box> teacher_boxes(int idx) const override {
        return sim_->teacher_oracle(idx, noise_);
    }
    const Simulator& sim() const { return *sim_; }

private:
    std::shared_ptr<const Simulator> sim_;
    TeacherNoise noise_;
};

/// Frames and teacher boxes read back from a simulate output directory (or
/// any directory following the same layout).
class DirSource final : public FrameSource {
public:
    DirSource(std::string dir, double fps) : dir_(std::move(dir)), fps_(fps) {
        auto boxes = read_detections_jsonl(dir_ + "/teacher_boxes.jsonl");
        for (auto& tb : boxes) teacher_.push_back(std::move(tb));
        count_ = static_cast<int>(teacher_.size());
        if (count_ == 0) throw std::runtime_error("DirSource: no teacher boxes in " + dir_);
    }
    int frame_count() const override { return count_; }
    double fps() const override { return fps_; }
    Frame student_frame(int idx) const override {
        char name[64];
        std::snprintf(name, sizeof(name), "/student_%06d.pgm", idx);
        Frame f = load_image(dir_ + name);
        f.timestamp = idx / fps_;
        return f;
    }
    std::vector<Box> teacher_boxes(int idx) const override {
        return teacher_[static_cast<std::size_t>(idx)].boxes;
    }

private:
    std::string dir_;
    double fps_;
    int count_ = 0;
    std::vector<TimedBoxes> teacher_;
};

struct SwapRecord {
    double swap_time = 0.0;
    int epoch_index = 0;
    LossBreakdown loss;
};

enum class ClockMode { kReplay, kWall };
enum class RunMode { kOnline, kOffline };

struct EngineSettings {
    VibeParams vibe;
    int dilate_kernel = 11;
    bool augment_enabled = true;
    AugmentConfig augment;  // anchor_region filled by the caller
    GateMode gate = GateMode::kMotion;
    StudentSettings student;
    DistillSettings distill;
    EvalConfig eval;
    RunMode mode = RunMode::kOnline;
    ClockMode clock = ClockMode::kReplay;
    bool pace_realtime = true;  // wall mode: sleep to match fps
    bool trainer_enabled = true;
    std::uint64_t seed = 1;
};

struct RunOutputs {
    std::vector<TimedBoxes> detections;      // final output, every frame
    std::vector<TimedBoxes> raw_detections;  // before motion gating, at annotated times
    std::vector<SwapRecord> training_log;
    std::vector<double> frame_latencies;  // wall-clock seconds per frame (wall mode)
    int frames = 0;
    int swaps = 0;
    int supervised_frames = 0;
    std::vector<double> final_weights;
};

/// Callback fired after each processed frame; dumps and progress hang here.
using FrameHook =
    std::function<void(int idx, double t, const Frame& frame, const MotionMasks& masks,
                       const SupervisionTarget* target)>;

/// The online distillation engine. Exactly two logical workers exist: the
/// inference worker owns the live detector and the ViBe model, the training
/// worker owns the training detector; they exchange immutable weight blobs
/// and dataset snapshots. Replay mode runs both on one thread with epoch
/// boundaries pinned to frame indices, which makes runs bit-reproducible.
class Engine {
public:
    Engine(const FrameSource& source, const ViewMap& view,
           std::shared_ptr<const RegionPartition> partition, EngineSettings settings)
        : src_(source), view_(view), partition_(std::move(partition)),
          settings_(std::move(settings)) {
        if (settings_.augment.anchor_region.width() == 0 && settings_.augment_enabled)
            throw std::invalid_argument("Engine: augment enabled but no anchor region");
    }

    RunOutputs run(FrameHook hook = {}) {
        RunOutputs out;
        auto detector = make_detector();
        auto trainer = detector->clone();
        OnlineDataset dataset(settings_.distill.memory_window);
        if (settings_.mode == RunMode::kOffline) dataset.set_window(1e18);

        Pcg32 vibe_rng = Pcg32(settings_.seed, 21);
        Pcg32 aug_rng = Pcg32(settings_.seed, 31);

        const int frames = src_.frame_count();
        const double fps = src_.fps();
        const int teacher_every =
            std::max(1, static_cast<int>(settings_.distill.teacher_period * fps + 0.5));
        const int swap_every =
            std::max(1, static_cast<int>(settings_.distill.swap_period * fps + 0.5));
        const int dump_every =
            std::max(1, static_cast<int>(settings_.eval.annotation_period * fps + 0.5));

        if (settings_.clock == ClockMode::kWall)
            return run_wall(std::move(detector), std::move(trainer), dataset, vibe_rng, aug_rng,
                            teacher_every, dump_every, hook);

        // ---- replay: single-threaded, deterministic interleaving ----
        std::optional<VibeModel> vibe;
        int epoch_index = 0;
        for (int idx = 0; idx < frames; ++idx) {
            const double t = idx / fps;
            Frame frame = src_.student_frame(idx);
            if (!vibe) vibe.emplace(frame, settings_.vibe, vibe_rng);
            MotionMasks masks =
                make_motion_masks(vibe->segment_update(frame, vibe_rng), settings_.dilate_kernel);

            auto preds = detector->predict(frame, masks);
            auto kept = nms(preds, settings_.student.nms_iou);
            auto finals = postprocess_inference(kept, masks);
            out.detections.push_back({t, finals});
            if (idx % dump_every == 0) out.raw_detections.push_back({t, kept});

            std::shared_ptr<const SupervisionTarget> target;
            if (idx % teacher_every == 0 && settings_.trainer_enabled) {
                TrainingExample ex = build_example(frame, masks, *vibe, idx, aug_rng, *detector);
                target = ex.target;
                dataset.push(std::move(ex));
                ++out.supervised_frames;
            }
            if (hook) hook(idx, t, frame, masks, target.get());

            bool do_epoch = settings_.mode == RunMode::kOnline && settings_.trainer_enabled &&
                            idx > 0 && idx % swap_every == 0 && !dataset.empty();
            if (do_epoch) {
                auto snap = dataset.snapshot();
                LossBreakdown lb = train_epoch(*trainer, *snap);
                detector->load_weights(trainer->snapshot_weights());
                out.training_log.push_back({t, epoch_index++, lb});
                ++out.swaps;
            }
        }
        if (settings_.mode == RunMode::kOffline && settings_.trainer_enabled &&
            !dataset.empty()) {
            // offline: train to convergence on the fixed dataset, then rerun
            // the whole stream with the final weights
            auto snap = dataset.snapshot();
            for (int e = 0; e < settings_.distill.offline_epochs; ++e) {
                LossBreakdown lb = train_epoch(*trainer, *snap);
                out.training_log.push_back(
                    {static_cast<double>(frames) / fps, epoch_index++, lb});
            }
            detector->load_weights(trainer->snapshot_weights());
            ++out.swaps;
            out.detections.clear();
            out.raw_detections.clear();
            Pcg32 vibe_rng2 = Pcg32(settings_.seed, 21);
            std::optional<VibeModel> vibe2;
            for (int idx = 0; idx < frames; ++idx) {
                const double t = idx / fps;
                Frame frame = src_.student_frame(idx);
                if (!vibe2) vibe2.emplace(frame, settings_.vibe, vibe_rng2);
                MotionMasks masks = make_motion_masks(vibe2->segment_update(frame, vibe_rng2),
                                                      settings_.dilate_kernel);
                auto preds = detector->predict(frame, masks);
                auto kept = nms(preds, settings_.student.nms_iou);
                out.detections.push_back({t, postprocess_inference(kept, masks)});
                if (idx % dump_every == 0) out.raw_detections.push_back({t, kept});
            }
        }
        out.frames = frames;
        out.final_weights = detector->snapshot_weights();
        return out;
    }

private:
    std::unique_ptr<Detector> make_detector() const {
        if (settings_.student.kind == "blob")
            return std::make_unique<BlobDetector>(settings_.student.blob_min_area,
                                                  settings_.student.blob_max_area);
        int size = partition_->overlap.width();
        return std::make_unique<GridDetector>(settings_.student.grid, size,
                                              partition_->overlap.height());
    }

    /// Builds one supervised example: project teacher boxes, paste artificial
    /// players, segment the augmented frame against the live background model
    /// (no update) so pastes count as motion, and assemble the gated target.
    TrainingExample build_example(const Frame& frame, const MotionMasks& live_masks,
                                  const VibeModel& vibe, int idx, Pcg32& aug_rng,
                                  const Detector& trainer) {
        auto teacher = src_.teacher_boxes(idx);
        std::vector<Box> projected;
        for (const Box& b : teacher) {
            auto p = view_.project_box_to_student(b);
            if (p) projected.push_back(*p);
        }

        std::shared_ptr<Frame> train_frame;
        std::vector<Box> artificial;
        MotionMasks target_masks;
        if (settings_.augment_enabled && !projected.empty()) {
            AugmentResult aug = augment_frame(frame, projected, settings_.augment, aug_rng);
            artificial = std::move(aug.artificial_boxes);
            if (!artificial.empty()) {
                train_frame = std::make_shared<Frame>(std::move(aug.frame));
                target_masks =
                    make_motion_masks(vibe.segment(*train_frame), settings_.dilate_kernel);
            }
        }
        if (!train_frame) {
            train_frame = std::make_shared<Frame>(frame);
            target_masks = live_masks;
        }

        auto target = std::make_shared<SupervisionTarget>(
            assemble_target(teacher, view_, artificial, std::move(target_masks), partition_,
                            settings_.gate));
        TrainingExample ex;
        ex.t = frame.timestamp;
        ex.target = target;
        if (const auto* grid = dynamic_cast<const GridDetector*>(&trainer))
            ex.features = std::make_shared<FeatureGrid>(
                grid->extract_features(*train_frame, target->motion));
        if (settings_.distill.store_frames || !ex.features) ex.frame = train_frame;
        return ex;
    }

    LossBreakdown train_epoch(Detector& trainer, const std::vector<TrainingExample>& snap) {
        LossBreakdown mean;
        int batches = 0;
        const int bs = std::max(1, settings_.student.batch);
        for (std::size_t i = 0; i < snap.size(); i += static_cast<std::size_t>(bs)) {
            std::size_t hi = std::min(snap.size(), i + static_cast<std::size_t>(bs));
            LossBreakdown lb = trainer.train_step(
                std::span<const TrainingExample>(snap.data() + i, hi - i), settings_.student.lr);
            mean.coord_loss += lb.coord_loss;
            mean.obj_loss += lb.obj_loss;
            mean.noobj_loss += lb.noobj_loss;
            ++batches;
        }
        if (batches > 0) {
            mean.coord_loss /= batches;
            mean.obj_loss /= batches;
            mean.noobj_loss /= batches;
            mean.total = mean.coord_loss + mean.obj_loss + mean.noobj_loss;
        }
        return mean;
    }

    RunOutputs run_wall(std::unique_ptr<Detector> detector, std::unique_ptr<Detector> trainer,
                        OnlineDataset& dataset, Pcg32& vibe_rng, Pcg32& aug_rng,
                        int teacher_every, int dump_every, FrameHook& hook) {
        RunOutputs out;
        const int frames = src_.frame_count();
        const double fps = src_.fps();

        std::mutex dataset_mu;
        std::mutex weights_mu;
        std::vector<double> published;
        std::uint64_t published_version = 0;
        std::atomic<bool> done{false};

        std::thread training_thread;
        if (settings_.mode == RunMode::kOnline && settings_.trainer_enabled) {
            training_thread = std::thread([&] {
                int epoch_index = 0;
                while (!done.load(std::memory_order_acquire)) {
                    std::shared_ptr<const std::vector<TrainingExample>> snap;
                    double newest = 0.0;
                    {
                        std::lock_guard<std::mutex> lk(dataset_mu);
                        if (!dataset.empty()) {
                            snap = dataset.snapshot();
                            newest = dataset.newest();
                        }
                    }
                    if (!snap || snap->empty()) {
                        std::this_thread::sleep_for(std::chrono::milliseconds(5));
                        continue;
                    }
                    LossBreakdown lb = train_epoch(*trainer, *snap);
                    {
                        std::lock_guard<std::mutex> lk(weights_mu);
                        published = trainer->snapshot_weights();
                        ++published_version;
                    }
                    out.training_log.push_back({newest, epoch_index++, lb});
                }
            });
        }

        std::optional<VibeModel> vibe;
        std::uint64_t seen_version = 0;
        auto wall_start = std::chrono::steady_clock::now();
        for (int idx = 0; idx < frames; ++idx) {
            const double t = idx / fps;
            if (settings_.pace_realtime) {
                auto due = wall_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                            std::chrono::duration<double>(t));
                std::this_thread::sleep_until(due);
            }
            auto t0 = std::chrono::steady_clock::now();
            // adopt newly published weights between frames; a frame is always
            // processed with exactly one weight version
            {
                std::lock_guard<std::mutex> lk(weights_mu);
                if (published_version != seen_version) {
                    detector->load_weights(published);
                    seen_version = published_version;
                    ++out.swaps;
                }
            }
            Frame frame = src_.student_frame(idx);
            if (!vibe) vibe.emplace(frame, settings_.vibe, vibe_rng);
            MotionMasks masks =
                make_motion_masks(vibe->segment_update(frame, vibe_rng), settings_.dilate_kernel);
            auto preds = detector->predict(frame, masks);
            auto kept = nms(preds, settings_.student.nms_iou);
            out.detections.push_back({t, postprocess_inference(kept, masks)});
            if (idx % dump_every == 0) out.raw_detections.push_back({t, kept});

            std::shared_ptr<const SupervisionTarget> target;
            if (idx % teacher_every == 0 && settings_.trainer_enabled) {
                // examples are built on the inference thread (it owns ViBe);
                // only the dataset push is shared
                TrainingExample ex = build_example(frame, masks, *vibe, idx, aug_rng, *detector);
                target = ex.target;
                {
                    std::lock_guard<std::mutex> lk(dataset_mu);
                    dataset.push(std::move(ex));
                }
                ++out.supervised_frames;
            }
            if (hook) hook(idx, t, frame, masks, target.get());
            out.frame_latencies.push_back(
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        done.store(true, std::memory_order_release);
        if (training_thread.joinable()) training_thread.join();
        out.frames = frames;
        out.final_weights = detector->snapshot_weights();
        return out;
    }

    const FrameSource& src_;
    ViewMap view_;
    std::shared_ptr<const RegionPartition> partition_;
    EngineSettings settings_;
};

inline void write_training_log_csv(const std::string& path,
                                   std::span<const SwapRecord> log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_training_log_csv: cannot open " + path);
    out << "swap_time,epoch_index,coord_loss,obj_loss,noobj_loss,total\n";
    for (const auto& r : log)
        out << r.swap_time << "," << r.epoch_index << "," << r.loss.coord_loss << ","
            << r.loss.obj_loss << "," << r.loss.noobj_loss << "," << r.loss.total << "\n";
}

}  // namespace duoview
