#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "camkit/data.hpp"
#include "camkit/losses.hpp"
#include "camkit/network.hpp"

namespace camkit {

enum class LossKind { bce_only, combined };

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

/// One stage of the training regime. Classification-only phases must train
/// an ED scope (or the CAM head); the combined loss requires the whole
/// network so the decoder can learn.
struct PhaseConfig {
    std::string name;
    TrainableScope scope = TrainableScope::all;
    LossKind loss = LossKind::combined;
    int epochs = 1; // 0 is a permitted no-op
    int batch_size = 32;
    double learning_rate = 1e-3;
    double clip_norm = 5.0; // global L2 gradient clip per step, 0 disables

    void validate() const;
};

struct TrainingSchedule {
    std::vector<PhaseConfig> phases;
    LossWeights weights;

    void validate() const;
};

/// The staged regime: ED warmup, joint training, dense-only refit, long
/// joint training, then fitting the CAM head on the frozen encoder.
TrainingSchedule default_schedule(int cam_epochs = 10);

/// Classification-only variant for the unannotated baseline: joint phases
/// degrade to ED-only BCE training (the dice term would be identically zero
/// anyway with no masks present).
TrainingSchedule baseline_schedule(TrainingSchedule schedule);

struct TrainingLogEntry {
    std::string phase;
    int epoch = 0; // 0-based within the phase
    double loss_total = 0.0;
    double loss_bce = 0.0;
    double loss_dice = 0.0;
    std::optional<double> val_accuracy;  // percent, absent without validation data
    std::optional<double> val_dice;      // coefficient over annotated subset
    double seconds = 0.0;
};

struct TrainingLog {
    std::vector<TrainingLogEntry> entries;
    void append(const TrainingLog& other) {
        entries.insert(entries.end(), other.entries.begin(), other.entries.end());
    }
};

/// Line-delimited records; a leading meta record carries the toolkit version
/// and the caller's provenance blob.
void save_training_log(const TrainingLog& log, const std::string& path,
                       const std::string& provenance_json = "");

using EpochCallback = std::function<void(const TrainingLogEntry&)>;

/// Runs one phase on the dual-head network: seeded shuffling, exactly
/// phase.epochs passes, a fresh optimizer, per-epoch validation.
TrainingLog run_phase(DualHeadNetwork& net, const MixedAnnotationDataset& data,
                      const std::vector<AnnotatedSample>& validation, const PhaseConfig& phase,
                      const LossWeights& weights, std::uint64_t seed,
                      const EpochCallback& on_epoch = {});

/// CAM-head variant (scope cam_dense_only, BCE on the classification label).
TrainingLog run_phase(CamNetwork& net, const MixedAnnotationDataset& data,
                      const std::vector<AnnotatedSample>& validation, const PhaseConfig& phase,
                      std::uint64_t seed, const EpochCallback& on_epoch = {});

struct ScheduleResult {
    CamNetwork cam;
    TrainingLog log;
    std::optional<double> best_val_accuracy; // best dual-phase validation accuracy
    std::string best_val_phase;
    int best_val_epoch = 0;
    std::vector<std::string> checkpoint_paths;
};

/// Executes the schedule in order, builds the CAM head before the final
/// phase, writes one checkpoint per phase into checkpoint_dir plus a
/// best-validation convenience checkpoint (reported, never substituted).
ScheduleResult run_full_schedule(DualHeadNetwork& net, const MixedAnnotationDataset& data,
                                 const std::vector<AnnotatedSample>& validation,
                                 const TrainingSchedule& schedule, std::uint64_t seed,
                                 const std::string& checkpoint_dir,
                                 const std::string& provenance_json = "");

// ---------------------------------------------------------------------------
// checkpoints

enum class CheckpointKind { dual_head, cam };

void save_checkpoint(const DualHeadNetwork& net, const std::string& path,
                     const std::string& provenance_json = "");
void save_checkpoint(const CamNetwork& net, const std::string& path,
                     const std::string& provenance_json = "");

CheckpointKind peek_checkpoint_kind(const std::string& path);

/// The provenance JSON stored at save time, "" when none was recorded.
std::string read_checkpoint_provenance(const std::string& path);

/// expected (when given) is compared field by field against the stored
/// config; a mismatch raises an error naming the differing field.
DualHeadNetwork load_dual_checkpoint(const std::string& path,
                                     const ArchConfig* expected = nullptr);
CamNetwork load_cam_checkpoint(const std::string& path, const ArchConfig* expected = nullptr);

} // namespace camkit
