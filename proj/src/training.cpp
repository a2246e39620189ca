#include "camkit/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "camkit/optimizer.hpp"
#include "camkit/version.hpp"
#include "json.hpp"

namespace camkit {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string to_string(LossKind k) {
    return k == LossKind::bce_only ? "bce_only" : "combined";
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "bce_only" || s == "bce") return LossKind::bce_only;
    if (s == "combined") return LossKind::combined;
    throw std::invalid_argument("unknown loss kind: " + s);
}

void PhaseConfig::validate() const {
    if (name.empty()) throw std::invalid_argument("phase: name must not be empty");
    if (epochs < 0) throw std::invalid_argument("phase " + name + ": negative epochs");
    if (batch_size < 1) throw std::invalid_argument("phase " + name + ": batch_size must be >= 1");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("phase " + name + ": bad learning rate");
    if (clip_norm < 0 || !std::isfinite(clip_norm))
        throw std::invalid_argument("phase " + name + ": clip_norm must be >= 0 and finite");
    if (loss == LossKind::bce_only) {
        if (scope == TrainableScope::all)
            throw std::invalid_argument("phase " + name +
                                        ": bce_only must train an ED or CAM scope");
    } else {
        if (scope != TrainableScope::all)
            throw std::invalid_argument("phase " + name +
                                        ": the combined loss requires the full network");
    }
}

void TrainingSchedule::validate() const {
    if (phases.empty()) throw std::invalid_argument("schedule has no phases");
    for (const auto& p : phases) p.validate();
    if (!(weights.lambda_dice >= 0) || !std::isfinite(weights.lambda_dice))
        throw std::invalid_argument("schedule: lambda_dice must be finite and non-negative");
    if (phases.back().scope != TrainableScope::cam_dense_only)
        throw std::invalid_argument("schedule must end with CAM fit");
    for (size_t i = 0; i + 1 < phases.size(); ++i)
        if (phases[i].scope == TrainableScope::cam_dense_only)
            throw std::invalid_argument("only the final phase may train the CAM head");
}

TrainingSchedule default_schedule(int cam_epochs) {
    TrainingSchedule s;
    // cam_fit trains a 17-parameter linear probe on frozen features; with the
    // global 1e-3 rate its adaptive steps cannot reach the optimum inside the
    // short epoch budget, so the probe gets a faster rate of its own.
    s.phases = {
        {"ed_warmup", TrainableScope::ed_only, LossKind::bce_only, 5, 32, 1e-3},
        {"joint", TrainableScope::all, LossKind::combined, 10, 32, 1e-3},
        {"ed_dense_refit", TrainableScope::ed_dense_only, LossKind::bce_only, 20, 32, 1e-3},
        {"joint_long", TrainableScope::all, LossKind::combined, 50, 32, 1e-3},
        {"cam_fit", TrainableScope::cam_dense_only, LossKind::bce_only, cam_epochs, 32, 5e-2},
    };
    return s;
}

TrainingSchedule baseline_schedule(TrainingSchedule schedule) {
    for (auto& p : schedule.phases) {
        if (p.scope == TrainableScope::cam_dense_only) continue;
        if (p.loss == LossKind::combined) {
            p.loss = LossKind::bce_only;
            p.scope = TrainableScope::ed_only;
        }
    }
    return schedule;
}

// ---------------------------------------------------------------------------
// shared helpers

namespace {

std::vector<float> mask_to_float(const Mask& m) {
    std::vector<float> out(m.v.size());
    for (size_t i = 0; i < m.v.size(); ++i) out[i] = m.v[i];
    return out;
}

/// Validation accuracy (percent at threshold 0.5) plus mean dice coefficient
/// over annotated samples when seg maps are requested.
struct ValScores {
    std::optional<double> accuracy;
    std::optional<double> dice;
};

template <typename ForwardFn>
ValScores validate_classifier(const std::vector<AnnotatedSample>& validation, int input_size,
                              ForwardFn&& run) {
    ValScores out;
    if (validation.empty()) return out;
    constexpr int kValBatch = 64;
    long long correct = 0;
    double dice_sum = 0.0;
    long long dice_count = 0;
    for (size_t start = 0; start < validation.size(); start += kValBatch) {
        const size_t stop = std::min(validation.size(), start + kValBatch);
        std::vector<const Image*> imgs;
        imgs.reserve(stop - start);
        for (size_t i = start; i < stop; ++i) imgs.push_back(&validation[i].image);
        const BatchTensor batch = pack_batch(imgs, input_size);
        const auto result = run(batch); // {probs, seg (may be empty)}
        for (size_t i = start; i < stop; ++i) {
            const int predicted = result.first[i - start] >= 0.5f ? 1 : 0;
            if (predicted == validation[i].label) ++correct;
        }
        if (!result.second.empty()) {
            const BatchTensor& seg = result.second;
            const size_t plane = static_cast<size_t>(seg.h) * seg.w;
            for (size_t i = start; i < stop; ++i) {
                if (!validation[i].mask) continue;
                const std::vector<float> target = mask_to_float(*validation[i].mask);
                std::span<const float> pred(seg.v.data() + (i - start) * plane, plane);
                dice_sum += 1.0 - dice_loss<float>(pred, target);
                ++dice_count;
            }
        }
    }
    out.accuracy = 100.0 * static_cast<double>(correct) / validation.size();
    if (dice_count > 0) out.dice = dice_sum / dice_count;
    return out;
}

void check_finite(double loss, const PhaseConfig& phase, int epoch) {
    if (!std::isfinite(loss))
        throw std::runtime_error("non-finite loss in phase '" + phase.name + "' epoch " +
                                 std::to_string(epoch));
}

std::vector<size_t> shuffled_indices(size_t count, std::uint64_t seed, int epoch) {
    std::vector<size_t> idx(count);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = Rng::derive(seed, 0x65706f63ULL, static_cast<std::uint64_t>(epoch));
    rng.shuffle(idx);
    return idx;
}

} // namespace

// ---------------------------------------------------------------------------
// dual-head phase

TrainingLog run_phase(DualHeadNetwork& net, const MixedAnnotationDataset& data,
                      const std::vector<AnnotatedSample>& validation, const PhaseConfig& phase,
                      const LossWeights& weights, std::uint64_t seed,
                      const EpochCallback& on_epoch) {
    phase.validate();
    if (phase.scope == TrainableScope::cam_dense_only)
        throw std::invalid_argument("phase " + phase.name +
                                    ": cam_dense_only requires a CamNetwork");
    if (data.samples.empty()) throw std::invalid_argument("run_phase: empty dataset");

    set_trainable(net, phase.scope);
    std::vector<Param*> params = net.params();
    Adam opt(params, phase.learning_rate);
    const bool with_decoder = phase.loss == LossKind::combined;
    const int input = net.config.input_size;

    TrainingLog log;
    for (int epoch = 0; epoch < phase.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto order = shuffled_indices(data.samples.size(), seed, epoch);

        double loss_total = 0.0, loss_bce = 0.0, loss_dice = 0.0;
        for (size_t start = 0; start < order.size(); start += phase.batch_size) {
            const size_t stop = std::min(order.size(), start + phase.batch_size);
            const int bn = static_cast<int>(stop - start);

            std::vector<const Image*> imgs;
            std::vector<float> class_target(bn);
            imgs.reserve(bn);
            for (size_t k = start; k < stop; ++k) {
                const AnnotatedSample& s = data.samples[order[k]];
                imgs.push_back(&s.image);
                class_target[k - start] = static_cast<float>(s.label);
            }
            const BatchTensor batch = pack_batch(imgs, input);

            opt.zero_grad();
            DualForward fwd = net.forward(batch, with_decoder, true);
            std::vector<float> class_grad(bn);

            if (with_decoder) {
                const size_t plane = static_cast<size_t>(fwd.seg_probs.h) * fwd.seg_probs.w;
                std::vector<std::vector<float>> targets(bn);
                std::vector<SegPair<float>> segs(bn);
                for (size_t k = start; k < stop; ++k) {
                    const AnnotatedSample& s = data.samples[order[k]];
                    const size_t i = k - start;
                    segs[i].pred = std::span<const float>(
                        fwd.seg_probs.v.data() + i * plane, plane);
                    if (s.mask) {
                        targets[i] = mask_to_float(*s.mask);
                        segs[i].target = targets[i].data();
                    }
                }
                BatchTensor seg_grad(1, bn, fwd.seg_probs.h, fwd.seg_probs.w);
                std::vector<std::span<float>> grad_spans(bn);
                for (int i = 0; i < bn; ++i)
                    grad_spans[i] = std::span<float>(seg_grad.v.data() + i * plane, plane);
                const auto cl = combined_loss_grad<float>(
                    std::span<const float>(fwd.class_probs),
                    std::span<const float>(class_target),
                    std::span<const SegPair<float>>(segs), weights,
                    std::span<float>(class_grad), std::span<std::span<float>>(grad_spans));
                check_finite(cl.total, phase, epoch);
                loss_total += cl.total * bn;
                loss_bce += cl.bce * bn;
                loss_dice += cl.dice * bn;
                // the classification term backpropagates in logit space
                bce_logit_grad<float>(std::span<const float>(fwd.class_probs),
                                      std::span<const float>(class_target),
                                      std::span<float>(class_grad));
                net.backward_logit(class_grad, &seg_grad);
            } else {
                const float b =
                    bce_logit_grad<float>(std::span<const float>(fwd.class_probs),
                                          std::span<const float>(class_target),
                                          std::span<float>(class_grad));
                check_finite(b, phase, epoch);
                loss_total += b * bn;
                loss_bce += b * bn;
                net.backward_logit(class_grad, nullptr);
            }
            clip_grad_norm(params, phase.clip_norm);
            opt.step();
        }

        const double inv = 1.0 / static_cast<double>(order.size());
        TrainingLogEntry entry;
        entry.phase = phase.name;
        entry.epoch = epoch;
        entry.loss_total = loss_total * inv;
        entry.loss_bce = loss_bce * inv;
        entry.loss_dice = loss_dice * inv;

        const ValScores val = validate_classifier(
            validation, input, [&](const BatchTensor& b) {
                DualForward f = net.forward(b, true, false);
                return std::make_pair(std::move(f.class_probs), std::move(f.seg_probs));
            });
        entry.val_accuracy = val.accuracy;
        entry.val_dice = val.dice;
        entry.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.entries.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    return log;
}

// ---------------------------------------------------------------------------
// CAM phase

TrainingLog run_phase(CamNetwork& net, const MixedAnnotationDataset& data,
                      const std::vector<AnnotatedSample>& validation, const PhaseConfig& phase,
                      std::uint64_t seed, const EpochCallback& on_epoch) {
    phase.validate();
    if (phase.scope != TrainableScope::cam_dense_only)
        throw std::invalid_argument("phase " + phase.name +
                                    ": a CamNetwork trains only cam_dense_only");
    if (phase.loss != LossKind::bce_only)
        throw std::invalid_argument("phase " + phase.name + ": CAM head trains with BCE");
    if (data.samples.empty()) throw std::invalid_argument("run_phase: empty dataset");

    set_trainable(net, phase.scope);
    std::vector<Param*> params = net.params();
    Adam opt(params, phase.learning_rate);
    const int input = net.config.input_size;

    TrainingLog log;
    for (int epoch = 0; epoch < phase.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto order = shuffled_indices(data.samples.size(), seed, epoch);

        double loss_total = 0.0;
        for (size_t start = 0; start < order.size(); start += phase.batch_size) {
            const size_t stop = std::min(order.size(), start + phase.batch_size);
            const int bn = static_cast<int>(stop - start);
            std::vector<const Image*> imgs;
            std::vector<float> class_target(bn);
            imgs.reserve(bn);
            for (size_t k = start; k < stop; ++k) {
                const AnnotatedSample& s = data.samples[order[k]];
                imgs.push_back(&s.image);
                class_target[k - start] = static_cast<float>(s.label);
            }
            const BatchTensor batch = pack_batch(imgs, input);

            opt.zero_grad();
            CamForward fwd = net.forward(batch, true);
            std::vector<float> class_grad(bn);
            const float b = bce_logit_grad<float>(std::span<const float>(fwd.probs),
                                                  std::span<const float>(class_target),
                                                  std::span<float>(class_grad));
            check_finite(b, phase, epoch);
            loss_total += b * bn;
            net.backward_logit(class_grad);
            clip_grad_norm(params, phase.clip_norm);
            opt.step();
        }

        TrainingLogEntry entry;
        entry.phase = phase.name;
        entry.epoch = epoch;
        entry.loss_total = loss_total / static_cast<double>(order.size());
        entry.loss_bce = entry.loss_total;

        const ValScores val = validate_classifier(
            validation, input, [&](const BatchTensor& b2) {
                CamForward f = net.forward(b2, false);
                return std::make_pair(std::move(f.probs), BatchTensor());
            });
        entry.val_accuracy = val.accuracy;
        entry.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.entries.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    return log;
}

// ---------------------------------------------------------------------------
// full schedule

ScheduleResult run_full_schedule(DualHeadNetwork& net, const MixedAnnotationDataset& data,
                                 const std::vector<AnnotatedSample>& validation,
                                 const TrainingSchedule& schedule, std::uint64_t seed,
                                 const std::string& checkpoint_dir,
                                 const std::string& provenance_json) {
    schedule.validate();
    const auto& phases = schedule.phases;
    fs::create_directories(checkpoint_dir);
    ScheduleResult result;

    std::vector<std::vector<float>> best_snapshot;
    auto track_best = [&](const TrainingLogEntry& e) {
        if (!e.val_accuracy) return;
        if (!result.best_val_accuracy || *e.val_accuracy > *result.best_val_accuracy) {
            result.best_val_accuracy = e.val_accuracy;
            result.best_val_phase = e.phase;
            result.best_val_epoch = e.epoch;
            best_snapshot.clear();
            for (const Param* p : std::as_const(net).params()) best_snapshot.push_back(p->value);
        }
    };

    for (size_t i = 0; i + 1 < phases.size(); ++i) {
        TrainingLog phase_log = run_phase(net, data, validation, phases[i], schedule.weights,
                                          Rng::derive(seed, i).next_u64(), track_best);
        result.log.append(phase_log);
        const std::string path = (fs::path(checkpoint_dir) /
                                  ("phase_" + std::to_string(i + 1) + "_" + phases[i].name +
                                   ".ckpt")).string();
        save_checkpoint(net, path, provenance_json);
        result.checkpoint_paths.push_back(path);
    }

    result.cam = build_cam_head(net);
    TrainingLog cam_log = run_phase(result.cam, data, validation, phases.back(),
                                    Rng::derive(seed, phases.size() - 1).next_u64(), {});
    result.log.append(cam_log);
    const std::string cam_path = (fs::path(checkpoint_dir) /
                                  ("phase_" + std::to_string(phases.size()) + "_" +
                                   phases.back().name + ".ckpt")).string();
    save_checkpoint(result.cam, cam_path, provenance_json);
    result.checkpoint_paths.push_back(cam_path);

    if (!best_snapshot.empty()) {
        DualHeadNetwork best = build_model(net.config, net.seed);
        auto params = best.params();
        for (size_t i = 0; i < params.size(); ++i) params[i]->value = best_snapshot[i];
        save_checkpoint(best, (fs::path(checkpoint_dir) / "best_val.ckpt").string(),
                        provenance_json);
    }
    return result;
}

// ---------------------------------------------------------------------------
// training log serialization

void save_training_log(const TrainingLog& log, const std::string& path,
                       const std::string& provenance_json) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write training log: " + path);
    ordered_json meta;
    meta["record"] = "meta";
    meta["version"] = kVersion;
    if (!provenance_json.empty()) {
        meta["provenance"] = ordered_json::parse(provenance_json, nullptr, false);
        if (meta["provenance"].is_discarded()) meta["provenance"] = provenance_json;
    } else {
        meta["provenance"] = nullptr;
    }
    f << meta.dump() << "\n";
    for (const auto& e : log.entries) {
        ordered_json rec;
        rec["record"] = "epoch";
        rec["phase"] = e.phase;
        rec["epoch"] = e.epoch;
        rec["loss_total"] = e.loss_total;
        rec["loss_bce"] = e.loss_bce;
        rec["loss_dice"] = e.loss_dice;
        if (e.val_accuracy) rec["val_accuracy"] = *e.val_accuracy;
        else rec["val_accuracy"] = nullptr;
        if (e.val_dice) rec["val_dice"] = *e.val_dice;
        else rec["val_dice"] = nullptr;
        rec["seconds"] = e.seconds;
        f << rec.dump() << "\n";
    }
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

constexpr char kMagic[8] = {'C', 'A', 'M', 'K', 'I', 'T', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

ordered_json arch_to_json(const ArchConfig& cfg) {
    ordered_json j;
    j["input_size"] = cfg.input_size;
    j["encoder_channels"] = cfg.encoder_channels;
    j["dense_widths"] = cfg.dense_widths;
    return j;
}

ArchConfig arch_from_json(const ordered_json& j) {
    ArchConfig cfg;
    cfg.input_size = j.at("input_size").get<int>();
    cfg.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
    cfg.dense_widths = j.at("dense_widths").get<std::vector<int>>();
    return cfg;
}

void compare_arch(const ArchConfig& stored, const ArchConfig& expected) {
    auto list = [](const std::vector<int>& v) {
        std::string s = "[";
        for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s + "]";
    };
    if (stored.input_size != expected.input_size)
        throw std::runtime_error("checkpoint config mismatch: input_size is " +
                                 std::to_string(stored.input_size) + ", expected " +
                                 std::to_string(expected.input_size));
    if (stored.encoder_channels != expected.encoder_channels)
        throw std::runtime_error("checkpoint config mismatch: encoder_channels is " +
                                 list(stored.encoder_channels) + ", expected " +
                                 list(expected.encoder_channels));
    if (stored.dense_widths != expected.dense_widths)
        throw std::runtime_error("checkpoint config mismatch: dense_widths is " +
                                 list(stored.dense_widths) + ", expected " +
                                 list(expected.dense_widths));
}

void write_checkpoint(const std::vector<const Param*>& params, const ArchConfig& cfg,
                      std::uint64_t seed, CheckpointKind kind, const std::string& path,
                      const std::string& provenance_json) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);

    ordered_json header;
    header["arch"] = arch_to_json(cfg);
    header["seed"] = seed;
    header["version"] = kVersion;
    ordered_json plist = ordered_json::array();
    for (const Param* p : params) {
        ordered_json pj;
        pj["name"] = p->name;
        pj["size"] = p->value.size();
        plist.push_back(pj);
    }
    header["params"] = plist;
    if (!provenance_json.empty()) {
        header["provenance"] = ordered_json::parse(provenance_json, nullptr, false);
        if (header["provenance"].is_discarded()) header["provenance"] = provenance_json;
    } else {
        header["provenance"] = nullptr;
    }
    const std::string header_str = header.dump();

    f.write(kMagic, sizeof(kMagic));
    const std::uint32_t version = kFormatVersion;
    const std::uint8_t kind_byte = kind == CheckpointKind::dual_head ? 0 : 1;
    const std::uint64_t header_len = header_str.size();
    f.write(reinterpret_cast<const char*>(&version), sizeof(version));
    f.write(reinterpret_cast<const char*>(&kind_byte), sizeof(kind_byte));
    f.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    f.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const Param* p : params)
        f.write(reinterpret_cast<const char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

struct CheckpointData {
    CheckpointKind kind;
    ArchConfig arch;
    std::uint64_t seed;
    std::string provenance;
    std::vector<std::pair<std::string, std::vector<float>>> tensors;
};

CheckpointData read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    std::uint32_t version = 0;
    std::uint8_t kind_byte = 0;
    std::uint64_t header_len = 0;
    f.read(magic, sizeof(magic));
    f.read(reinterpret_cast<char*>(&version), sizeof(version));
    f.read(reinterpret_cast<char*>(&kind_byte), sizeof(kind_byte));
    f.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    if (version != kFormatVersion)
        throw std::runtime_error("unsupported checkpoint format version in " + path);
    if (header_len > (1ull << 26))
        throw std::runtime_error("corrupt checkpoint header in " + path);

    std::string header_str(header_len, '\0');
    f.read(header_str.data(), static_cast<std::streamsize>(header_len));
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    const ordered_json header = ordered_json::parse(header_str, nullptr, false);
    if (header.is_discarded()) throw std::runtime_error("corrupt checkpoint header in " + path);

    CheckpointData out;
    out.kind = kind_byte == 0 ? CheckpointKind::dual_head : CheckpointKind::cam;
    out.arch = arch_from_json(header.at("arch"));
    out.seed = header.at("seed").get<std::uint64_t>();
    if (header.contains("provenance") && !header.at("provenance").is_null())
        out.provenance = header.at("provenance").dump();
    for (const auto& pj : header.at("params")) {
        const std::string name = pj.at("name").get<std::string>();
        const size_t size = pj.at("size").get<size_t>();
        std::vector<float> values(size);
        f.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(size * sizeof(float)));
        if (!f) throw std::runtime_error("truncated checkpoint: " + path);
        out.tensors.emplace_back(name, std::move(values));
    }
    return out;
}

template <typename Net>
void fill_params(Net& net, const CheckpointData& data, const std::string& path) {
    auto params = net.params();
    if (params.size() != data.tensors.size())
        throw std::runtime_error("checkpoint " + path + " holds " +
                                 std::to_string(data.tensors.size()) + " tensors, expected " +
                                 std::to_string(params.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        if (params[i]->name != data.tensors[i].first)
            throw std::runtime_error("checkpoint tensor '" + data.tensors[i].first +
                                     "' does not match parameter '" + params[i]->name + "'");
        if (params[i]->value.size() != data.tensors[i].second.size())
            throw std::runtime_error("checkpoint tensor '" + data.tensors[i].first +
                                     "' has wrong size in " + path);
        params[i]->value = data.tensors[i].second;
    }
}

} // namespace

void save_checkpoint(const DualHeadNetwork& net, const std::string& path,
                     const std::string& provenance_json) {
    write_checkpoint(net.params(), net.config, net.seed, CheckpointKind::dual_head, path,
                     provenance_json);
}

void save_checkpoint(const CamNetwork& net, const std::string& path,
                     const std::string& provenance_json) {
    write_checkpoint(net.params(), net.config, net.seed, CheckpointKind::cam, path,
                     provenance_json);
}

CheckpointKind peek_checkpoint_kind(const std::string& path) {
    return read_checkpoint(path).kind;
}

std::string read_checkpoint_provenance(const std::string& path) {
    return read_checkpoint(path).provenance;
}

DualHeadNetwork load_dual_checkpoint(const std::string& path, const ArchConfig* expected) {
    const CheckpointData data = read_checkpoint(path);
    if (data.kind != CheckpointKind::dual_head)
        throw std::runtime_error("checkpoint " + path + " holds a CAM network");
    if (expected) compare_arch(data.arch, *expected);
    DualHeadNetwork net = build_model(data.arch, data.seed);
    fill_params(net, data, path);
    return net;
}

CamNetwork load_cam_checkpoint(const std::string& path, const ArchConfig* expected) {
    const CheckpointData data = read_checkpoint(path);
    if (data.kind != CheckpointKind::cam)
        throw std::runtime_error("checkpoint " + path + " holds a dual-head network");
    if (expected) compare_arch(data.arch, *expected);
    CamNetwork net = build_cam_head(build_model(data.arch, data.seed));
    fill_params(net, data, path);
    return net;
}

} // namespace camkit
