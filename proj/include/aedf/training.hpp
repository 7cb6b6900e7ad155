#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "aedf/checkpoint.hpp"
#include "aedf/evaluation.hpp"
#include "aedf/features.hpp"
#include "aedf/model.hpp"

namespace aedf {

enum class Strategy { OneStage, TwoStageGAP, TwoStageFlatten, BaselineOnly };

inline std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::OneStage: return "one-stage";
        case Strategy::TwoStageGAP: return "ts-gap";
        case Strategy::TwoStageFlatten: return "ts-fla";
        case Strategy::BaselineOnly: return "baseline";
    }
    throw ConfigError("unknown strategy");
}

struct TrainConfig {
    Strategy strategy = Strategy::OneStage;
    ClassifierKind classifier = ClassifierKind::FrameWise;
    DiscriminatorConfig disc = DiscriminatorConfig::reference();
    float lambda = 0.1f;
    int epochs_per_stage = 200;
    int batch_size = 16;
    float lr_fixed = 1e-4f;
    float lr_stage1_start = 1e-3f;
    float lr_stage1_end = 1e-5f;
    float adam_beta1 = 0.9f;
    float adam_beta2 = 0.999f;
    float adam_eps = 1e-8f;
    std::uint64_t seed = 1;

    void validate() const {
        if (lambda < 0.0f || lambda > 1.0f) throw ConfigError("lambda must be in [0, 1]");
        if (epochs_per_stage < 1) throw ConfigError("need at least one epoch per stage");
        if (batch_size < 1) throw ConfigError("batch size must be >= 1");
        if (strategy == Strategy::BaselineOnly && classifier != ClassifierKind::Baseline)
            throw ConfigError("baseline strategy requires the baseline classifier");
        if (strategy != Strategy::BaselineOnly && classifier == ClassifierKind::Baseline)
            throw ConfigError("baseline classifier requires the baseline strategy");
        disc.validate();
    }

    ModelConfig model_config() const { return {disc, classifier, lambda}; }
};

/// CLI strategy names map onto (strategy, classifier) pairs.
inline TrainConfig strategy_preset(const std::string& name) {
    TrainConfig cfg;
    if (name == "baseline") {
        cfg.strategy = Strategy::BaselineOnly;
        cfg.classifier = ClassifierKind::Baseline;
    } else if (name == "one-stage-fc") {
        cfg.strategy = Strategy::OneStage;
        cfg.classifier = ClassifierKind::FlatClassifier;
    } else if (name == "one-stage-fw") {
        cfg.strategy = Strategy::OneStage;
        cfg.classifier = ClassifierKind::FrameWise;
    } else if (name == "ts-fla") {
        cfg.strategy = Strategy::TwoStageFlatten;
        cfg.classifier = ClassifierKind::FrameWise;
    } else if (name == "ts-gap") {
        cfg.strategy = Strategy::TwoStageGAP;
        cfg.classifier = ClassifierKind::FrameWise;
    } else {
        throw ConfigError(cat("unknown strategy '", name,
                              "' (expected baseline, one-stage-fc, one-stage-fw, ts-fla, ts-gap)"));
    }
    return cfg;
}

/// Stage-1 pre-training decays exponentially from 1e-3 to 1e-5 across the
/// stage; stage 2 and single-stage training hold 1e-4.
inline float lr_schedule(int stage, int epoch, const TrainConfig& cfg) {
    if (stage != 1 && stage != 2) throw ContractError(cat("lr_schedule: bad stage ", stage));
    if (epoch < 0 || epoch >= cfg.epochs_per_stage)
        throw ContractError(cat("lr_schedule: epoch ", epoch, " outside [0, ",
                                cfg.epochs_per_stage, ")"));
    const bool two_stage =
        cfg.strategy == Strategy::TwoStageGAP || cfg.strategy == Strategy::TwoStageFlatten;
    if (stage == 1 && two_stage) {
        if (cfg.epochs_per_stage == 1) return cfg.lr_stage1_start;
        const double ratio = static_cast<double>(cfg.lr_stage1_end) / cfg.lr_stage1_start;
        const double frac = static_cast<double>(epoch) / (cfg.epochs_per_stage - 1);
        return static_cast<float>(cfg.lr_stage1_start * std::pow(ratio, frac));
    }
    return cfg.lr_fixed;
}

struct EpochRecord {
    int epoch = 0;
    int stage = 1;
    double l_dis = 0.0;
    double l_bce = 0.0;
    double val_auc = std::nan("");
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    double best_val_auc = std::nan("");
    std::string best_checkpoint;
    std::string final_checkpoint;
    double wall_seconds = 0.0;

    nlohmann::json to_json(bool include_timing = true) const {
        nlohmann::json hist = nlohmann::json::array();
        for (const auto& e : epochs)
            hist.push_back({{"epoch", e.epoch},
                            {"stage", e.stage},
                            {"l_dis", e.l_dis},
                            {"l_bce", e.l_bce},
                            {"val_auc", e.val_auc}});
        nlohmann::json j{{"epochs", hist},
                         {"best_epoch", best_epoch},
                         {"best_val_auc", best_val_auc},
                         {"best_checkpoint", best_checkpoint},
                         {"final_checkpoint", final_checkpoint}};
        if (include_timing) j["wall_seconds"] = wall_seconds;
        return j;
    }
};

/// Training inputs: preloaded features plus the train/validation item lists.
struct TrainData {
    const FeatureSet* features = nullptr;
    std::vector<LabeledItem> train;
    std::vector<LabeledItem> val;

    int frames() const {
        if (train.empty()) throw InputError("empty training set");
        return features->get(train.front().itemid).dim(2);
    }
};

namespace train_detail {

struct ClipLosses {
    Tensor total;
    double l_dis = 0.0;
    double l_bce = 0.0;
};

inline void check_batch_frames(const TrainData& data, const std::vector<LabeledItem>& batch,
                               int frames) {
    for (const auto& item : batch) {
        const Tensor& x = data.features->get(item.itemid);
        if (x.dim(2) != frames)
            throw DimensionError(cat("mixed clip durations in one batch: '", item.itemid,
                                     "' has ", x.dim(2), " frames, expected ", frames));
    }
}

inline void ensure_finite(double v, int stage, int epoch, const std::string& what) {
    if (!std::isfinite(v))
        throw NumericError(cat("non-finite ", what, " at stage ", stage, " epoch ", epoch,
                               "; aborting"));
}

}  // namespace train_detail

namespace fs_detail = std::filesystem;

/// Single-stage supervised training: mean combined loss per batch, Adam at
/// the scheduled rate, epoch-wise validation AUC, best checkpoint retained.
/// The one-stage combined loss pairs the discriminative term on flattened
/// representations with BCE on the classifier score; the baseline kind
/// trains on BCE alone.
inline TrainReport train_one_stage(const TrainData& data, ParamStore& store,
                                   const TrainConfig& cfg, const std::string& out_dir,
                                   int stage_no = 1) {
    cfg.validate();
    if (data.train.empty()) throw InputError("empty training set");
    const auto t_start = std::chrono::steady_clock::now();
    fs_detail::create_directories(out_dir);
    const int frames = data.frames();
    const ModelConfig model_cfg = cfg.model_config();

    TrainReport report;
    report.best_checkpoint = (fs_detail::path(out_dir) / "best.ckpt").string();
    report.final_checkpoint = (fs_detail::path(out_dir) / "final.ckpt").string();

    for (int epoch = 0; epoch < cfg.epochs_per_stage; ++epoch) {
        const float lr = lr_schedule(stage_no, epoch, cfg);
        double sum_dis = 0.0, sum_bce = 0.0;
        std::size_t clips = 0;

        for (const auto& batch : make_batches(data.train, cfg.batch_size, epoch, cfg.seed)) {
            train_detail::check_batch_frames(data, batch, frames);
            store.zero_grads();
            const float inv_batch = 1.0f / static_cast<float>(batch.size());
            for (const auto& item : batch) {
                Tape tape;
                Tensor x = data.features->get(item.itemid);
                Tensor total;
                double l_dis = 0.0, l_bce = 0.0;
                if (cfg.classifier == ClassifierKind::Baseline) {
                    auto score = baseline_forward(x, store, cfg.disc, &tape);
                    total = bce_loss(score, item.label, &tape);
                    l_bce = total.item();
                } else {
                    auto rep = pair_forward(x, store, cfg.disc, &tape);
                    auto sim = cosine_similarity(flatten(rep.a, &tape), flatten(rep.b, &tape),
                                                 &tape);
                    auto dis = discriminative_loss(sim, item.label, cfg.lambda, &tape);
                    Tensor score = cfg.classifier == ClassifierKind::FrameWise
                                       ? frame_classifier_forward(rep.m, store, cfg.disc, &tape).score
                                       : flat_classifier_forward(rep.m, store, cfg.disc, &tape);
                    auto bce = bce_loss(score, item.label, &tape);
                    total = add(dis, bce, &tape);
                    l_dis = dis.item();
                    l_bce = bce.item();
                }
                train_detail::ensure_finite(total.item(), stage_no, epoch,
                                            cat("loss on '", item.itemid, "'"));
                auto contribution = affine(total, inv_batch, 0.0f, &tape);
                tape.backward(contribution);
                sum_dis += l_dis;
                sum_bce += l_bce;
                ++clips;
            }
            adam_step(store, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.stage = stage_no;
        rec.l_dis = sum_dis / static_cast<double>(clips);
        rec.l_bce = sum_bce / static_cast<double>(clips);
        train_detail::ensure_finite(rec.l_dis + rec.l_bce, stage_no, epoch, "epoch loss");

        if (!data.val.empty()) {
            std::vector<double> scores;
            std::vector<int> labels;
            for (const auto& item : data.val) {
                Tensor x = data.features->get(item.itemid);
                scores.push_back(static_cast<double>(
                    model_score(x, store, model_cfg, static_cast<Tape*>(nullptr)).item()));
                labels.push_back(item.label);
            }
            rec.val_auc = roc_auc(scores, labels);
            if (report.best_epoch < 0 || rec.val_auc > report.best_val_auc) {
                report.best_epoch = static_cast<int>(report.epochs.size());
                report.best_val_auc = rec.val_auc;
                save_checkpoint(store, report.best_checkpoint);
                save_model_config(model_cfg,
                                  (fs_detail::path(out_dir) / "model.json").string());
            }
        }
        report.epochs.push_back(rec);
        std::printf("epoch %d stage %d L_dis %.6f L_bce %.6f val_auc %.4f\n", epoch, stage_no,
                    rec.l_dis, rec.l_bce, rec.val_auc);
        std::fflush(stdout);
    }

    save_checkpoint(store, report.final_checkpoint);
    save_model_config(model_cfg, (fs_detail::path(out_dir) / "model.json").string());
    if (report.best_epoch < 0) {
        report.best_checkpoint = report.final_checkpoint;
        report.best_val_auc = std::nan("");
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

enum class PretrainVariant { GAP, Flatten };

/// Stage-1 pre-training: only the paired discriminators exist and learn from
/// the discriminative loss over pooled (GAP) or flattened representations.
/// Learning rate decays per lr_schedule; the returned parameters are the
/// epoch with the lowest validation pre-training loss. Validation AUC of
/// the similarity score (negatives should score high) is reported per epoch.
inline ParamStore pretrain_stage1(const TrainData& data, const TrainConfig& cfg,
                                  PretrainVariant variant, TrainReport* report,
                                  const std::string& out_dir) {
    cfg.validate();
    if (data.train.empty()) throw InputError("empty training set");
    fs_detail::create_directories(out_dir);

    ParamStore store;
    init_discriminator(store, "disc_a.", cfg.disc, cfg.seed);
    init_discriminator(store, "disc_b.", cfg.disc, cfg.seed);

    auto clip_similarity = [&](const std::string& itemid, Tape* tape) {
        Tensor x = data.features->get(itemid);
        auto rep = pair_forward(x, store, cfg.disc, tape);
        Tensor qa = variant == PretrainVariant::GAP ? global_avg_pool(rep.a, tape)
                                                    : flatten(rep.a, tape);
        Tensor qb = variant == PretrainVariant::GAP ? global_avg_pool(rep.b, tape)
                                                    : flatten(rep.b, tape);
        return cosine_similarity(qa, qb, tape);
    };

    ParamStore best = store.clone_values();
    double best_val_lpre = std::numeric_limits<double>::infinity();
    const int frames = data.frames();

    for (int epoch = 0; epoch < cfg.epochs_per_stage; ++epoch) {
        const float lr = lr_schedule(1, epoch, cfg);
        double sum_pre = 0.0;
        std::size_t clips = 0;
        for (const auto& batch : make_batches(data.train, cfg.batch_size, epoch, cfg.seed)) {
            train_detail::check_batch_frames(data, batch, frames);
            store.zero_grads();
            const float inv_batch = 1.0f / static_cast<float>(batch.size());
            for (const auto& item : batch) {
                Tape tape;
                auto sim = clip_similarity(item.itemid, &tape);
                auto pre = discriminative_loss(sim, item.label, cfg.lambda, &tape);
                train_detail::ensure_finite(pre.item(), 1, epoch,
                                            cat("pre-training loss on '", item.itemid, "'"));
                auto contribution = affine(pre, inv_batch, 0.0f, &tape);
                tape.backward(contribution);
                sum_pre += pre.item();
                ++clips;
            }
            adam_step(store, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.stage = 1;
        rec.l_dis = sum_pre / static_cast<double>(clips);
        rec.l_bce = 0.0;

        if (!data.val.empty()) {
            double val_pre = 0.0;
            std::vector<double> scores;
            std::vector<int> labels;
            bool both = false, seen0 = false, seen1 = false;
            for (const auto& item : data.val) {
                auto sim = clip_similarity(item.itemid, static_cast<Tape*>(nullptr));
                val_pre += discriminative_loss(sim, item.label, cfg.lambda,
                                               static_cast<Tape*>(nullptr))
                               .item();
                scores.push_back(-static_cast<double>(sim.item()));
                labels.push_back(item.label);
                (item.label ? seen1 : seen0) = true;
            }
            both = seen0 && seen1;
            val_pre /= static_cast<double>(data.val.size());
            if (both) rec.val_auc = roc_auc(scores, labels);
            if (val_pre < best_val_lpre) {
                best_val_lpre = val_pre;
                best = store.clone_values();
            }
        } else {
            best = store.clone_values();
        }
        if (report) report->epochs.push_back(rec);
        std::printf("epoch %d stage %d L_dis %.6f L_bce %.6f val_auc %.4f\n", epoch, 1, rec.l_dis,
                    rec.l_bce, rec.val_auc);
        std::fflush(stdout);
    }

    save_checkpoint(best, (fs_detail::path(out_dir) / "stage1.ckpt").string());
    return best;
}

struct TrainOutcome {
    ParamStore store;
    ModelConfig model;
    TrainReport report;
};

/// Two-stage strategy: discriminator pre-training, then the combined loss
/// from that initialization with a freshly seeded classifier.
inline TrainOutcome train_two_stage(const TrainData& data, const TrainConfig& cfg,
                                    const std::string& out_dir) {
    cfg.validate();
    if (cfg.strategy != Strategy::TwoStageGAP && cfg.strategy != Strategy::TwoStageFlatten)
        throw ConfigError("train_two_stage requires a two-stage strategy");
    const auto t_start = std::chrono::steady_clock::now();

    TrainOutcome out;
    out.model = cfg.model_config();

    const auto variant = cfg.strategy == Strategy::TwoStageGAP ? PretrainVariant::GAP
                                                               : PretrainVariant::Flatten;
    ParamStore pretrained = pretrain_stage1(data, cfg, variant, &out.report, out_dir);

    out.store = init_model_params<float>(out.model, data.frames(), cfg.seed);
    out.store.copy_values_from(pretrained, "disc_a.");
    out.store.copy_values_from(pretrained, "disc_b.");

    TrainReport stage2 = train_one_stage(data, out.store, cfg, out_dir, 2);
    const int offset = cfg.epochs_per_stage;
    for (auto& rec : stage2.epochs) out.report.epochs.push_back(rec);
    out.report.best_epoch = stage2.best_epoch < 0 ? -1 : stage2.best_epoch + offset;
    out.report.best_val_auc = stage2.best_val_auc;
    out.report.best_checkpoint = stage2.best_checkpoint;
    out.report.final_checkpoint = stage2.final_checkpoint;
    out.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
}

/// Strategy dispatcher used by the CLI and the experiment harness.
inline TrainOutcome run_training(const TrainData& data, const TrainConfig& cfg,
                                 const std::string& out_dir) {
    cfg.validate();
    switch (cfg.strategy) {
        case Strategy::BaselineOnly:
        case Strategy::OneStage: {
            TrainOutcome out;
            out.model = cfg.model_config();
            out.store = init_model_params<float>(out.model, data.frames(), cfg.seed);
            out.report = train_one_stage(data, out.store, cfg, out_dir, 1);
            return out;
        }
        case Strategy::TwoStageGAP:
        case Strategy::TwoStageFlatten:
            return train_two_stage(data, cfg, out_dir);
    }
    throw ConfigError("unknown strategy");
}

/// Convenience wrapper: split a manifest, preload features, train.
inline TrainOutcome train_on_manifest(const Manifest& manifest, const DatasetSplit& split,
                                      FeatureCache& cache, const TrainConfig& cfg,
                                      const std::string& out_dir) {
    FeatureSet features;
    for (const auto& id : split.train) features.put(id, cache.get(manifest.find(id)));
    for (const auto& id : split.val) features.put(id, cache.get(manifest.find(id)));
    TrainData data;
    data.features = &features;
    data.train = labeled_items(manifest, split.train);
    data.val = labeled_items(manifest, split.val);
    return run_training(data, cfg, out_dir);
}

}  // namespace aedf
