#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "aedf/training.hpp"

using namespace aedf;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

DiscriminatorConfig toy_disc() {
    DiscriminatorConfig cfg;
    cfg.blocks = {{4, 5, 2}, {4, 2, 2}, {4, 2, 2}};
    return cfg;
}

// Synthetic features with a label-dependent band shift: positives carry more
// energy in the upper half of the mel axis, so the task is learnable but not
// trivial.
struct ToyData {
    FeatureSet features;
    TrainData data;

    ToyData(int n_train, int n_val, int frames, std::uint64_t seed) {
        Rng rng(seed);
        auto make = [&](const std::string& id, int label) {
            Tensor x(Shape{1, 80, frames});
            for (int f = 0; f < 80; ++f)
                for (int t = 0; t < frames; ++t) {
                    float v = static_cast<float>(-4.0 + rng.gaussian() * 0.5);
                    if (label == 1 && f >= 40) v += 1.5f + static_cast<float>(rng.gaussian() * 0.2);
                    x.data()[static_cast<std::size_t>(f) * frames + t] = v;
                }
            features.put(id, x);
            return LabeledItem{id, label};
        };
        for (int i = 0; i < n_train; ++i) data.train.push_back(make(cat("tr", i), i % 2));
        for (int i = 0; i < n_val; ++i) data.val.push_back(make(cat("va", i), i % 2));
        data.features = &features;
    }
};

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

TrainConfig quick_config(const std::string& preset, int epochs, std::uint64_t seed) {
    TrainConfig cfg = strategy_preset(preset);
    cfg.disc = toy_disc();
    cfg.epochs_per_stage = epochs;
    cfg.batch_size = 4;
    cfg.lambda = 0.1f;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("lr schedule endpoints and errors", "[train][schedule]") {
    TrainConfig cfg = quick_config("ts-gap", 200, 1);
    REQUIRE(lr_schedule(1, 0, cfg) == Approx(1e-3).epsilon(1e-6));
    REQUIRE(lr_schedule(1, 199, cfg) == Approx(1e-5).epsilon(0.01));
    REQUIRE(lr_schedule(2, 0, cfg) == Approx(1e-4));
    REQUIRE(lr_schedule(2, 150, cfg) == Approx(1e-4));

    TrainConfig one = quick_config("one-stage-fw", 200, 1);
    REQUIRE(lr_schedule(1, 0, one) == Approx(1e-4));
    REQUIRE(lr_schedule(1, 100, one) == Approx(1e-4));

    TrainConfig baseline = quick_config("baseline", 200, 1);
    REQUIRE(lr_schedule(1, 7, baseline) == Approx(1e-4));

    REQUIRE_THROWS_AS(lr_schedule(1, 200, cfg), ContractError);
    REQUIRE_THROWS_AS(lr_schedule(1, -1, cfg), ContractError);
    REQUIRE_THROWS_AS(lr_schedule(3, 0, cfg), ContractError);
}

TEST_CASE("strategy presets map names to classifier kinds", "[train][config]") {
    REQUIRE(strategy_preset("baseline").classifier == ClassifierKind::Baseline);
    REQUIRE(strategy_preset("one-stage-fc").classifier == ClassifierKind::FlatClassifier);
    REQUIRE(strategy_preset("one-stage-fw").classifier == ClassifierKind::FrameWise);
    REQUIRE(strategy_preset("ts-fla").strategy == Strategy::TwoStageFlatten);
    REQUIRE(strategy_preset("ts-gap").strategy == Strategy::TwoStageGAP);
    REQUIRE_THROWS_AS(strategy_preset("three-stage"), ConfigError);

    TrainConfig bad = quick_config("one-stage-fw", 10, 1);
    bad.lambda = 1.5f;
    REQUIRE_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("one-stage training learns the toy separation and reports it", "[train]") {
    ToyData toy(24, 12, 16, 71);
    auto cfg = quick_config("one-stage-fw", 8, 5);
    auto dir = fresh_dir("aedf_train_fw");

    auto outcome = run_training(toy.data, cfg, dir.string());
    const auto& report = outcome.report;
    REQUIRE(report.epochs.size() == 8);

    for (const auto& rec : report.epochs) {
        REQUIRE(std::isfinite(rec.l_dis));
        REQUIRE(std::isfinite(rec.l_bce));
        REQUIRE(std::isfinite(rec.val_auc));
    }
    // Optimization made progress on the combined loss.
    const auto& first = report.epochs.front();
    const auto& last = report.epochs.back();
    REQUIRE(last.l_dis + last.l_bce < first.l_dis + first.l_bce);

    // Best checkpoint selection is the max of the trajectory.
    double best = -1.0;
    for (const auto& rec : report.epochs) best = std::max(best, rec.val_auc);
    REQUIRE(report.best_val_auc == Approx(best));
    REQUIRE(fs::exists(report.best_checkpoint));
    REQUIRE(fs::exists(report.final_checkpoint));
    REQUIRE(fs::exists(dir / "model.json"));

    fs::remove_all(dir);
}

TEST_CASE("fixed seed reproduces a training run bit for bit", "[train][determinism]") {
    auto run = [](const std::string& tag) {
        ToyData toy(16, 8, 16, 33);
        auto cfg = quick_config("one-stage-fw", 3, 9);
        auto dir = fresh_dir(tag);
        auto outcome = run_training(toy.data, cfg, dir.string());
        std::ifstream is(outcome.report.final_checkpoint, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        fs::remove_all(dir);
        // Only the output directory may differ between the two runs.
        auto j = outcome.report.to_json(false);
        j.erase("best_checkpoint");
        j.erase("final_checkpoint");
        return std::make_pair(j.dump(), bytes);
    };
    auto [json1, ckpt1] = run("aedf_det1");
    auto [json2, ckpt2] = run("aedf_det2");
    REQUIRE(json1 == json2);
    REQUIRE(ckpt1 == ckpt2);
}

TEST_CASE("two-stage training chains pre-training into the combined stage", "[train][twostage]") {
    ToyData toy(16, 8, 16, 41);
    auto cfg = quick_config("ts-gap", 3, 13);
    auto dir = fresh_dir("aedf_train_ts");

    auto outcome = train_two_stage(toy.data, cfg, dir.string());
    REQUIRE(outcome.report.epochs.size() == 6);
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(outcome.report.epochs[i].stage == 1);
        REQUIRE(outcome.report.epochs[i].l_bce == 0.0);
        REQUIRE(outcome.report.epochs[i + 3].stage == 2);
    }

    // The stage-1 checkpoint written by the two-stage run equals a separate
    // pre-training run with the same seed: the stage-2 discriminators start
    // from exactly those values.
    auto dir2 = fresh_dir("aedf_train_pre");
    auto pre = pretrain_stage1(toy.data, cfg, PretrainVariant::GAP, nullptr, dir2.string());
    auto from_two_stage = load_checkpoint((dir / "stage1.ckpt").string());
    for (const auto& name : pre.names()) {
        REQUIRE(from_two_stage.has(name));
        REQUIRE(from_two_stage.at(name).values() == pre.at(name).values());
    }
    // Pre-training owns only discriminator parameters.
    for (const auto& name : pre.names())
        REQUIRE((name.rfind("disc_a.", 0) == 0 || name.rfind("disc_b.", 0) == 0));

    // Stage 2's classifier starts from the fresh seeded initialization.
    auto fresh = init_model_params<float>(cfg.model_config(), 16, cfg.seed);
    auto stage2_names = outcome.store.names_with_prefix("classifier.");
    REQUIRE_FALSE(stage2_names.empty());

    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("stage-1 discrimination drives similarity apart by label", "[train][twostage]") {
    // Toy features where positives differ in band profile; after
    // pre-training, negative-clip similarity should exceed positive-clip
    // similarity on validation data.
    ToyData toy(32, 16, 16, 55);
    auto cfg = quick_config("ts-gap", 40, 21);
    cfg.disc.blocks = {{8, 5, 2}, {8, 2, 2}, {8, 2, 2}};
    cfg.lambda = 1.0f;
    auto dir = fresh_dir("aedf_train_dir");

    auto pre = pretrain_stage1(toy.data, cfg, PretrainVariant::GAP, nullptr, dir.string());

    double pos_sim = 0.0, neg_sim = 0.0;
    int pos_n = 0, neg_n = 0;
    for (const auto& item : toy.data.val) {
        Tensor x = toy.features.get(item.itemid);
        auto rep = pair_forward(x, pre, cfg.disc, static_cast<Tape*>(nullptr));
        auto sim = cosine_similarity(global_avg_pool(rep.a, static_cast<Tape*>(nullptr)),
                                     global_avg_pool(rep.b, static_cast<Tape*>(nullptr)),
                                     static_cast<Tape*>(nullptr));
        if (item.label == 1) {
            pos_sim += sim.item();
            ++pos_n;
        } else {
            neg_sim += sim.item();
            ++neg_n;
        }
    }
    REQUIRE(neg_sim / neg_n > pos_sim / pos_n + 0.05);
    fs::remove_all(dir);
}

TEST_CASE("training aborts on non-finite data instead of propagating NaN", "[train][errors]") {
    ToyData toy(8, 4, 16, 77);
    Tensor poisoned = toy.features.get("tr0").clone();
    poisoned.data()[0] = std::numeric_limits<float>::quiet_NaN();
    toy.features.put("tr0", poisoned);

    auto cfg = quick_config("one-stage-fw", 1, 3);
    auto dir = fresh_dir("aedf_train_nan");
    REQUIRE_THROWS_AS(run_training(toy.data, cfg, dir.string()), NumericError);
    fs::remove_all(dir);
}

TEST_CASE("training rejects empty sets and mixed durations", "[train][errors]") {
    ToyData toy(8, 4, 16, 78);
    TrainData empty;
    empty.features = &toy.features;
    auto cfg = quick_config("one-stage-fw", 1, 3);
    auto dir = fresh_dir("aedf_train_bad");
    REQUIRE_THROWS_AS(run_training(empty, cfg, dir.string()), InputError);

    // One clip with a different frame count poisons its batch.
    ToyData mixed(8, 4, 16, 79);
    Tensor longer(Shape{1, 80, 32}, -4.0f);
    mixed.features.put("tr3", longer);
    REQUIRE_THROWS_AS(run_training(mixed.data, cfg, dir.string()), DimensionError);
    fs::remove_all(dir);
}

TEST_CASE("combined loss decomposes into its two reported components", "[train]") {
    // With lambda = 0 the negative clips contribute no discriminative loss,
    // so the reported L_dis reflects positives only.
    ToyData toy(8, 4, 16, 91);
    auto cfg = quick_config("one-stage-fw", 1, 15);
    cfg.lambda = 0.0f;
    auto dir = fresh_dir("aedf_train_lambda0");
    auto outcome = run_training(toy.data, cfg, dir.string());

    // Recompute the discriminative term over the training items.
    double manual_dis = 0.0;
    for (const auto& item : toy.data.train) {
        Tensor x = toy.features.get(item.itemid);
        auto rep = pair_forward(x, outcome.store, cfg.disc, static_cast<Tape*>(nullptr));
        auto sim = cosine_similarity(flatten(rep.a, static_cast<Tape*>(nullptr)),
                                     flatten(rep.b, static_cast<Tape*>(nullptr)),
                                     static_cast<Tape*>(nullptr));
        auto terms = discriminative_loss_terms(sim, item.label, 0.0f, static_cast<Tape*>(nullptr));
        if (item.label == 0) REQUIRE(terms.total.item() == 0.0f);
        manual_dis += terms.total.item();
    }
    REQUIRE(std::isfinite(manual_dis));
    fs::remove_all(dir);
}
