// aedf: synthetic corpus generation, log-mel featurization, discriminative
// training, AUC evaluation, and representation dumps, glued to the library
// headers. All workflows are batch; machine-readable outputs are JSON/CSV,
// images are PGM (P5).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

#include "aedf/evaluation.hpp"
#include "aedf/parallel.hpp"
#include "aedf/repr.hpp"
#include "aedf/synth.hpp"
#include "aedf/training.hpp"

namespace fs = std::filesystem;
using namespace aedf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitMetric = 5;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
    if (dynamic_cast<const MetricUndefinedError*>(&e)) return kExitMetric;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return kExitIo;
    return kExitConfig;
}

struct CommonOpts {
    std::string audio_root;  // from flag or AEDF_AUDIO_ROOT
    unsigned jobs = default_jobs();
};

struct SynthOpts {
    std::string out_dir;
    std::string domain = "A";
    std::string dataset_name;
    int clips = 100;
    std::uint64_t seed = 1;
    double positive_fraction = 0.5;
    double clip_seconds = 1.0;
};

int cmd_synth(const SynthOpts& opt, unsigned jobs) {
    auto cfg = SynthConfig::for_domain(opt.domain);
    cfg.seed = opt.seed;
    cfg.positive_fraction = opt.positive_fraction;
    cfg.clip_seconds = opt.clip_seconds;
    cfg.dataset_name = opt.dataset_name;
    cfg.validate();
    if (opt.clips < 1) throw ConfigError("--clips must be >= 1");

    const fs::path out(opt.out_dir);
    if (!out.parent_path().empty() && !fs::exists(out.parent_path()))
        throw IoError(cat("parent of output directory '", opt.out_dir, "' does not exist"));
    fs::create_directory(out);

    // Same layout as synth_corpus, fanned out across worker threads; every
    // clip is a pure function of (seed, index) so the result is identical.
    const std::string name = cfg.dataset_name.empty() ? cat("synth_", cfg.domain)
                                                      : cfg.dataset_name;
    const int n_pos = static_cast<int>(std::lround(opt.clips * cfg.positive_fraction));
    std::vector<int> labels(static_cast<std::size_t>(opt.clips), 0);
    for (int i = 0; i < n_pos; ++i) labels[static_cast<std::size_t>(i)] = 1;
    Rng label_rng(seed_mix(cfg.seed, 0x1a6e15));
    label_rng.shuffle(labels);

    Manifest manifest;
    manifest.dataset_name = name;
    int width = 1;
    for (int v = opt.clips - 1; v >= 10; v /= 10) ++width;
    manifest.entries.resize(static_cast<std::size_t>(opt.clips));
    for (int i = 0; i < opt.clips; ++i) {
        std::string idx = std::to_string(i);
        idx.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(idx.size()))),
                   '0');
        auto& e = manifest.entries[static_cast<std::size_t>(i)];
        e.itemid = cat(name, "_", idx);
        e.label = labels[static_cast<std::size_t>(i)];
        e.wav_path = (out / (e.itemid + ".wav")).string();
    }
    parallel_for(static_cast<std::size_t>(opt.clips), jobs, [&](std::size_t i) {
        const auto& e = manifest.entries[i];
        save_wav(e.wav_path, render_clip(cfg, i, e.label == 1), cfg.sample_rate);
    });
    save_manifest(manifest, (out / (name + ".csv")).string());
    std::printf("synth: %d clips (%d positive) in %s, manifest %s.csv\n", opt.clips, n_pos,
                opt.out_dir.c_str(), name.c_str());
    return kExitOk;
}

struct FeaturizeOpts {
    std::string manifest_path;
    std::string cache_dir;
};

int cmd_featurize(const FeaturizeOpts& opt, const CommonOpts& common) {
    auto manifest = load_manifest(opt.manifest_path, common.audio_root);
    FeatureCache cache(opt.cache_dir);

    std::mutex mu;
    std::size_t computed = 0, cached = 0;
    std::vector<std::pair<std::string, std::string>> failures;
    parallel_for(manifest.entries.size(), common.jobs, [&](std::size_t i) {
        const auto& entry = manifest.entries[i];
        if (cache.cached(entry.itemid)) {
            std::lock_guard<std::mutex> lock(mu);
            ++cached;
            return;
        }
        try {
            cache.compute_and_store(entry);
            std::lock_guard<std::mutex> lock(mu);
            ++computed;
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(mu);
            failures.emplace_back(entry.itemid, e.what());
        }
    });

    std::printf("featurize: %zu computed, %zu cached\n", computed, cached);
    if (!failures.empty()) {
        std::printf("featurize: %zu failed\n", failures.size());
        for (const auto& [id, what] : failures) std::printf("  %s: %s\n", id.c_str(), what.c_str());
        return kExitPartial;
    }
    return kExitOk;
}

struct TrainOpts {
    std::string manifest_path;
    std::string cache_dir;
    std::string out_dir;
    std::string strategy = "one-stage-fw";
    double lambda = -1.0;  // negative = preset default
    int epochs = 200;
    int batch = 16;
    std::uint64_t seed = 1;
};

TrainConfig make_train_config(const TrainOpts& opt) {
    TrainConfig cfg = strategy_preset(opt.strategy);
    if (opt.lambda >= 0.0) cfg.lambda = static_cast<float>(opt.lambda);
    cfg.epochs_per_stage = opt.epochs;
    cfg.batch_size = opt.batch;
    cfg.seed = opt.seed;
    cfg.validate();
    return cfg;
}

int cmd_train(const TrainOpts& opt, const CommonOpts& common) {
    const TrainConfig cfg = make_train_config(opt);
    auto manifest = load_manifest(opt.manifest_path, common.audio_root);
    auto split = split_dataset(manifest, cfg.seed);
    FeatureCache cache(opt.cache_dir);

    fs::create_directories(opt.out_dir);
    {
        std::ofstream os((fs::path(opt.out_dir) / "split.json").string(), std::ios::trunc);
        os << split_to_json(split).dump(2) << "\n";
    }
    auto outcome = train_on_manifest(manifest, split, cache, cfg, opt.out_dir);
    {
        std::ofstream os((fs::path(opt.out_dir) / "report.json").string(), std::ios::trunc);
        os << outcome.report.to_json(true).dump(2) << "\n";
    }
    std::printf("train: strategy %s, %zu epochs recorded, best val AUC %.4f, checkpoints in %s\n",
                opt.strategy.c_str(), outcome.report.epochs.size(), outcome.report.best_val_auc,
                opt.out_dir.c_str());
    return kExitOk;
}

struct EvalOpts {
    std::string checkpoint;
    std::string model_config;
    std::vector<std::string> test_manifests;
    std::string cache_dir;
    std::string out_path;
    std::string scores_dir;
    bool use_test_split = false;
    std::uint64_t seed = 1;
};

int cmd_eval(const EvalOpts& opt, const CommonOpts& common) {
    auto store = load_checkpoint(opt.checkpoint);
    auto model_cfg = load_model_config(opt.model_config);
    FeatureCache cache(opt.cache_dir);

    nlohmann::json results = nlohmann::json::array();
    std::printf("%-24s %8s %8s\n", "Test set", "AUC%", "clips");
    for (const auto& path : opt.test_manifests) {
        auto manifest = load_manifest(path, common.audio_root);
        std::vector<std::string> ids;
        if (opt.use_test_split) {
            ids = split_dataset(manifest, opt.seed).test;
        } else {
            for (const auto& e : manifest.entries) ids.push_back(e.itemid);
        }
        auto report = evaluate(store, model_cfg, manifest, ids, cache, !opt.scores_dir.empty());
        report.model_id = opt.checkpoint;
        std::printf("%-24s %8s %8zu\n", report.test_set.c_str(), report.auc_percent_str().c_str(),
                    report.scored);
        if (!report.complete())
            for (const auto& err : report.item_errors)
                std::printf("  ! %s: %s\n", err.itemid.c_str(), err.message.c_str());
        if (!opt.scores_dir.empty()) {
            fs::create_directories(opt.scores_dir);
            report.write_scores_csv(
                (fs::path(opt.scores_dir) / (report.test_set + "_scores.csv")).string());
        }
        results.push_back(report.to_json());
    }
    if (!opt.out_path.empty()) {
        std::ofstream os(opt.out_path, std::ios::trunc);
        if (!os) throw IoError(cat("cannot open '", opt.out_path, "' for writing"));
        os << results.dump(2) << "\n";
    }
    bool incomplete = false;
    for (const auto& r : results) incomplete |= !r.at("complete").get<bool>();
    return incomplete ? kExitPartial : kExitOk;
}

struct DumpOpts {
    std::string checkpoint;
    std::string model_config;
    std::string manifest_path;
    std::string cache_dir;
    std::string out_dir;
    std::vector<std::string> itemids;
};

int cmd_dump_repr(const DumpOpts& opt, const CommonOpts& common) {
    auto store = load_checkpoint(opt.checkpoint);
    auto model_cfg = load_model_config(opt.model_config);
    if (model_cfg.kind == ClassifierKind::Baseline)
        throw ConfigError("dump-repr needs a paired-discriminator checkpoint");
    auto manifest = load_manifest(opt.manifest_path, common.audio_root);
    FeatureCache cache(opt.cache_dir);
    fs::create_directories(opt.out_dir);

    for (const auto& id : opt.itemids) {
        const auto& entry = manifest.find(id);  // unknown itemid -> InputError
        Tensor x = cache.get(entry);
        auto rep = pair_forward(x, store, model_cfg.disc, static_cast<Tape*>(nullptr));
        write_pgm(representation_image(rep.a), (fs::path(opt.out_dir) / (id + ".a.pgm")).string());
        write_pgm(representation_image(rep.b), (fs::path(opt.out_dir) / (id + ".b.pgm")).string());
        std::printf("dump-repr: %s -> %s/{%s.a.pgm,%s.b.pgm}\n", id.c_str(), opt.out_dir.c_str(),
                    id.c_str(), id.c_str());
    }
    return kExitOk;
}

struct MatrixOpts {
    std::vector<std::string> train_manifests;
    std::vector<std::string> test_manifests;
    std::string cache_dir;
    std::string out_dir;
    TrainOpts train;
};

int cmd_run_matrix(const MatrixOpts& opt, const CommonOpts& common) {
    const TrainConfig base_cfg = make_train_config(opt.train);
    FeatureCache cache(opt.cache_dir);
    fs::create_directories(opt.out_dir);

    std::vector<Manifest> trains, tests;
    for (const auto& p : opt.train_manifests) trains.push_back(load_manifest(p, common.audio_root));
    for (const auto& p : opt.test_manifests) tests.push_back(load_manifest(p, common.audio_root));

    auto trainer = [&](const Manifest& manifest, const DatasetSplit& split) {
        const std::string run_dir =
            (fs::path(opt.out_dir) / ("train_" + manifest.dataset_name)).string();
        auto outcome = train_on_manifest(manifest, split, cache, base_cfg, run_dir);
        std::ofstream os((fs::path(run_dir) / "report.json").string(), std::ios::trunc);
        os << outcome.report.to_json(true).dump(2) << "\n";
        return std::make_pair(std::move(outcome.store), outcome.model);
    };

    auto cells = cross_domain_matrix(trains, tests, base_cfg.seed, cache, trainer);

    nlohmann::json rows = nlohmann::json::array();
    std::printf("%-20s %-20s %8s\n", "Train set", "Test set", "AUC%");
    for (const auto& cell : cells) {
        std::printf("%-20s %-20s %8s\n", cell.train_set.c_str(), cell.test_set.c_str(),
                    cell.report.auc_percent_str().c_str());
        auto j = cell.report.to_json();
        j["train_set"] = cell.train_set;
        rows.push_back(j);
    }
    std::ofstream os((fs::path(opt.out_dir) / "matrix.json").string(), std::ios::trunc);
    os << rows.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acoustic event detection with paired discriminative encoders"};
    app.set_config("--config", "", "flat key-value config file; flags override file values");
    app.require_subcommand(1);
    // Global options (--audio-root, --jobs) may follow the subcommand name.
    app.fallthrough();

    CommonOpts common;
    if (const char* env_root = std::getenv("AEDF_AUDIO_ROOT")) common.audio_root = env_root;
    app.add_option("--audio-root", common.audio_root, "directory holding <itemid>.wav files")
        ->envname("AEDF_AUDIO_ROOT");
    app.add_option("--jobs", common.jobs, "worker threads for synth/featurize");

    SynthOpts synth_opts;
    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
    synth->add_option("--out", synth_opts.out_dir, "output directory")->required();
    synth->add_option("--domain", synth_opts.domain, "background domain, A or B");
    synth->add_option("--dataset-name", synth_opts.dataset_name, "manifest/dataset name");
    synth->add_option("--clips", synth_opts.clips, "number of clips")->required();
    synth->add_option("--seed", synth_opts.seed, "generation seed");
    synth->add_option("--positive-fraction", synth_opts.positive_fraction,
                      "fraction of clips with events");
    synth->add_option("--clip-seconds", synth_opts.clip_seconds, "clip duration in seconds");

    FeaturizeOpts feat_opts;
    auto* featurize = app.add_subcommand("featurize", "populate the log-mel feature cache");
    featurize->add_option("--manifest", feat_opts.manifest_path, "manifest CSV")->required();
    featurize->add_option("--cache", feat_opts.cache_dir, "feature cache directory")->required();

    TrainOpts train_opts;
    auto* train = app.add_subcommand("train", "train a detector");
    train->add_option("--manifest", train_opts.manifest_path, "training manifest CSV")->required();
    train->add_option("--cache", train_opts.cache_dir, "feature cache directory")->required();
    train->add_option("--out", train_opts.out_dir, "run output directory")->required();
    train->add_option("--strategy", train_opts.strategy,
                      "baseline | one-stage-fc | one-stage-fw | ts-fla | ts-gap");
    train->add_option("--lambda", train_opts.lambda, "negative-term weight in [0,1]");
    train->add_option("--epochs", train_opts.epochs, "epochs per stage");
    train->add_option("--batch", train_opts.batch, "batch size");
    train->add_option("--seed", train_opts.seed, "split/init/shuffle seed");

    EvalOpts eval_opts;
    auto* eval = app.add_subcommand("eval", "score checkpoints against test manifests");
    eval->add_option("--checkpoint", eval_opts.checkpoint, "model checkpoint")->required();
    eval->add_option("--model-config", eval_opts.model_config, "model JSON sidecar")->required();
    eval->add_option("--test", eval_opts.test_manifests, "test manifest CSV (repeatable)")
        ->required();
    eval->add_option("--cache", eval_opts.cache_dir, "feature cache directory")->required();
    eval->add_option("--out", eval_opts.out_path, "write JSON report here");
    eval->add_option("--dump-scores", eval_opts.scores_dir, "write per-clip score CSVs here");
    eval->add_flag("--use-test-split", eval_opts.use_test_split,
                   "score only each manifest's held-out 20% split");
    eval->add_option("--seed", eval_opts.seed, "split seed for --use-test-split");

    DumpOpts dump_opts;
    auto* dump = app.add_subcommand("dump-repr", "write paired representation images (PGM)");
    dump->add_option("--checkpoint", dump_opts.checkpoint)->required();
    dump->add_option("--model-config", dump_opts.model_config)->required();
    dump->add_option("--manifest", dump_opts.manifest_path)->required();
    dump->add_option("--cache", dump_opts.cache_dir)->required();
    dump->add_option("--out", dump_opts.out_dir)->required();
    dump->add_option("--itemid", dump_opts.itemids, "clip ids to render (repeatable)")->required();

    MatrixOpts matrix_opts;
    auto* matrix = app.add_subcommand("run-matrix", "train/test AUC matrix over manifests");
    matrix->add_option("--train", matrix_opts.train_manifests, "training manifests")->required();
    matrix->add_option("--test", matrix_opts.test_manifests, "test manifests")->required();
    matrix->add_option("--cache", matrix_opts.cache_dir, "feature cache directory")->required();
    matrix->add_option("--out", matrix_opts.out_dir, "output directory")->required();
    matrix->add_option("--strategy", matrix_opts.train.strategy);
    matrix->add_option("--lambda", matrix_opts.train.lambda);
    matrix->add_option("--epochs", matrix_opts.train.epochs);
    matrix->add_option("--batch", matrix_opts.train.batch);
    matrix->add_option("--seed", matrix_opts.train.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_opts, common.jobs);
        if (featurize->parsed()) return cmd_featurize(feat_opts, common);
        if (train->parsed()) return cmd_train(train_opts, common);
        if (eval->parsed()) return cmd_eval(eval_opts, common);
        if (dump->parsed()) return cmd_dump_repr(dump_opts, common);
        if (matrix->parsed()) return cmd_run_matrix(matrix_opts, common);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    }
    return kExitConfig;
}
