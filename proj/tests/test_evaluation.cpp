#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "aedf/evaluation.hpp"
#include "aedf/synth.hpp"
#include "support/oracles.hpp"

using namespace aedf;
using Catch::Approx;
namespace fs = std::filesystem;

TEST_CASE("roc_auc handles separation, ties, and the worked example", "[eval][auc]") {
    REQUIRE(roc_auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
    REQUIRE(roc_auc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}) == 0.0);
    REQUIRE(roc_auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == 0.5);
    REQUIRE(roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == Approx(0.75).margin(1e-15));

    REQUIRE_THROWS_AS(roc_auc({0.1, 0.2}, {1, 1}), MetricUndefinedError);
    REQUIRE_THROWS_AS(roc_auc({0.1, 0.2}, {0, 0}), MetricUndefinedError);
    REQUIRE_THROWS_AS(roc_auc({0.1}, {0, 1}), DimensionError);
    REQUIRE_THROWS_AS(roc_auc({0.1, 0.2}, {0, 2}), ContractError);
}

TEST_CASE("fast AUC equals exhaustive pair counting on 200 random instances", "[eval][auc]") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(499));
        std::vector<double> scores(static_cast<std::size_t>(n));
        std::vector<int> labels(static_cast<std::size_t>(n));
        bool has0 = false, has1 = false;
        for (int i = 0; i < n; ++i) {
            // Coarse grid forces plenty of ties.
            scores[static_cast<std::size_t>(i)] =
                std::floor(rng.uniform() * 8.0) / 8.0;
            labels[static_cast<std::size_t>(i)] = rng.uniform() < 0.4 ? 1 : 0;
            (labels[static_cast<std::size_t>(i)] ? has1 : has0) = true;
        }
        if (!has0) labels[0] = 0;
        if (!has1) labels[static_cast<std::size_t>(n - 1)] = 1;

        const double fast = roc_auc(scores, labels);
        const double brute = oracle::brute_force_auc(scores, labels);
        REQUIRE(fast == Approx(brute).margin(1e-12));
    }
}

TEST_CASE("AUC anti-symmetry is exact, including ties", "[eval][auc]") {
    Rng rng(55);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 3 + static_cast<int>(rng.uniform_int(200));
        std::vector<double> scores(static_cast<std::size_t>(n));
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            scores[static_cast<std::size_t>(i)] = std::floor(rng.uniform() * 5.0) / 5.0;
            labels[static_cast<std::size_t>(i)] = i % 3 == 0 ? 1 : 0;
        }
        std::vector<double> flipped1(scores), flipped2(scores);
        for (auto& s : flipped1) s = 1.0 - s;
        for (auto& s : flipped2) s = -s;
        REQUIRE(roc_auc(scores, labels) + roc_auc(flipped1, labels) == 1.0);
        REQUIRE(roc_auc(scores, labels) + roc_auc(flipped2, labels) == 1.0);
    }
}

TEST_CASE("AUC is invariant under strictly monotone transforms", "[eval][auc]") {
    Rng rng(56);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 4 + static_cast<int>(rng.uniform_int(120));
        std::vector<double> scores(static_cast<std::size_t>(n));
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            scores[static_cast<std::size_t>(i)] = std::floor(rng.uniform() * 6.0) / 3.0 - 1.0;
            labels[static_cast<std::size_t>(i)] = i % 2;
        }
        std::vector<double> cubed(scores), exped(scores);
        for (auto& s : cubed) s = s * s * s;
        for (auto& s : exped) s = std::exp(0.5 * s);
        const double base = roc_auc(scores, labels);
        REQUIRE(roc_auc(cubed, labels) == base);
        REQUIRE(roc_auc(exped, labels) == base);
    }
}

namespace {

struct Corpus {
    fs::path dir;
    Manifest manifest;
};

Corpus make_corpus(const std::string& tag, const std::string& domain, int n,
                   std::uint64_t seed) {
    Corpus c;
    c.dir = fs::temp_directory_path() / tag;
    fs::remove_all(c.dir);
    fs::create_directories(c.dir);
    auto cfg = SynthConfig::for_domain(domain);
    cfg.seed = seed;
    cfg.dataset_name = tag;
    c.manifest = synth_corpus(cfg, n, c.dir.string());
    return c;
}

}  // namespace

TEST_CASE("evaluate scores clips, tolerates bad items, and is deterministic", "[eval]") {
    auto corpus = make_corpus("aedf_eval_corpus", "A", 14, 91);
    FeatureCache cache((corpus.dir / "cache").string());

    auto cfg = ModelConfig{DiscriminatorConfig::reference(), ClassifierKind::Baseline, 0.0f};
    auto store = init_model_params<float>(cfg, 69, 7);

    std::vector<std::string> ids;
    for (const auto& e : corpus.manifest.entries) ids.push_back(e.itemid);

    auto r1 = evaluate(store, cfg, corpus.manifest, ids, cache, true);
    REQUIRE(r1.scored == 14);
    REQUIRE(r1.complete());
    REQUIRE(r1.auc >= 0.0);
    REQUIRE(r1.auc <= 1.0);

    auto r2 = evaluate(store, cfg, corpus.manifest, ids, cache, true);
    REQUIRE(r1.auc == r2.auc);
    REQUIRE(r1.scores == r2.scores);

    // A broken item is reported and skipped, the rest still evaluates.
    Manifest broken = corpus.manifest;
    broken.entries[3].wav_path = (corpus.dir / "missing.wav").string();
    fs::remove(cache.feature_path(broken.entries[3].itemid));
    auto r3 = evaluate(store, cfg, broken, ids, cache);
    REQUIRE_FALSE(r3.complete());
    REQUIRE(r3.item_errors.size() == 1);
    REQUIRE(r3.item_errors[0].itemid == broken.entries[3].itemid);
    REQUIRE(r3.scored == 13);

    // JSON carries the table formatting.
    auto j = r1.to_json(true);
    REQUIRE(j.at("scored").get<int>() == 14);
    REQUIRE(j.at("auc_percent").get<std::string>().find('.') != std::string::npos);

    fs::remove_all(corpus.dir);
}

TEST_CASE("cross-domain matrix runs train x test cells on held-out splits", "[eval][matrix]") {
    auto train_a = make_corpus("aedf_mx_train_a", "A", 20, 101);
    auto train_b = make_corpus("aedf_mx_train_b", "B", 20, 102);
    auto test_a = make_corpus("aedf_mx_test_a", "A", 15, 103);
    auto test_b = make_corpus("aedf_mx_test_b", "B", 15, 104);
    auto test_c = make_corpus("aedf_mx_test_c", "A", 15, 105);

    auto cache_dir = fs::temp_directory_path() / "aedf_mx_cache";
    fs::remove_all(cache_dir);
    FeatureCache cache(cache_dir.string());

    int trained = 0;
    auto stub_trainer = [&](const Manifest&, const DatasetSplit&) {
        ++trained;
        ModelConfig cfg{DiscriminatorConfig::reference(), ClassifierKind::Baseline, 0.0f};
        return std::make_pair(init_model_params<float>(cfg, 69, 11), cfg);
    };

    auto cells = cross_domain_matrix({train_a.manifest, train_b.manifest},
                                     {test_a.manifest, test_b.manifest, test_c.manifest}, 17,
                                     cache, stub_trainer);
    REQUIRE(cells.size() == 6);
    REQUIRE(trained == 2);
    for (const auto& cell : cells) {
        // Cells use each test manifest's 20% split only.
        REQUIRE(cell.report.scored == 3);
        REQUIRE(cell.report.complete());
    }
    REQUIRE(cells[0].train_set == "aedf_mx_train_a");
    REQUIRE(cells[0].test_set == "aedf_mx_test_a");
    REQUIRE(cells[5].train_set == "aedf_mx_train_b");
    REQUIRE(cells[5].test_set == "aedf_mx_test_c");

    // The in-domain cell never reuses training clips.
    auto split = split_dataset(train_a.manifest, 17);
    std::set<std::string> train_ids(split.train.begin(), split.train.end());
    for (const auto& id : split.test) REQUIRE_FALSE(train_ids.count(id));

    // Overlapping itemids across roles are an integrity error. A "test set"
    // built from the training split's own clips must be rejected.
    Manifest overlapping;
    overlapping.dataset_name = "aedf_mx_overlap";
    for (const auto& id : split.train) overlapping.entries.push_back(train_a.manifest.find(id));
    REQUIRE_THROWS_AS(cross_domain_matrix({train_a.manifest}, {overlapping}, 17, cache,
                                          stub_trainer),
                      IntegrityError);

    for (const auto& c : {train_a, train_b, test_a, test_b, test_c}) fs::remove_all(c.dir);
    fs::remove_all(cache_dir);
}
