#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "aedf/data.hpp"
#include "aedf/features.hpp"
#include "aedf/model.hpp"

namespace aedf {

/// ROC-AUC as the Mann-Whitney statistic: (concordant + 0.5 * tied) pair
/// fraction, computed from average ranks in O(n log n). The numerator is an
/// exact multiple of 0.5, and the quotient is taken through whichever of
/// U or PN-U is smaller, so flipping all scores complements the result
/// exactly.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw DimensionError(cat("roc_auc: ", scores.size(), " scores vs ", labels.size(),
                                 " labels"));
    std::size_t n_pos = 0, n_neg = 0;
    for (int y : labels) {
        if (y == 1)
            ++n_pos;
        else if (y == 0)
            ++n_neg;
        else
            throw ContractError(cat("roc_auc: label must be 0 or 1, got ", y));
    }
    if (n_pos == 0 || n_neg == 0)
        throw MetricUndefinedError("roc_auc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });

    // Sum of average ranks (1-based) over positives, tie groups share rank.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        i = j + 1;
    }

    const double u = rank_sum_pos -
                     0.5 * static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0);
    const double pn = static_cast<double>(n_pos) * static_cast<double>(n_neg);
    if (2.0 * u <= pn) return u / pn;
    return 1.0 - (pn - u) / pn;
}

struct EvalItemError {
    std::string itemid;
    std::string message;
};

struct EvalReport {
    std::string test_set;
    std::string model_id;  // checkpoint path or run label
    double auc = std::nan("");
    std::size_t scored = 0;
    std::vector<EvalItemError> item_errors;
    std::vector<std::string> itemids;  // kept when scores are retained
    std::vector<double> scores;
    std::vector<int> labels;

    bool complete() const { return item_errors.empty(); }
    double auc_percent() const { return 100.0 * auc; }

    std::string auc_percent_str() const {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", auc_percent());
        return buf;
    }

    nlohmann::json to_json(bool include_scores = false) const {
        nlohmann::json j{{"test_set", test_set},
                         {"model_id", model_id},
                         {"auc_percent", auc_percent_str()},
                         {"auc", auc},
                         {"scored", scored},
                         {"complete", complete()}};
        if (!item_errors.empty()) {
            nlohmann::json errs = nlohmann::json::array();
            for (const auto& e : item_errors) errs.push_back({{"itemid", e.itemid}, {"error", e.message}});
            j["item_errors"] = errs;
        }
        if (include_scores && !itemids.empty()) {
            nlohmann::json rows = nlohmann::json::array();
            for (std::size_t i = 0; i < itemids.size(); ++i)
                rows.push_back({{"itemid", itemids[i]}, {"score", scores[i]}, {"label", labels[i]}});
            j["scores"] = rows;
        }
        return j;
    }

    /// CSV dump `itemid,score,label` for external plotting.
    void write_scores_csv(const std::string& path) const {
        std::ofstream os(path, std::ios::trunc);
        if (!os) throw IoError(cat("cannot open '", path, "' for writing"));
        os << "itemid,score,label\n";
        for (std::size_t i = 0; i < itemids.size(); ++i)
            os << itemids[i] << "," << scores[i] << "," << labels[i] << "\n";
    }
};

/// Scores every requested clip with an inference-only forward pass and
/// computes AUC. Per-clip failures (missing audio, bad files) are collected
/// and scoring continues; parameters are never mutated.
inline EvalReport evaluate(const ParamStore& store, const ModelConfig& cfg,
                           const Manifest& manifest, const std::vector<std::string>& ids,
                           FeatureCache& cache, bool keep_scores = false) {
    EvalReport report;
    report.test_set = manifest.dataset_name;
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& id : ids) {
        try {
            const auto& entry = manifest.find(id);
            Tensor x = cache.get(entry);
            const float score = model_score(x, store, cfg, static_cast<Tape*>(nullptr)).item();
            scores.push_back(static_cast<double>(score));
            labels.push_back(entry.label);
            if (keep_scores) report.itemids.push_back(id);
        } catch (const Error& e) {
            report.item_errors.push_back({id, e.what()});
        }
    }
    report.scored = scores.size();
    if (keep_scores) {
        report.scores = scores;
        report.labels = labels;
    }
    report.auc = roc_auc(scores, labels);
    return report;
}

struct MatrixCell {
    std::string train_set;
    std::string test_set;
    EvalReport report;
};

/// Tables-style protocol: fit on each training manifest's 60% split (model
/// selection on its 20% validation split via the trainer callback), then
/// score every test manifest's held-out 20% test split. Distinct manifests
/// must not share itemids with the training split.
///
/// TrainFn: (const Manifest&, const DatasetSplit&) -> std::pair<ParamStore, ModelConfig>
template <typename TrainFn>
std::vector<MatrixCell> cross_domain_matrix(const std::vector<Manifest>& train_sets,
                                            const std::vector<Manifest>& test_sets,
                                            std::uint64_t split_seed, FeatureCache& cache,
                                            TrainFn train_fn) {
    std::vector<MatrixCell> cells;
    for (const auto& train_manifest : train_sets) {
        const auto split = split_dataset(train_manifest, split_seed);
        std::set<std::string> train_ids(split.train.begin(), split.train.end());

        auto [store, model_cfg] = train_fn(train_manifest, split);

        for (const auto& test_manifest : test_sets) {
            const auto test_split = split_dataset(test_manifest, split_seed);
            for (const auto& id : test_split.test)
                if (train_ids.count(id))
                    throw IntegrityError(cat("itemid '", id, "' appears in both the '",
                                             train_manifest.dataset_name, "' training split and the '",
                                             test_manifest.dataset_name, "' test split"));
            MatrixCell cell;
            cell.train_set = train_manifest.dataset_name;
            cell.test_set = test_manifest.dataset_name;
            cell.report = evaluate(store, model_cfg, test_manifest, test_split.test, cache);
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

}  // namespace aedf
