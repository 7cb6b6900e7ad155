#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "aedf/checkpoint.hpp"
#include "aedf/data.hpp"
#include "aedf/dsp.hpp"
#include "aedf/resample.hpp"

namespace aedf {

/// Per-clip log-mel cache under one directory, <itemid>.feat, in the same
/// binary tensor container as checkpoints. A `params` record guards against
/// reading features computed under a different front-end recipe.
class FeatureCache {
   public:
    FeatureCache(std::string cache_dir, FeatureParams params = {})
        : dir_(std::move(cache_dir)), params_(params) {
        namespace fs = std::filesystem;
        if (!fs::exists(dir_)) fs::create_directories(dir_);
        fb_ = build_mel_filterbank(params_);
    }

    const FeatureParams& params() const { return params_; }

    std::string feature_path(const std::string& itemid) const {
        return (std::filesystem::path(dir_) / (itemid + ".feat")).string();
    }

    bool cached(const std::string& itemid) const {
        return std::filesystem::exists(feature_path(itemid));
    }

    Tensor params_record() const {
        return Tensor::from_data(
            Shape{7},
            {static_cast<float>(params_.sample_rate), static_cast<float>(params_.win),
             static_cast<float>(params_.hop), static_cast<float>(params_.n_mels),
             static_cast<float>(params_.f_min), static_cast<float>(params_.f_max),
             static_cast<float>(params_.floor_eps)});
    }

    /// Loads the cached tensor, or computes it from the WAV (resampling to
    /// the front-end rate when needed) and writes the cache file.
    Tensor get(const ManifestEntry& entry) {
        if (cached(entry.itemid)) {
            auto loaded = try_load(entry.itemid);
            if (loaded.valid()) return loaded;
        }
        return compute_and_store(entry);
    }

    /// Cache-only lookup; InputError when absent.
    Tensor load(const std::string& itemid) {
        auto t = try_load(itemid);
        if (!t.valid())
            throw InputError(cat("no cached feature for '", itemid, "' under '", dir_, "'"));
        return t;
    }

    Tensor compute_and_store(const ManifestEntry& entry) {
        AudioClip clip = load_wav(entry.wav_path);
        clip.source_id = entry.itemid;
        if (clip.sample_rate != params_.sample_rate) clip = resample(clip, params_.sample_rate);
        auto spec = log_mel(clip, fb_, params_);
        write_tensor_file(feature_path(entry.itemid),
                          {{"feature", spec.values}, {"params", params_record()}});
        return spec.values;
    }

   private:
    Tensor try_load(const std::string& itemid) {
        const auto path = feature_path(itemid);
        if (!std::filesystem::exists(path)) return {};
        auto records = read_tensor_file(path);
        auto feat = records.find("feature");
        auto meta = records.find("params");
        if (feat == records.end() || meta == records.end()) return {};
        if (meta->second.values() != params_record().values()) return {};
        return feat->second;
    }

    std::string dir_;
    FeatureParams params_;
    MelFilterbank fb_;
};

/// All features of one split preloaded into memory, keyed by itemid.
class FeatureSet {
   public:
    FeatureSet() = default;

    void put(const std::string& itemid, Tensor t) { features_[itemid] = std::move(t); }

    const Tensor& get(const std::string& itemid) const {
        auto it = features_.find(itemid);
        if (it == features_.end()) throw InputError(cat("no feature loaded for '", itemid, "'"));
        return it->second;
    }

    static FeatureSet preload(FeatureCache& cache, const Manifest& manifest,
                              const std::vector<std::string>& ids) {
        FeatureSet set;
        for (const auto& id : ids) set.put(id, cache.get(manifest.find(id)));
        return set;
    }

   private:
    std::unordered_map<std::string, Tensor> features_;
};

}  // namespace aedf
