#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aedf/ops.hpp"
#include "aedf/params.hpp"

namespace aedf {

struct ConvBlockConfig {
    int out_channels = 16;
    int pool_f = 2;
    int pool_t = 2;
};

/// Stacked conv(3x3, same) -> leaky ReLU -> max-pool blocks. The reference
/// geometry reduces 80 mel bands to 4 and divides time by 32, so a 711-frame
/// input flattens to 16*4*44 = 2816 after pairing.
struct DiscriminatorConfig {
    std::vector<ConvBlockConfig> blocks;
    float leaky_slope = 0.01f;
    int input_mels = 80;

    static DiscriminatorConfig reference() {
        DiscriminatorConfig cfg;
        cfg.blocks = {{16, 5, 4}, {16, 2, 4}, {16, 2, 2}};
        return cfg;
    }

    void validate() const {
        if (blocks.empty()) throw ConfigError("discriminator needs at least one block");
        for (const auto& b : blocks)
            if (b.out_channels < 1 || b.pool_f < 1 || b.pool_t < 1)
                throw ConfigError("discriminator block fields must be >= 1");
        if (out_mels() < 1)
            throw ConfigError(cat("frequency pooling collapses ", input_mels, " mel bands to zero"));
        if (leaky_slope < 0.0f || leaky_slope >= 1.0f)
            throw ConfigError("leaky slope must be in [0, 1)");
    }

    int out_channels() const { return blocks.back().out_channels; }

    int out_mels() const {
        int f = input_mels;
        for (const auto& b : blocks) f /= b.pool_f;
        return f;
    }

    int out_frames(int frames) const {
        int t = frames;
        for (const auto& b : blocks) t /= b.pool_t;
        return t;
    }

    int min_frames() const {
        int t = 1;
        for (const auto& b : blocks) t *= b.pool_t;
        return t;
    }

    /// Rows of the frame matrix: channels times pooled mel bands.
    int frame_dim() const { return out_channels() * out_mels(); }
};

enum class ClassifierKind { FrameWise, FlatClassifier, Baseline };

inline std::string to_string(ClassifierKind kind) {
    switch (kind) {
        case ClassifierKind::FrameWise: return "frame_wise";
        case ClassifierKind::FlatClassifier: return "flat";
        case ClassifierKind::Baseline: return "baseline";
    }
    throw ConfigError("unknown classifier kind");
}

inline ClassifierKind classifier_kind_from_string(const std::string& s) {
    if (s == "frame_wise") return ClassifierKind::FrameWise;
    if (s == "flat") return ClassifierKind::FlatClassifier;
    if (s == "baseline") return ClassifierKind::Baseline;
    throw ConfigError(cat("unknown classifier kind '", s, "'"));
}

/// Everything needed to rebuild a model around a checkpoint.
struct ModelConfig {
    DiscriminatorConfig disc;
    ClassifierKind kind = ClassifierKind::FrameWise;
    float lambda = 0.1f;
};

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : cfg.disc.blocks)
        blocks.push_back({{"channels", b.out_channels}, {"pool_f", b.pool_f}, {"pool_t", b.pool_t}});
    return {{"discriminator",
             {{"blocks", blocks},
              {"leaky_slope", cfg.disc.leaky_slope},
              {"input_mels", cfg.disc.input_mels}}},
            {"classifier", to_string(cfg.kind)},
            {"lambda", cfg.lambda}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.disc.blocks.clear();
    for (const auto& b : j.at("discriminator").at("blocks"))
        cfg.disc.blocks.push_back(
            {b.at("channels").get<int>(), b.at("pool_f").get<int>(), b.at("pool_t").get<int>()});
    cfg.disc.leaky_slope = j.at("discriminator").at("leaky_slope").get<float>();
    cfg.disc.input_mels = j.at("discriminator").at("input_mels").get<int>();
    cfg.kind = classifier_kind_from_string(j.at("classifier").get<std::string>());
    cfg.lambda = j.at("lambda").get<float>();
    cfg.disc.validate();
    return cfg;
}

inline void save_model_config(const ModelConfig& cfg, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError(cat("cannot open '", path, "' for writing"));
    os << model_config_to_json(cfg).dump(2) << "\n";
}

inline ModelConfig load_model_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError(cat("cannot open '", path, "'"));
    nlohmann::json j;
    try {
        is >> j;
        return model_config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(cat("'", path, "': ", e.what()));
    }
}

// ---------------------------------------------------------------------------
// Parameter construction
// ---------------------------------------------------------------------------

template <typename S>
void init_discriminator(ParamStoreT<S>& store, const std::string& prefix,
                        const DiscriminatorConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    int in_channels = 1;
    for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
        const auto& b = cfg.blocks[i];
        const std::string base = cat(prefix, "b", i, ".");
        store.create(base + "kernel", Shape{b.out_channels, in_channels, 3, 3}, in_channels * 9,
                     seed);
        store.create_zeros(base + "bias", Shape{b.out_channels});
        in_channels = b.out_channels;
    }
}

namespace model_detail {

template <typename S>
void init_dense_stack(ParamStoreT<S>& store, const std::string& prefix, int input_dim,
                      const std::vector<int>& units, std::uint64_t seed) {
    int in = input_dim;
    for (std::size_t i = 0; i < units.size(); ++i) {
        store.create(cat(prefix, "fc", i, ".weight"), Shape{units[i], in}, in, seed);
        store.create_zeros(cat(prefix, "fc", i, ".bias"), Shape{units[i]});
        in = units[i];
    }
}

}  // namespace model_detail

/// Builds all parameters for the chosen classifier. `frames` is the feature
/// frame count of the dataset; the flat and baseline heads need it to size
/// their first dense layer.
template <typename S>
ParamStoreT<S> init_model_params(const ModelConfig& cfg, int frames, std::uint64_t seed) {
    cfg.disc.validate();
    if (frames < cfg.disc.min_frames())
        throw DimensionError(cat("input of ", frames, " frames is shorter than the pooling floor ",
                                 cfg.disc.min_frames()));
    ParamStoreT<S> store;
    const int fd = cfg.disc.frame_dim();
    const int paired_frames = 2 * cfg.disc.out_frames(frames);
    switch (cfg.kind) {
        case ClassifierKind::FrameWise:
            init_discriminator(store, "disc_a.", cfg.disc, seed);
            init_discriminator(store, "disc_b.", cfg.disc, seed);
            store.create("classifier.ffn1.weight", Shape{32, fd}, fd, seed);
            store.create_zeros("classifier.ffn1.bias", Shape{32});
            store.create("classifier.ffn2.weight", Shape{1, 32}, 32, seed);
            store.create_zeros("classifier.ffn2.bias", Shape{1});
            store.create("classifier.attn.weight", Shape{1, fd}, fd, seed);
            store.create_zeros("classifier.attn.bias", Shape{1});
            break;
        case ClassifierKind::FlatClassifier:
            init_discriminator(store, "disc_a.", cfg.disc, seed);
            init_discriminator(store, "disc_b.", cfg.disc, seed);
            model_detail::init_dense_stack(store, "classifier.", fd * paired_frames,
                                           {512, 256, 32, 1}, seed);
            break;
        case ClassifierKind::Baseline:
            init_discriminator(store, "encoder.", cfg.disc, seed);
            model_detail::init_dense_stack(store, "classifier.",
                                           fd * cfg.disc.out_frames(frames), {256, 32, 1}, seed);
            break;
    }
    return store;
}

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

/// One CNN encoder: conv(3x3, same) -> leaky ReLU -> max-pool per block.
/// Input is 1 x mels x frames; output channels x pooled-mels x pooled-frames.
template <typename S>
TensorT<S> discriminator_forward(TensorT<S> input, const ParamStoreT<S>& store,
                                 const std::string& prefix, const DiscriminatorConfig& cfg,
                                 TapeT<S>* tape) {
    if (input.rank() != 3 || input.dim(0) != 1 || input.dim(1) != cfg.input_mels)
        throw DimensionError(cat("discriminator expects 1x", cfg.input_mels,
                                 "xT input, got ", shape_str(input.shape())));
    TensorT<S> x = input;
    for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
        const auto& b = cfg.blocks[i];
        const std::string base = cat(prefix, "b", i, ".");
        x = conv2d_same(x, store.at(base + "kernel"), store.at(base + "bias"), tape);
        x = leaky_relu(x, static_cast<S>(cfg.leaky_slope), tape);
        x = maxpool2d(x, b.pool_f, b.pool_t, tape);
    }
    return x;
}

template <typename S>
struct PairedRepresentationT {
    TensorT<S> a;  // first discriminator output,  C x F' x T'
    TensorT<S> b;  // second discriminator output, C x F' x T'
    TensorT<S> m;  // time-axis concatenation,     C x F' x 2T'
};

using PairedRepresentation = PairedRepresentationT<float>;

template <typename S>
PairedRepresentationT<S> pair_forward(TensorT<S> input, const ParamStoreT<S>& store,
                                      const DiscriminatorConfig& cfg, TapeT<S>* tape) {
    PairedRepresentationT<S> out;
    out.a = discriminator_forward(input, store, "disc_a.", cfg, tape);
    out.b = discriminator_forward(input, store, "disc_b.", cfg, tape);
    out.m = concat_last_axis(out.a, out.b, tape);
    return out;
}

/// Cosine similarity of two vectors, differentiable. Norms below 1e-12 short
/// circuit to a constant 0 score (reported through `degenerate`) because a
/// zero vector has no direction to compare.
template <typename S>
TensorT<S> cosine_similarity(TensorT<S> a, TensorT<S> b, TapeT<S>* tape,
                             bool* degenerate = nullptr) {
    if (a.rank() != 1 || b.rank() != 1 || a.size() != b.size())
        throw DimensionError(cat("cosine_similarity: need equal-length vectors, got ",
                                 shape_str(a.shape()), " and ", shape_str(b.shape())));
    double na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += static_cast<double>(a.data()[i]) * a.data()[i];
        nb += static_cast<double>(b.data()[i]) * b.data()[i];
    }
    if (degenerate) *degenerate = false;
    if (std::sqrt(na) < 1e-12 || std::sqrt(nb) < 1e-12) {
        if (degenerate) *degenerate = true;
        return TensorT<S>::scalar(S(0));
    }
    auto numerator = dot(a, b, tape);
    auto denom = mul(sqrt_op(dot(a, a, tape), tape), sqrt_op(dot(b, b, tape), tape), tape);
    return div(numerator, denom, tape);
}

template <typename S>
struct DiscriminativeLossTermsT {
    TensorT<S> total;
    TensorT<S> positive_term;  // -y * log(1 - H(s))
    TensorT<S> negative_term;  // -lambda * (1-y) * log(H(s))
};

/// Loss driving the paired representations apart on positive clips and
/// together on negative clips. H is ReLU clamped into [1e-7, 1 - 1e-7] so
/// both logs stay finite at s in {0, 1}.
template <typename S>
DiscriminativeLossTermsT<S> discriminative_loss_terms(TensorT<S> similarity, int label, S lambda,
                                                      TapeT<S>* tape) {
    if (lambda < S(0) || lambda > S(1))
        throw ConfigError(cat("discriminative loss lambda must be in [0, 1], got ", lambda));
    if (label != 0 && label != 1)
        throw ContractError(cat("discriminative loss label must be 0 or 1, got ", label));
    const S eps = static_cast<S>(1e-7);
    auto h = clamp(relu(similarity, tape), eps, S(1) - eps, tape);
    DiscriminativeLossTermsT<S> terms;
    terms.positive_term =
        affine(log_op(affine(h, S(-1), S(1), tape), tape), -static_cast<S>(label), S(0), tape);
    terms.negative_term =
        affine(log_op(h, tape), -(lambda * static_cast<S>(1 - label)), S(0), tape);
    terms.total = add(terms.positive_term, terms.negative_term, tape);
    return terms;
}

template <typename S>
TensorT<S> discriminative_loss(TensorT<S> similarity, int label, S lambda, TapeT<S>* tape) {
    return discriminative_loss_terms(similarity, label, lambda, tape).total;
}

/// Plain binary cross entropy with the prediction clamped into
/// [1e-7, 1 - 1e-7].
template <typename S>
TensorT<S> bce_loss(TensorT<S> y_hat, int label, TapeT<S>* tape) {
    if (label != 0 && label != 1)
        throw ContractError(cat("bce label must be 0 or 1, got ", label));
    const S eps = static_cast<S>(1e-7);
    auto c = clamp(y_hat, eps, S(1) - eps, tape);
    auto pos = affine(log_op(c, tape), -static_cast<S>(label), S(0), tape);
    auto neg = affine(log_op(affine(c, S(-1), S(1), tape), tape), -static_cast<S>(1 - label), S(0),
                      tape);
    return add(pos, neg, tape);
}

/// Attention pooling: sum(p_j w_j) / sum(w_j). Invariant under positive
/// scaling of the weights; the result stays within [min p_j, max p_j].
template <typename S>
TensorT<S> attention_pool(TensorT<S> per_frame, TensorT<S> weights, TapeT<S>* tape) {
    if (per_frame.rank() != 1 || !per_frame.same_shape(weights))
        throw DimensionError("attention_pool: per-frame scores and weights must be equal-length vectors");
    return div(dot(per_frame, weights, tape), sum(weights, tape), tape);
}

template <typename S>
struct FrameClassifierOutT {
    TensorT<S> score;      // pooled clip probability, scalar
    TensorT<S> per_frame;  // per-frame probabilities, length 2T'
    TensorT<S> weights;    // attention weights, length 2T'
};

/// Shared two-layer FFN scores every frame of the paired representation;
/// attention pooling aggregates the frame scores into the clip score.
/// The attention score is affine per frame, exponentiated with a +-7 clamp.
template <typename S>
FrameClassifierOutT<S> frame_classifier_forward(TensorT<S> paired, const ParamStoreT<S>& store,
                                                const DiscriminatorConfig& cfg, TapeT<S>* tape) {
    if (paired.rank() != 3)
        throw DimensionError(cat("frame classifier expects CxF'x2T' input, got ",
                                 shape_str(paired.shape())));
    const int frame_dim = paired.dim(0) * paired.dim(1);
    const int n_frames = paired.dim(2);
    // Row-major C,F,T layout makes the (C*F') x 2T' frame matrix a reshape.
    auto frame_matrix = reshape(paired, Shape{frame_dim, n_frames}, tape);

    auto hidden = leaky_relu(
        add_col_bias(matmul(store.at("classifier.ffn1.weight"), frame_matrix, tape),
                     store.at("classifier.ffn1.bias"), tape),
        static_cast<S>(cfg.leaky_slope), tape);
    auto logits = add_col_bias(matmul(store.at("classifier.ffn2.weight"), hidden, tape),
                               store.at("classifier.ffn2.bias"), tape);

    FrameClassifierOutT<S> out;
    out.per_frame = flatten(sigmoid(logits, tape), tape);

    auto attn_scores = add_col_bias(matmul(store.at("classifier.attn.weight"), frame_matrix, tape),
                                    store.at("classifier.attn.bias"), tape);
    out.weights = flatten(exp_op(clamp(attn_scores, S(-7), S(7), tape), tape), tape);
    out.score = attention_pool(out.per_frame, out.weights, tape);
    return out;
}

namespace model_detail {

template <typename S>
TensorT<S> dense_stack_forward(TensorT<S> x, const ParamStoreT<S>& store,
                               const std::string& prefix, int n_layers, S slope, TapeT<S>* tape) {
    for (int i = 0; i < n_layers; ++i) {
        x = dense(x, store.at(cat(prefix, "fc", i, ".weight")),
                  store.at(cat(prefix, "fc", i, ".bias")), tape);
        if (i + 1 < n_layers) x = leaky_relu(x, slope, tape);
    }
    return sigmoid(x, tape);
}

}  // namespace model_detail

/// Dense stack (512/256/32/1) over the flattened paired representation.
template <typename S>
TensorT<S> flat_classifier_forward(TensorT<S> paired, const ParamStoreT<S>& store,
                                   const DiscriminatorConfig& cfg, TapeT<S>* tape) {
    auto flat = flatten(paired, tape);
    return model_detail::dense_stack_forward(flat, store, "classifier.", 4,
                                             static_cast<S>(cfg.leaky_slope), tape);
}

/// Single encoder followed by a 256/32/1 dense stack.
template <typename S>
TensorT<S> baseline_forward(TensorT<S> input, const ParamStoreT<S>& store,
                            const DiscriminatorConfig& cfg, TapeT<S>* tape) {
    auto encoded = discriminator_forward(input, store, "encoder.", cfg, tape);
    auto flat = flatten(encoded, tape);
    return model_detail::dense_stack_forward(flat, store, "classifier.", 3,
                                             static_cast<S>(cfg.leaky_slope), tape);
}

/// Inference score in [0, 1] for any classifier kind.
template <typename S>
TensorT<S> model_score(TensorT<S> input, const ParamStoreT<S>& store, const ModelConfig& cfg,
                       TapeT<S>* tape) {
    switch (cfg.kind) {
        case ClassifierKind::Baseline:
            return baseline_forward(input, store, cfg.disc, tape);
        case ClassifierKind::FrameWise: {
            auto rep = pair_forward(input, store, cfg.disc, tape);
            return frame_classifier_forward(rep.m, store, cfg.disc, tape).score;
        }
        case ClassifierKind::FlatClassifier: {
            auto rep = pair_forward(input, store, cfg.disc, tape);
            return flat_classifier_forward(rep.m, store, cfg.disc, tape);
        }
    }
    throw ConfigError("unknown classifier kind");
}

}  // namespace aedf
