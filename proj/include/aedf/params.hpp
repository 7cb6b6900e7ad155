#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aedf/rng.hpp"
#include "aedf/tensor.hpp"

namespace aedf {

/// He-uniform draw in +-sqrt(6/fan_in), deterministic in (shape, seed).
/// Values are generated at 32-bit precision regardless of S so float and
/// double instantiations start from numerically identical parameters.
template <typename S>
TensorT<S> seeded_init(Shape shape, int fan_in, std::uint64_t seed) {
    if (fan_in < 1) throw ConfigError(cat("seeded_init: fan_in must be >= 1, got ", fan_in));
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    Rng rng(seed);
    TensorT<S> t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i)
        t.data()[i] = static_cast<S>(rng.uniform_f(-bound, bound));
    return t;
}

/// Named parameter map with per-parameter Adam state. Keys are dotted paths;
/// iteration order is lexicographic, which fixes checkpoint record order.
template <typename S>
class ParamStoreT {
   public:
    struct Entry {
        TensorT<S> value;
        TensorT<S> moment1;
        TensorT<S> moment2;
        std::int64_t step = 0;
    };

    TensorT<S>& create(const std::string& name, Shape shape, int fan_in, std::uint64_t seed) {
        return insert(name, seeded_init<S>(std::move(shape), fan_in,
                                           seed_mix(seed, fnv1a64(name))));
    }

    TensorT<S>& create_zeros(const std::string& name, Shape shape) {
        return insert(name, TensorT<S>(std::move(shape)));
    }

    TensorT<S>& insert(const std::string& name, TensorT<S> value) {
        if (entries_.count(name)) throw IntegrityError(cat("duplicate parameter name '", name, "'"));
        value.set_requires_grad(true);
        Entry e;
        e.value = std::move(value);
        e.moment1 = TensorT<S>(e.value.shape());
        e.moment2 = TensorT<S>(e.value.shape());
        auto [it, ok] = entries_.emplace(name, std::move(e));
        (void)ok;
        return it->second.value;
    }

    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    TensorT<S>& at(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ContractError(cat("unknown parameter '", name, "'"));
        return it->second.value;
    }

    const TensorT<S>& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ContractError(cat("unknown parameter '", name, "'"));
        return it->second.value;
    }

    std::size_t count() const { return entries_.size(); }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& [k, v] : entries_) out.push_back(k);
        return out;
    }

    std::vector<std::string> names_with_prefix(const std::string& prefix) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : entries_)
            if (k.rfind(prefix, 0) == 0) out.push_back(k);
        return out;
    }

    void zero_grads() {
        for (auto& [k, e] : entries_) e.value.zero_grad();
    }

    /// Copies parameter values (not Adam state) from another store; every
    /// source name prefixed with `prefix` must already exist here with a
    /// matching shape.
    void copy_values_from(const ParamStoreT& src, const std::string& prefix = "") {
        for (const auto& [name, e] : src.entries_) {
            if (name.rfind(prefix, 0) != 0) continue;
            TensorT<S>& dst = at(name);
            if (!dst.same_shape(e.value))
                throw DimensionError(cat("copy_values_from: shape mismatch on '", name, "'"));
            dst.values() = e.value.values();
        }
    }

    ParamStoreT clone_values() const {
        ParamStoreT out;
        for (const auto& [name, e] : entries_) out.insert(name, e.value.clone());
        return out;
    }

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

   private:
    std::map<std::string, Entry> entries_;
};

using ParamStore = ParamStoreT<float>;

/// Bias-corrected Adam update over every parameter in the store. Gradients
/// are left intact; callers zero them between steps.
template <typename S>
void adam_step(ParamStoreT<S>& store, S lr, S beta1 = S(0.9), S beta2 = S(0.999),
               S eps = S(1e-8)) {
    for (auto& [name, e] : store) {
        if (!e.value.has_grad())
            throw ContractError(cat("adam_step: parameter '", name, "' has no gradient"));
        e.step += 1;
        const S bc1 = S(1) - std::pow(beta1, static_cast<S>(e.step));
        const S bc2 = S(1) - std::pow(beta2, static_cast<S>(e.step));
        S* w = e.value.data();
        const S* g = e.value.grad();
        S* m = e.moment1.data();
        S* v = e.moment2.data();
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            m[i] = beta1 * m[i] + (S(1) - beta1) * g[i];
            v[i] = beta2 * v[i] + (S(1) - beta2) * g[i] * g[i];
            const S mhat = m[i] / bc1;
            const S vhat = v[i] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace aedf
