#pragma once

// Independent reference implementations used as test oracles. These stay
// deliberately naive (nested loops, O(n^2) pair counting) and must not call
// into the library paths they are checking.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "aedf/rng.hpp"
#include "aedf/tensor.hpp"

namespace oracle {

// Direct six-loop same-padding convolution.
template <typename S>
std::vector<S> conv2d_same(const std::vector<S>& in, int c_in, int h, int w,
                           const std::vector<S>& kernel, int c_out, int kh, int kw,
                           const std::vector<S>& bias) {
    std::vector<S> out(static_cast<std::size_t>(c_out) * h * w, S(0));
    const int ph = kh / 2, pw = kw / 2;
    for (int co = 0; co < c_out; ++co)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                S acc = bias[static_cast<std::size_t>(co)];
                for (int ci = 0; ci < c_in; ++ci)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            const int sy = y + ky - ph, sx = x + kx - pw;
                            if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                            acc += in[(static_cast<std::size_t>(ci) * h + sy) * w + sx] *
                                   kernel[((static_cast<std::size_t>(co) * c_in + ci) * kh + ky) * kw + kx];
                        }
                out[(static_cast<std::size_t>(co) * h + y) * w + x] = acc;
            }
    return out;
}

template <typename S>
std::vector<S> maxpool2d(const std::vector<S>& in, int c, int h, int w, int ph, int pw) {
    const int oh = h / ph, ow = w / pw;
    std::vector<S> out(static_cast<std::size_t>(c) * oh * ow);
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                S best = in[(static_cast<std::size_t>(ci) * h + y * ph) * w + x * pw];
                for (int dy = 0; dy < ph; ++dy)
                    for (int dx = 0; dx < pw; ++dx)
                        best = std::max(best, in[(static_cast<std::size_t>(ci) * h + y * ph + dy) * w +
                                                 x * pw + dx]);
                out[(static_cast<std::size_t>(ci) * oh + y) * ow + x] = best;
            }
    return out;
}

template <typename S>
std::vector<S> dense(const std::vector<S>& in, const std::vector<S>& weight,
                     const std::vector<S>& bias, int m, int n) {
    std::vector<S> out(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        S acc = bias[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j) acc += weight[static_cast<std::size_t>(i) * n + j] * in[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

// Mann-Whitney AUC by exhaustive pair counting, ties get half credit.
inline double brute_force_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double num = 0.0;
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 1) {
            ++pos;
            for (std::size_t j = 0; j < scores.size(); ++j) {
                if (labels[j] != 0) continue;
                if (scores[i] > scores[j])
                    num += 1.0;
                else if (scores[i] == scores[j])
                    num += 0.5;
            }
        } else {
            ++neg;
        }
    }
    return num / (static_cast<double>(pos) * static_cast<double>(neg));
}

// --------------------------------------------------------------------------
// Finite-difference gradient checking
// --------------------------------------------------------------------------

// build(leaves, tape) must construct a scalar loss from the leaf tensors.
// Error metric: |analytic - fd| / max(1, |analytic|, |fd|), i.e. relative
// above magnitude 1 and absolute below it.
//
// Composed networks have piecewise-linear kinks (leaky relu, max-pool
// argmax); an element whose +-h interval straddles one yields a central
// difference that averages two slopes and says nothing about the gradient
// at the point itself. When kink_skip_threshold > 0, elements whose
// second difference |f(x+h) + f(x-h) - 2 f(x)| / h exceeds it are skipped
// and counted in skipped_fraction so callers can bound the loss of coverage.
template <typename S, typename Build>
double max_fd_rel_error(std::vector<aedf::TensorT<S>>& leaves, Build build, double h = 1e-3,
                        double kink_skip_threshold = 0.0, double* skipped_fraction = nullptr,
                        std::size_t max_per_leaf = static_cast<std::size_t>(-1)) {
    for (auto& leaf : leaves) leaf.set_requires_grad(true);

    aedf::TapeT<S> tape;
    auto loss = build(leaves, &tape);
    tape.backward(loss);

    auto eval = [&]() {
        auto value = build(leaves, static_cast<aedf::TapeT<S>*>(nullptr));
        return static_cast<double>(value.item());
    };

    const double f0 = kink_skip_threshold > 0.0 ? eval() : 0.0;
    std::size_t skipped = 0, total = 0;
    double worst = 0.0;
    for (auto& leaf : leaves) {
        const std::size_t stride =
            leaf.size() > max_per_leaf ? (leaf.size() + max_per_leaf - 1) / max_per_leaf : 1;
        for (std::size_t i = 0; i < leaf.size(); i += stride) {
            ++total;
            const S saved = leaf.data()[i];
            leaf.data()[i] = saved + static_cast<S>(h);
            const double up = eval();
            leaf.data()[i] = saved - static_cast<S>(h);
            const double down = eval();
            leaf.data()[i] = saved;
            if (kink_skip_threshold > 0.0 &&
                std::abs(up + down - 2.0 * f0) / h > kink_skip_threshold) {
                ++skipped;
                continue;
            }
            const double fd = (up - down) / (2.0 * h);
            const double analytic = leaf.has_grad() ? static_cast<double>(leaf.grad()[i]) : 0.0;
            const double err = std::abs(analytic - fd) /
                               std::max({1.0, std::abs(analytic), std::abs(fd)});
            worst = std::max(worst, err);
        }
    }
    if (skipped_fraction)
        *skipped_fraction = total ? static_cast<double>(skipped) / static_cast<double>(total) : 0.0;
    return worst;
}

// Directional derivative check: perturbs every leaf along one random
// direction, so two extra forward passes check the whole gradient at once.
template <typename S, typename Build>
double directional_fd_rel_error(std::vector<aedf::TensorT<S>>& leaves, Build build,
                                std::uint64_t seed, double h = 1e-3) {
    for (auto& leaf : leaves) leaf.set_requires_grad(true);

    aedf::TapeT<S> tape;
    auto loss = build(leaves, &tape);
    tape.backward(loss);

    aedf::Rng rng(seed);
    std::vector<std::vector<double>> dirs;
    double analytic = 0.0;
    for (auto& leaf : leaves) {
        std::vector<double> d(leaf.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            d[i] = rng.gaussian();
            if (leaf.has_grad()) analytic += d[i] * static_cast<double>(leaf.grad()[i]);
        }
        dirs.push_back(std::move(d));
    }

    auto shift = [&](double scale) {
        for (std::size_t li = 0; li < leaves.size(); ++li)
            for (std::size_t i = 0; i < leaves[li].size(); ++i)
                leaves[li].data()[i] += static_cast<S>(scale * dirs[li][i]);
    };

    shift(h);
    const double up = static_cast<double>(build(leaves, static_cast<aedf::TapeT<S>*>(nullptr)).item());
    shift(-2.0 * h);
    const double down = static_cast<double>(build(leaves, static_cast<aedf::TapeT<S>*>(nullptr)).item());
    shift(h);

    const double fd = (up - down) / (2.0 * h);
    return std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
}

// Uniform values with every pairwise gap in each pooling window above
// `min_gap`, so max-pool FD checks stay off the tie boundary.
template <typename S>
aedf::TensorT<S> well_separated(aedf::Shape shape, std::uint64_t seed, double min_gap = 0.05) {
    aedf::TensorT<S> t(shape);
    aedf::Rng rng(seed);
    const std::size_t n = t.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    // Values on a jittered lattice: distinct by construction.
    for (std::size_t i = 0; i < n; ++i)
        t.data()[order[i]] = static_cast<S>(-1.0 + (2.0 * static_cast<double>(i) + 0.4 + 0.2 * rng.uniform()) *
                                                       min_gap);
    return t;
}

}  // namespace oracle
