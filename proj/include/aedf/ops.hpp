#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "aedf/tensor.hpp"

namespace aedf {

namespace detail {

template <typename S>
bool want_grad(const TapeT<S>* tape, std::initializer_list<const TensorT<S>*> inputs) {
    if (!tape) return false;
    for (const auto* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

// C(m x n) += A(m x k) * B(k x n), all row-major.
template <typename S>
void gemm_nn(int m, int n, int k, const S* a, const S* b, S* c) {
    for (int i = 0; i < m; ++i) {
        const S* arow = a + static_cast<std::size_t>(i) * k;
        S* crow = c + static_cast<std::size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const S av = arow[l];
            if (av == S(0)) continue;
            const S* brow = b + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C(m x n) += A(m x k) * B(n x k)^T
template <typename S>
void gemm_nt(int m, int n, int k, const S* a, const S* b, S* c) {
    for (int i = 0; i < m; ++i) {
        const S* arow = a + static_cast<std::size_t>(i) * k;
        S* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const S* brow = b + static_cast<std::size_t>(j) * k;
            S acc = S(0);
            for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
            crow[j] += acc;
        }
    }
}

// C(m x n) += A(k x m)^T * B(k x n)
template <typename S>
void gemm_tn(int m, int n, int k, const S* a, const S* b, S* c) {
    for (int l = 0; l < k; ++l) {
        const S* arow = a + static_cast<std::size_t>(l) * m;
        const S* brow = b + static_cast<std::size_t>(l) * n;
        for (int i = 0; i < m; ++i) {
            const S av = arow[i];
            if (av == S(0)) continue;
            S* crow = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename S>
void check_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(cat(op, ": shape mismatch ", shape_str(a.shape()), " vs ",
                                 shape_str(b.shape())));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> add(TensorT<S> a, TensorT<S> b, TapeT<S>* tape) {
    detail::check_same_shape(a, b, "add");
    TensorT<S> out(a.shape());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    if (detail::want_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape->record([a, b, out]() mutable {
            if (!out.has_grad()) return;
            const S* g = out.grad();
            if (a.requires_grad()) {
                a.ensure_grad();
                for (std::size_t i = 0; i < a.size(); ++i) a.grad()[i] += g[i];
            }
            if (b.requires_grad()) {
                b.ensure_grad();
                for (std::size_t i = 0; i < b.size(); ++i) b.grad()[i] += g[i];
            }
        });
    }
    return out;
}

template <typename S>
TensorT<S> mul(TensorT<S> a, TensorT<S> b, TapeT<S>* tape) {
    detail::check_same_shape(a, b, "mul");
    TensorT<S> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    if (detail::want_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape->record([a, b, out]() mutable {
            if (!out.has_grad()) return;
            const S* g = out.grad();
            if (a.requires_grad()) {
                a.ensure_grad();
                for (std::size_t i = 0; i < a.size(); ++i) a.grad()[i] += g[i] * b.data()[i];
            }
            if (b.requires_grad()) {
                b.ensure_grad();
                for (std::size_t i = 0; i < b.size(); ++i) b.grad()[i] += g[i] * a.data()[i];
            }
        });
    }
    return out;
}

template <typename S>
TensorT<S> div(TensorT<S> a, TensorT<S> b, TapeT<S>* tape) {
    detail::check_same_shape(a, b, "div");
    TensorT<S> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] / b.data()[i];
    if (detail::want_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape->record([a, b, out]() mutable {
            if (!out.has_grad()) return;
            const S* g = out.grad();
            if (a.requires_grad()) {
                a.ensure_grad();
                for (std::size_t i = 0; i < a.size(); ++i) a.grad()[i] += g[i] / b.data()[i];
            }
            if (b.requires_grad()) {
                b.ensure_grad();
                for (std::size_t i = 0; i < b.size(); ++i) {
                    const S bv = b.data()[i];
                    b.grad()[i] -= g[i] * a.data()[i] / (bv * bv);
                }
            }
        });
    }
    return out;
}

/// scale * x + shift, elementwise with constant coefficients.
template <typename S>
TensorT<S> affine(TensorT<S> x, S scale, S shift, TapeT<S>* tape) {
    TensorT<S> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = scale * x.data()[i] + shift;
    if (detail::want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape->record([x, out, scale]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            x.ensure_grad();
            for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += scale * out.grad()[i];
        });
    }
    return out;
}

template <typename S>
TensorT<S> sub(TensorT<S> a, TensorT<S> b, TapeT<S>* tape) {
    return add(a, affine(b, S(-1), S(0), tape), tape);
}

namespace detail {

// Shared skeleton for elementwise y = f(x) ops with local derivative df(x, y).
template <typename S, typename F, typename DF>
TensorT<S> unary_op(TensorT<S> x, TapeT<S>* tape, F f, DF df) {
    TensorT<S> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = f(x.data()[i]);
    if (want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape->record([x, out, df]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            x.ensure_grad();
            for (std::size_t i = 0; i < x.size(); ++i)
                x.grad()[i] += out.grad()[i] * df(x.data()[i], out.data()[i]);
        });
    }
    return out;
}

}  // namespace detail

template <typename S>
TensorT<S> relu(TensorT<S> x, TapeT<S>* tape) {
    return detail::unary_op(
        x, tape, [](S v) { return v > S(0) ? v : S(0); },
        [](S v, S) { return v > S(0) ? S(1) : S(0); });
}

template <typename S>
TensorT<S> leaky_relu(TensorT<S> x, S slope, TapeT<S>* tape) {
    if (slope < S(0) || slope >= S(1))
        throw ConfigError(cat("leaky_relu slope must be in [0, 1), got ", slope));
    return detail::unary_op(
        x, tape, [slope](S v) { return v >= S(0) ? v : slope * v; },
        [slope](S v, S) { return v >= S(0) ? S(1) : slope; });
}

template <typename S>
TensorT<S> sigmoid(TensorT<S> x, TapeT<S>* tape) {
    auto f = [](S v) {
        if (v >= S(0)) return S(1) / (S(1) + std::exp(-v));
        const S e = std::exp(v);
        return e / (S(1) + e);
    };
    return detail::unary_op(x, tape, f, [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
TensorT<S> exp_op(TensorT<S> x, TapeT<S>* tape) {
    return detail::unary_op(x, tape, [](S v) { return std::exp(v); }, [](S, S y) { return y; });
}

template <typename S>
TensorT<S> log_op(TensorT<S> x, TapeT<S>* tape) {
    return detail::unary_op(x, tape, [](S v) { return std::log(v); },
                            [](S v, S) { return S(1) / v; });
}

template <typename S>
TensorT<S> sqrt_op(TensorT<S> x, TapeT<S>* tape) {
    return detail::unary_op(x, tape, [](S v) { return std::sqrt(v); },
                            [](S, S y) { return S(1) / (S(2) * y); });
}

/// Gradient passes only through the un-clamped interior.
template <typename S>
TensorT<S> clamp(TensorT<S> x, S lo, S hi, TapeT<S>* tape) {
    if (lo > hi) throw ConfigError("clamp: lo > hi");
    return detail::unary_op(
        x, tape, [lo, hi](S v) { return std::min(std::max(v, lo), hi); },
        [lo, hi](S v, S) { return (v > lo && v < hi) ? S(1) : S(0); });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> sum(TensorT<S> x, TapeT<S>* tape) {
    TensorT<S> out(Shape{1});
    S acc = S(0);
    for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i];
    out.data()[0] = acc;
    if (detail::want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape->record([x, out]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            x.ensure_grad();
            const S g = out.grad()[0];
            for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += g;
        });
    }
    return out;
}

template <typename S>
TensorT<S> dot(TensorT<S> a, TensorT<S> b, TapeT<S>* tape) {
    if (a.rank() != 1 || b.rank() != 1 || a.size() != b.size())
        throw DimensionError(cat("dot: need equal-length vectors, got ", shape_str(a.shape()),
                                 " and ", shape_str(b.shape())));
    TensorT<S> out(Shape{1});
    S acc = S(0);
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.data()[i] * b.data()[i];
    out.data()[0] = acc;
    if (detail::want_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape->record([a, b, out]() mutable {
            if (!out.has_grad()) return;
            const S g = out.grad()[0];
            if (a.requires_grad()) {
                a.ensure_grad();
                for (std::size_t i = 0; i < a.size(); ++i) a.grad()[i] += g * b.data()[i];
            }
            if (b.requires_grad()) {
                b.ensure_grad();
                for (std::size_t i = 0; i < b.size(); ++i) b.grad()[i] += g * a.data()[i];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> reshape(TensorT<S> x, Shape shape, TapeT<S>* tape) {
    if (shape_numel(shape) != x.size())
        throw DimensionError(cat("reshape: cannot view ", shape_str(x.shape()), " as ",
                                 shape_str(shape)));
    TensorT<S> out = TensorT<S>::from_data(std::move(shape), x.values());
    if (detail::want_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape->record([x, out]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            x.ensure_grad();
            for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += out.grad()[i];
        });
    }
    return out;
}

template <typename S>
TensorT<S> flatten(TensorT<S> x, TapeT<S>* tape) {
    return reshape(x, Shape{static_cast<int>(x.size())}, tape);
}

/// Joins two tensors along their final axis; all leading dims must agree.
template <typename S>
TensorT<S> concat_last_axis(TensorT<S> a, TensorT<S> b, TapeT<S>* tape) {
    if (a.rank() != b.rank())
        throw DimensionError(cat("concat_last_axis: rank mismatch ", shape_str(a.shape()), " vs ",
                                 shape_str(b.shape())));
    const int r = a.rank();
    for (int i = 0; i + 1 < r; ++i)
        if (a.dim(i) != b.dim(i))
            throw DimensionError(cat("concat_last_axis: leading dims differ ", shape_str(a.shape()),
                                     " vs ", shape_str(b.shape())));
    const int ta = a.dim(r - 1);
    const int tb = b.dim(r - 1);
    Shape out_shape = a.shape();
    out_shape[static_cast<std::size_t>(r - 1)] = ta + tb;
    TensorT<S> out(out_shape);
    const std::size_t rows = a.size() / static_cast<std::size_t>(ta);
    for (std::size_t row = 0; row < rows; ++row) {
        std::memcpy(out.data() + row * static_cast<std::size_t>(ta + tb),
                    a.data() + row * static_cast<std::size_t>(ta), sizeof(S) * static_cast<std::size_t>(ta));
        std::memcpy(out.data() + row * static_cast<std::size_t>(ta + tb) + ta,
                    b.data() + row * static_cast<std::size_t>(tb), sizeof(S) * static_cast<std::size_t>(tb));
    }
    if (detail::want_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape->record([a, b, out, rows, ta, tb]() mutable {
            if (!out.has_grad()) return;
            const S* g = out.grad();
            if (a.requires_grad()) {
                a.ensure_grad();
                for (std::size_t row = 0; row < rows; ++row)
                    for (int j = 0; j < ta; ++j)
                        a.grad()[row * ta + j] += g[row * static_cast<std::size_t>(ta + tb) + j];
            }
            if (b.requires_grad()) {
                b.ensure_grad();
                for (std::size_t row = 0; row < rows; ++row)
                    for (int j = 0; j < tb; ++j)
                        b.grad()[row * tb + j] += g[row * static_cast<std::size_t>(ta + tb) + ta + j];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

/// Row-major matrix product: (m x k) * (k x n) -> (m x n).
template <typename S>
TensorT<S> matmul(TensorT<S> a, TensorT<S> b, TapeT<S>* tape) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw DimensionError(cat("matmul: incompatible shapes ", shape_str(a.shape()), " and ",
                                 shape_str(b.shape())));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    TensorT<S> out(Shape{m, n});
    detail::gemm_nn(m, n, k, a.data(), b.data(), out.data());
    if (detail::want_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape->record([a, b, out, m, n, k]() mutable {
            if (!out.has_grad()) return;
            if (a.requires_grad()) {
                a.ensure_grad();
                detail::gemm_nt(m, k, n, out.grad(), b.data(), a.grad());
            }
            if (b.requires_grad()) {
                b.ensure_grad();
                detail::gemm_tn(k, n, m, a.data(), out.grad(), b.grad());
            }
        });
    }
    return out;
}

/// Affine map weight(m x n) * input(n) + bias(m).
template <typename S>
TensorT<S> dense(TensorT<S> input, TensorT<S> weight, TensorT<S> bias,
                 TapeT<S>* tape) {
    if (input.rank() != 1 || weight.rank() != 2 || bias.rank() != 1 ||
        weight.dim(1) != static_cast<int>(input.size()) ||
        weight.dim(0) != static_cast<int>(bias.size()))
        throw DimensionError(cat("dense: incompatible shapes input ", shape_str(input.shape()),
                                 " weight ", shape_str(weight.shape()), " bias ",
                                 shape_str(bias.shape())));
    const int m = weight.dim(0), n = weight.dim(1);
    TensorT<S> out(Shape{m});
    for (int i = 0; i < m; ++i) {
        const S* wrow = weight.data() + static_cast<std::size_t>(i) * n;
        S acc = bias.data()[i];
        for (int j = 0; j < n; ++j) acc += wrow[j] * input.data()[j];
        out.data()[i] = acc;
    }
    if (detail::want_grad(tape, {&input, &weight, &bias})) {
        out.set_requires_grad(true);
        tape->record([input, weight, bias, out, m, n]() mutable {
            if (!out.has_grad()) return;
            const S* g = out.grad();
            if (bias.requires_grad()) {
                bias.ensure_grad();
                for (int i = 0; i < m; ++i) bias.grad()[i] += g[i];
            }
            if (weight.requires_grad()) {
                weight.ensure_grad();
                for (int i = 0; i < m; ++i) {
                    S* wgrow = weight.grad() + static_cast<std::size_t>(i) * n;
                    const S gi = g[i];
                    for (int j = 0; j < n; ++j) wgrow[j] += gi * input.data()[j];
                }
            }
            if (input.requires_grad()) {
                input.ensure_grad();
                for (int i = 0; i < m; ++i) {
                    const S* wrow = weight.data() + static_cast<std::size_t>(i) * n;
                    const S gi = g[i];
                    for (int j = 0; j < n; ++j) input.grad()[j] += gi * wrow[j];
                }
            }
        });
    }
    return out;
}

/// Adds bias(m) to every column of M(m x n).
template <typename S>
TensorT<S> add_col_bias(TensorT<S> m_in, TensorT<S> bias, TapeT<S>* tape) {
    if (m_in.rank() != 2 || bias.rank() != 1 || m_in.dim(0) != static_cast<int>(bias.size()))
        throw DimensionError(cat("add_col_bias: incompatible shapes ", shape_str(m_in.shape()),
                                 " and ", shape_str(bias.shape())));
    const int rows = m_in.dim(0), cols = m_in.dim(1);
    TensorT<S> out(m_in.shape());
    for (int i = 0; i < rows; ++i) {
        const S bv = bias.data()[i];
        const S* src = m_in.data() + static_cast<std::size_t>(i) * cols;
        S* dst = out.data() + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) dst[j] = src[j] + bv;
    }
    if (detail::want_grad(tape, {&m_in, &bias})) {
        out.set_requires_grad(true);
        tape->record([m_in, bias, out, rows, cols]() mutable {
            if (!out.has_grad()) return;
            const S* g = out.grad();
            if (m_in.requires_grad()) {
                m_in.ensure_grad();
                for (std::size_t i = 0; i < m_in.size(); ++i) m_in.grad()[i] += g[i];
            }
            if (bias.requires_grad()) {
                bias.ensure_grad();
                for (int i = 0; i < rows; ++i) {
                    S acc = S(0);
                    for (int j = 0; j < cols; ++j) acc += g[static_cast<std::size_t>(i) * cols + j];
                    bias.grad()[i] += acc;
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Convolution and pooling
// ---------------------------------------------------------------------------

namespace detail {

// col is (C_in*kh*kw) x (H*W); zero padding keeps output spatial dims equal
// to the input's.
template <typename S>
void im2col_same(const S* in, int c_in, int h, int w, int kh, int kw, S* col) {
    const int ph = kh / 2, pw = kw / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::size_t r = 0;
    for (int ci = 0; ci < c_in; ++ci) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx, ++r) {
                S* dst = col + r * plane;
                const int dy = ky - ph, dx = kx - pw;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy;
                    S* drow = dst + static_cast<std::size_t>(y) * w;
                    if (sy < 0 || sy >= h) {
                        std::fill(drow, drow + w, S(0));
                        continue;
                    }
                    const S* srow = in + ci * plane + static_cast<std::size_t>(sy) * w;
                    for (int x = 0; x < w; ++x) {
                        const int sx = x + dx;
                        drow[x] = (sx < 0 || sx >= w) ? S(0) : srow[sx];
                    }
                }
            }
        }
    }
}

template <typename S>
void col2im_same_add(const S* col, int c_in, int h, int w, int kh, int kw, S* din) {
    const int ph = kh / 2, pw = kw / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::size_t r = 0;
    for (int ci = 0; ci < c_in; ++ci) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx, ++r) {
                const S* src = col + r * plane;
                const int dy = ky - ph, dx = kx - pw;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= h) continue;
                    S* drow = din + ci * plane + static_cast<std::size_t>(sy) * w;
                    const S* srow = src + static_cast<std::size_t>(y) * w;
                    for (int x = 0; x < w; ++x) {
                        const int sx = x + dx;
                        if (sx >= 0 && sx < w) drow[sx] += srow[x];
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// Same-padding stride-1 convolution, im2col + matrix multiply.
/// input C_in x H x W, kernel C_out x C_in x kh x kw (kh, kw odd), bias C_out.
template <typename S>
TensorT<S> conv2d_same(TensorT<S> input, TensorT<S> kernel, TensorT<S> bias,
                       TapeT<S>* tape) {
    if (input.rank() != 3 || kernel.rank() != 4 || bias.rank() != 1)
        throw DimensionError(cat("conv2d_same: need input rank 3, kernel rank 4, bias rank 1, got ",
                                 shape_str(input.shape()), " ", shape_str(kernel.shape()), " ",
                                 shape_str(bias.shape())));
    const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int c_out = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    if (kernel.dim(1) != c_in)
        throw DimensionError(cat("conv2d_same: input channels ", c_in, " vs kernel expects ",
                                 kernel.dim(1)));
    if (bias.dim(0) != c_out)
        throw DimensionError(cat("conv2d_same: bias length ", bias.dim(0), " vs ", c_out,
                                 " output channels"));
    if (kh % 2 == 0 || kw % 2 == 0)
        throw DimensionError("conv2d_same: kernel spatial dims must be odd");

    const int k = c_in * kh * kw;
    const int hw = h * w;
    std::vector<S> col(static_cast<std::size_t>(k) * hw);
    detail::im2col_same(input.data(), c_in, h, w, kh, kw, col.data());

    TensorT<S> out(Shape{c_out, h, w});
    for (int co = 0; co < c_out; ++co)
        std::fill(out.data() + static_cast<std::size_t>(co) * hw,
                  out.data() + static_cast<std::size_t>(co + 1) * hw, bias.data()[co]);
    detail::gemm_nn(c_out, hw, k, kernel.data(), col.data(), out.data());

    if (detail::want_grad(tape, {&input, &kernel, &bias})) {
        out.set_requires_grad(true);
        tape->record([input, kernel, bias, out, col = std::move(col), c_in, h, w, kh, kw, c_out, k,
                      hw]() mutable {
            if (!out.has_grad()) return;
            const S* g = out.grad();
            if (bias.requires_grad()) {
                bias.ensure_grad();
                for (int co = 0; co < c_out; ++co) {
                    S acc = S(0);
                    const S* grow = g + static_cast<std::size_t>(co) * hw;
                    for (int j = 0; j < hw; ++j) acc += grow[j];
                    bias.grad()[co] += acc;
                }
            }
            if (kernel.requires_grad()) {
                kernel.ensure_grad();
                detail::gemm_nt(c_out, k, hw, g, col.data(), kernel.grad());
            }
            if (input.requires_grad()) {
                input.ensure_grad();
                std::vector<S> dcol(static_cast<std::size_t>(k) * hw, S(0));
                detail::gemm_tn(k, hw, c_out, kernel.data(), g, dcol.data());
                detail::col2im_same_add(dcol.data(), c_in, h, w, kh, kw, input.grad());
            }
        });
    }
    return out;
}

/// Non-overlapping max pooling; trailing remainder rows/cols are dropped.
/// Backward routes each cell's gradient to the first max in row-major order.
template <typename S>
TensorT<S> maxpool2d(TensorT<S> input, int pool_h, int pool_w, TapeT<S>* tape) {
    if (input.rank() != 3)
        throw DimensionError(cat("maxpool2d: need rank-3 input, got ", shape_str(input.shape())));
    if (pool_h < 1 || pool_w < 1) throw DimensionError("maxpool2d: pool dims must be >= 1");
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (pool_h > h || pool_w > w)
        throw DimensionError(cat("maxpool2d: pool ", pool_h, "x", pool_w, " exceeds input ",
                                 shape_str(input.shape())));
    const int oh = h / pool_h, ow = w / pool_w;
    TensorT<S> out(Shape{c, oh, ow});
    std::vector<std::size_t> argmax(static_cast<std::size_t>(c) * oh * ow);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::size_t oi = 0;
    for (int ci = 0; ci < c; ++ci) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x, ++oi) {
                S best{};
                std::size_t best_idx = 0;
                bool first = true;
                for (int dy = 0; dy < pool_h; ++dy) {
                    const S* row = input.data() + ci * plane +
                                   static_cast<std::size_t>(y * pool_h + dy) * w + x * pool_w;
                    for (int dx = 0; dx < pool_w; ++dx) {
                        const S v = row[dx];
                        if (first || v > best) {
                            best = v;
                            best_idx = ci * plane + static_cast<std::size_t>(y * pool_h + dy) * w +
                                       static_cast<std::size_t>(x * pool_w + dx);
                            first = false;
                        }
                    }
                }
                out.data()[oi] = best;
                argmax[oi] = best_idx;
            }
        }
    }
    if (detail::want_grad(tape, {&input})) {
        out.set_requires_grad(true);
        tape->record([input, out, argmax = std::move(argmax)]() mutable {
            if (!out.has_grad() || !input.requires_grad()) return;
            input.ensure_grad();
            for (std::size_t i = 0; i < out.size(); ++i) input.grad()[argmax[i]] += out.grad()[i];
        });
    }
    return out;
}

/// Per-channel mean over the spatial plane: C x H x W -> C.
template <typename S>
TensorT<S> global_avg_pool(TensorT<S> input, TapeT<S>* tape) {
    if (input.rank() != 3)
        throw DimensionError(cat("global_avg_pool: need rank-3 input, got ",
                                 shape_str(input.shape())));
    const int c = input.dim(0);
    const std::size_t plane = static_cast<std::size_t>(input.dim(1)) * input.dim(2);
    TensorT<S> out(Shape{c});
    for (int ci = 0; ci < c; ++ci) {
        S acc = S(0);
        const S* src = input.data() + ci * plane;
        for (std::size_t j = 0; j < plane; ++j) acc += src[j];
        out.data()[ci] = acc / static_cast<S>(plane);
    }
    if (detail::want_grad(tape, {&input})) {
        out.set_requires_grad(true);
        tape->record([input, out, c, plane]() mutable {
            if (!out.has_grad() || !input.requires_grad()) return;
            input.ensure_grad();
            for (int ci = 0; ci < c; ++ci) {
                const S g = out.grad()[ci] / static_cast<S>(plane);
                S* dst = input.grad() + ci * plane;
                for (std::size_t j = 0; j < plane; ++j) dst[j] += g;
            }
        });
    }
    return out;
}

}  // namespace aedf
