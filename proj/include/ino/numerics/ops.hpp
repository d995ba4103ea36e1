#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ino/numerics/tensor.hpp"

// Differentiable kernels. Each forward has a matching reverse-mode rule.
// Matrix kernels take rank-2 tensors; "row" kernels treat the last axis as
// the row and every leading axis as a batch of rows.

namespace ino {

/// Log clamp used by cross_entropy_rows.
inline constexpr double kLogClampEps = 1e-12;
/// Variance floor inside layer_norm.
inline constexpr double kLayerNormEps = 1e-5;
/// Row norms at or below this are rejected by l2_normalize_rows.
inline constexpr double kNormEps = 1e-12;

namespace detail {

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (a != b) throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

inline void require_rank(const Shape& a, std::size_t r, const char* op) {
    if (a.size() != r) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(r) + ", got " + shape_str(a));
    }
}

template <class T>
void require_finite(const Tensor<T>& t, const char* op) {
    auto d = t.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!std::isfinite(d[i])) {
            throw NumericError(std::string(op) + ": non-finite value in tensor '" +
                               (t.label().empty() ? std::string("<unnamed>") : t.label()) + "' " +
                               shape_str(t.shape()) + " at flat index " + std::to_string(i));
        }
    }
}

template <class T>
std::size_t row_len(const Tensor<T>& t) {
    return t.shape().back();
}

template <class T>
Tensor<T> elementwise_binary(const Tensor<T>& a, const Tensor<T>& b, const char* op, int kind) {
    require_same_shape(a.shape(), b.shape(), op);
    auto x = a.data();
    auto y = b.data();
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = kind == 0 ? x[i] + y[i] : kind == 1 ? x[i] - y[i] : x[i] * y[i];
    }
    return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, [kind](Node<T>& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        const auto& g = n.grad;
        if (pa.requires_grad) {
            auto& ga = pa.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += kind == 2 ? g[i] * pb.data[i] : g[i];
        }
        if (pb.requires_grad) {
            auto& gb = pb.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                gb[i] += kind == 0 ? g[i] : kind == 1 ? -g[i] : g[i] * pa.data[i];
            }
        }
    });
}

}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::elementwise_binary(a, b, "add", 0);
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::elementwise_binary(a, b, "sub", 1);
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::elementwise_binary(a, b, "mul", 2);
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    std::vector<T> out(a.data().begin(), a.data().end());
    for (auto& v : out) v *= s;
    return Tensor<T>::make_result(a.shape(), std::move(out), {a}, [s](detail::Node<T>& n) {
        auto& g = n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * n.grad[i];
    });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
    std::vector<T> out(a.data().begin(), a.data().end());
    for (auto& v : out) v += s;
    return Tensor<T>::make_result(a.shape(), std::move(out), {a}, [](detail::Node<T>& n) {
        auto& g = n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    });
}

/// Sum of equally shaped tensors.
template <class T>
Tensor<T> add_n(const std::vector<Tensor<T>>& xs) {
    if (xs.empty()) throw ShapeError("add_n: empty input list");
    std::vector<T> out(xs[0].data().begin(), xs[0].data().end());
    for (std::size_t k = 1; k < xs.size(); ++k) {
        detail::require_same_shape(xs[0].shape(), xs[k].shape(), "add_n");
        auto d = xs[k].data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
    }
    return Tensor<T>::make_result(xs[0].shape(), std::move(out), xs, [](detail::Node<T>& n) {
        for (auto& p : n.parents) {
            if (!p->requires_grad) continue;
            auto& g = p->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
    });
}

/// x[..., d] + v[d] (v may also be [1, d]).
template <class T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
    const std::size_t d = detail::row_len(x);
    if (v.numel() != d) throw ShapeError("add_rowvec: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(v.shape()));
    std::vector<T> out(x.data().begin(), x.data().end());
    auto vd = v.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vd[i % d];
    return Tensor<T>::make_result(x.shape(), std::move(out), {x, v}, [d](detail::Node<T>& n) {
        auto& px = *n.parents[0];
        auto& pv = *n.parents[1];
        if (px.requires_grad) {
            auto& g = px.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
        if (pv.requires_grad) {
            auto& g = pv.ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) g[i % d] += n.grad[i];
        }
    });
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_rank(a.shape(), 2, "matmul");
    detail::require_rank(b.shape(), 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
    if (b.dim(0) != k) throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<T> out(m * p, T(0));
    const T* A = a.data().data();
    const T* B = b.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        T* row = out.data() + i * p;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T aik = A[i * k + kk];
            const T* brow = B + kk * p;
            for (std::size_t j = 0; j < p; ++j) row[j] += aik * brow[j];
        }
    }
    return Tensor<T>::make_result({m, p}, std::move(out), {a, b}, [m, k, p](detail::Node<T>& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        const T* G = n.grad.data();
        if (pa.requires_grad) {
            auto& ga = pa.ensure_grad();
            const T* B = pb.data.data();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t kk = 0; kk < k; ++kk) {
                    T acc = 0;
                    const T* grow = G + i * p;
                    const T* brow = B + kk * p;
                    for (std::size_t j = 0; j < p; ++j) acc += grow[j] * brow[j];
                    ga[i * k + kk] += acc;
                }
            }
        }
        if (pb.requires_grad) {
            auto& gb = pb.ensure_grad();
            const T* A = pa.data.data();
            for (std::size_t i = 0; i < m; ++i) {
                const T* grow = G + i * p;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const T aik = A[i * k + kk];
                    T* gbrow = gb.data() + kk * p;
                    for (std::size_t j = 0; j < p; ++j) gbrow[j] += aik * grow[j];
                }
            }
        }
    });
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
    detail::require_rank(a.shape(), 2, "transpose");
    const std::size_t m = a.dim(0), n = a.dim(1);
    std::vector<T> out(m * n);
    auto d = a.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = d[i * n + j];
    return Tensor<T>::make_result({n, m}, std::move(out), {a}, [m, n](detail::Node<T>& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += nd.grad[j * m + i];
    });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ShapeError("reshape: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(shape));
    }
    std::vector<T> out(a.data().begin(), a.data().end());
    return Tensor<T>::make_result(std::move(shape), std::move(out), {a}, [](detail::Node<T>& n) {
        auto& g = n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    });
}

/// Exact (erf) GELU.
template <class T>
Tensor<T> gelu(const Tensor<T>& a) {
    std::vector<T> out(a.numel());
    auto d = a.data();
    const T inv_sqrt2 = T(1) / std::sqrt(T(2));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(0.5) * d[i] * (T(1) + std::erf(d[i] * inv_sqrt2));
    return Tensor<T>::make_result(a.shape(), std::move(out), {a}, [inv_sqrt2](detail::Node<T>& n) {
        auto& p = *n.parents[0];
        auto& g = p.ensure_grad();
        const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T x = p.data[i];
            const T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
            const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * x * x);
            g[i] += n.grad[i] * (cdf + x * pdf);
        }
    });
}

/// Row-wise layer normalization with affine gain and bias.
/// A zero-variance row maps to the bias (normalized part is exactly zero).
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias) {
    const std::size_t d = detail::row_len(x);
    if (gain.numel() != d || bias.numel() != d) {
        throw ShapeError("layer_norm: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(gain.shape()) +
                         "/" + shape_str(bias.shape()));
    }
    const std::size_t rows = x.numel() / d;
    auto xd = x.data();
    auto gd = gain.data();
    auto bd = bias.data();
    std::vector<T> xhat(x.numel()), rstd(rows), out(x.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* row = xd.data() + r * d;
        T mean = 0;
        for (std::size_t j = 0; j < d; ++j) mean += row[j];
        mean /= T(d);
        T var = 0;
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= T(d);
        rstd[r] = T(1) / std::sqrt(var + T(kLayerNormEps));
        for (std::size_t j = 0; j < d; ++j) {
            xhat[r * d + j] = (row[j] - mean) * rstd[r];
            out[r * d + j] = xhat[r * d + j] * gd[j] + bd[j];
        }
    }
    return Tensor<T>::make_result(
        x.shape(), std::move(out), {x, gain, bias},
        [d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](detail::Node<T>& n) {
            auto& px = *n.parents[0];
            auto& pg = *n.parents[1];
            auto& pb = *n.parents[2];
            const T* G = n.grad.data();
            if (pg.requires_grad) {
                auto& gg = pg.ensure_grad();
                for (std::size_t i = 0; i < rows * d; ++i) gg[i % d] += G[i] * xhat[i];
            }
            if (pb.requires_grad) {
                auto& gb = pb.ensure_grad();
                for (std::size_t i = 0; i < rows * d; ++i) gb[i % d] += G[i];
            }
            if (px.requires_grad) {
                auto& gx = px.ensure_grad();
                for (std::size_t r = 0; r < rows; ++r) {
                    T m1 = 0, m2 = 0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const T dxh = G[r * d + j] * pg.data[j];
                        m1 += dxh;
                        m2 += dxh * xhat[r * d + j];
                    }
                    m1 /= T(d);
                    m2 /= T(d);
                    for (std::size_t j = 0; j < d; ++j) {
                        const T dxh = G[r * d + j] * pg.data[j];
                        gx[r * d + j] += rstd[r] * (dxh - m1 - xhat[r * d + j] * m2);
                    }
                }
            }
        });
}

/// softmax(x / temperature) along `axis`, stabilized by max subtraction.
template <class T>
Tensor<T> softmax_t(const Tensor<T>& x, std::size_t axis, T temperature) {
    if (!(temperature > T(0))) throw std::invalid_argument("softmax_t: temperature must be positive");
    if (axis >= x.rank()) throw ShapeError("softmax_t: axis " + std::to_string(axis) + " invalid for " + shape_str(x.shape()));
    detail::require_finite(x, "softmax_t");
    const auto& s = x.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t len = s[axis];
    auto xd = x.data();
    std::vector<T> out(x.numel());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            T mx = -std::numeric_limits<T>::infinity();
            for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, xd[base + j * inner]);
            T sum = 0;
            for (std::size_t j = 0; j < len; ++j) {
                const T e = std::exp((xd[base + j * inner] - mx) / temperature);
                out[base + j * inner] = e;
                sum += e;
            }
            for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= sum;
        }
    }
    return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [outer, inner, len, temperature](detail::Node<T>& n) {
        auto& g = n.parents[0]->ensure_grad();
        // n.data holds y; dx = y * (dy - <dy, y>) / temperature
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = o * len * inner + in;
                T dot = 0;
                for (std::size_t j = 0; j < len; ++j) dot += n.grad[base + j * inner] * n.data[base + j * inner];
                for (std::size_t j = 0; j < len; ++j) {
                    const std::size_t i = base + j * inner;
                    g[i] += n.data[i] * (n.grad[i] - dot) / temperature;
                }
            }
        }
    });
}

/// Mean over rows of -sum(target * log(max(prediction, 1e-12))).
template <class T>
Tensor<T> cross_entropy_rows(const Tensor<T>& target, const Tensor<T>& prediction) {
    detail::require_same_shape(target.shape(), prediction.shape(), "cross_entropy_rows");
    const std::size_t c = detail::row_len(target);
    const std::size_t rows = target.numel() / c;
    auto t = target.data();
    auto p = prediction.data();
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < T(0) || p[i] < T(0)) {
            throw std::invalid_argument("cross_entropy_rows: negative entry at flat index " + std::to_string(i));
        }
    }
    const T eps = T(kLogClampEps);
    T total = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        T row = 0;
        for (std::size_t j = 0; j < c; ++j) row -= t[r * c + j] * std::log(std::max(p[r * c + j], eps));
        total += row;
    }
    total /= T(rows);
    return Tensor<T>::make_result({1}, {total}, {target, prediction}, [rows, eps](detail::Node<T>& n) {
        auto& pt = *n.parents[0];
        auto& pp = *n.parents[1];
        const T g = n.grad[0] / T(rows);
        if (pt.requires_grad) {
            auto& gt = pt.ensure_grad();
            for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= g * std::log(std::max(pp.data[i], eps));
        }
        if (pp.requires_grad) {
            auto& gp = pp.ensure_grad();
            for (std::size_t i = 0; i < gp.size(); ++i) {
                if (pp.data[i] > eps) gp[i] -= g * pt.data[i] / pp.data[i];
            }
        }
    });
}

/// Scales every last-axis vector to unit Euclidean norm.
template <class T>
Tensor<T> l2_normalize_rows(const Tensor<T>& x) {
    const std::size_t d = detail::row_len(x);
    const std::size_t rows = x.numel() / d;
    auto xd = x.data();
    std::vector<T> out(x.numel()), norms(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        T ss = 0;
        for (std::size_t j = 0; j < d; ++j) ss += xd[r * d + j] * xd[r * d + j];
        const T nrm = std::sqrt(ss);
        if (!(nrm > T(kNormEps))) {
            throw NumericError("l2_normalize_rows: row " + std::to_string(r) + " has near-zero norm");
        }
        norms[r] = nrm;
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] = xd[r * d + j] / nrm;
    }
    return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [d, rows, norms = std::move(norms)](detail::Node<T>& n) {
        auto& g = n.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            T dot = 0;
            for (std::size_t j = 0; j < d; ++j) dot += n.grad[r * d + j] * n.data[r * d + j];
            for (std::size_t j = 0; j < d; ++j) {
                g[r * d + j] += (n.grad[r * d + j] - n.data[r * d + j] * dot) / norms[r];
            }
        }
    });
}

/// Rows of x[n, d] at the given indices, in order (repeats allowed).
template <class T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> idx) {
    detail::require_rank(x.shape(), 2, "gather_rows");
    const std::size_t n = x.dim(0), d = x.dim(1);
    std::vector<std::size_t> index(idx.begin(), idx.end());
    std::vector<T> out(index.size() * d);
    auto xd = x.data();
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (index[r] >= n) throw ShapeError("gather_rows: index " + std::to_string(index[r]) + " out of range for " + shape_str(x.shape()));
        std::copy_n(xd.data() + index[r] * d, d, out.data() + r * d);
    }
    const std::size_t rows = index.size();
    return Tensor<T>::make_result({rows, d}, std::move(out), {x}, [d, index = std::move(index)](detail::Node<T>& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < index.size(); ++r)
            for (std::size_t j = 0; j < d; ++j) g[index[r] * d + j] += nd.grad[r * d + j];
    });
}

template <class T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t start, std::size_t count) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), start);
    return gather_rows(x, idx);
}

/// Vertical concatenation of rank-2 tensors with equal column counts.
template <class T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& xs) {
    if (xs.empty()) throw ShapeError("concat_rows: empty input list");
    const std::size_t d = xs[0].dim(1);
    std::size_t rows = 0;
    for (auto& t : xs) {
        detail::require_rank(t.shape(), 2, "concat_rows");
        if (t.dim(1) != d) throw ShapeError("concat_rows: shape mismatch " + shape_str(xs[0].shape()) + " vs " + shape_str(t.shape()));
        rows += t.dim(0);
    }
    std::vector<T> out;
    out.reserve(rows * d);
    for (auto& t : xs) out.insert(out.end(), t.data().begin(), t.data().end());
    return Tensor<T>::make_result({rows, d}, std::move(out), xs, [](detail::Node<T>& n) {
        std::size_t off = 0;
        for (auto& p : n.parents) {
            const std::size_t len = p->data.size();
            if (p->requires_grad) {
                auto& g = p->ensure_grad();
                for (std::size_t i = 0; i < len; ++i) g[i] += n.grad[off + i];
            }
            off += len;
        }
    });
}

/// Columns [start, start + count) of x[n, d].
template <class T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t start, std::size_t count) {
    detail::require_rank(x.shape(), 2, "slice_cols");
    const std::size_t n = x.dim(0), d = x.dim(1);
    if (start + count > d || count == 0) {
        throw ShapeError("slice_cols: columns [" + std::to_string(start) + "," + std::to_string(start + count) +
                         ") out of range for " + shape_str(x.shape()));
    }
    std::vector<T> out(n * count);
    auto xd = x.data();
    for (std::size_t r = 0; r < n; ++r) std::copy_n(xd.data() + r * d + start, count, out.data() + r * count);
    return Tensor<T>::make_result({n, count}, std::move(out), {x}, [n, d, start, count](detail::Node<T>& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < count; ++j) g[r * d + start + j] += nd.grad[r * count + j];
    });
}

template <class T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& xs) {
    if (xs.empty()) throw ShapeError("concat_cols: empty input list");
    const std::size_t n = xs[0].dim(0);
    std::size_t d = 0;
    for (auto& t : xs) {
        detail::require_rank(t.shape(), 2, "concat_cols");
        if (t.dim(0) != n) throw ShapeError("concat_cols: shape mismatch " + shape_str(xs[0].shape()) + " vs " + shape_str(t.shape()));
        d += t.dim(1);
    }
    std::vector<T> out(n * d);
    std::size_t off = 0;
    for (auto& t : xs) {
        const std::size_t w = t.dim(1);
        auto td = t.data();
        for (std::size_t r = 0; r < n; ++r) std::copy_n(td.data() + r * w, w, out.data() + r * d + off);
        off += w;
    }
    return Tensor<T>::make_result({n, d}, std::move(out), xs, [n, d](detail::Node<T>& nd) {
        std::size_t off = 0;
        for (auto& p : nd.parents) {
            const std::size_t w = p->shape[1];
            if (p->requires_grad) {
                auto& g = p->ensure_grad();
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t j = 0; j < w; ++j) g[r * w + j] += nd.grad[r * d + off + j];
            }
            off += w;
        }
    });
}

/// Row r of the result is if_true[r] where mask[r] is set, else if_false[r].
template <class T>
Tensor<T> select_rows(std::span<const std::uint8_t> mask, const Tensor<T>& if_true, const Tensor<T>& if_false) {
    detail::require_same_shape(if_true.shape(), if_false.shape(), "select_rows");
    detail::require_rank(if_true.shape(), 2, "select_rows");
    const std::size_t n = if_true.dim(0), d = if_true.dim(1);
    if (mask.size() != n) {
        throw ShapeError("select_rows: mask length " + std::to_string(mask.size()) + " vs " + shape_str(if_true.shape()));
    }
    std::vector<std::uint8_t> m(mask.begin(), mask.end());
    std::vector<T> out(n * d);
    auto a = if_true.data();
    auto b = if_false.data();
    for (std::size_t r = 0; r < n; ++r) std::copy_n((m[r] ? a : b).data() + r * d, d, out.data() + r * d);
    return Tensor<T>::make_result({n, d}, std::move(out), {if_true, if_false}, [n, d, m = std::move(m)](detail::Node<T>& nd) {
        for (int side = 0; side < 2; ++side) {
            auto& p = *nd.parents[side];
            if (!p.requires_grad) continue;
            auto& g = p.ensure_grad();
            for (std::size_t r = 0; r < n; ++r) {
                if ((m[r] != 0) != (side == 0)) continue;
                for (std::size_t j = 0; j < d; ++j) g[r * d + j] += nd.grad[r * d + j];
            }
        }
    });
}

/// Stacks `count` copies of a d-vector into [count, d].
template <class T>
Tensor<T> repeat_rows(const Tensor<T>& v, std::size_t count) {
    const std::size_t d = v.numel();
    std::vector<T> out(count * d);
    for (std::size_t r = 0; r < count; ++r) std::copy(v.data().begin(), v.data().end(), out.begin() + r * d);
    return Tensor<T>::make_result({count, d}, std::move(out), {v}, [count, d](detail::Node<T>& n) {
        auto& g = n.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < count * d; ++i) g[i % d] += n.grad[i];
    });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
    T s = 0;
    for (T v : x.data()) s += v;
    return Tensor<T>::make_result({1}, {s}, {x}, [](detail::Node<T>& n) {
        auto& g = n.parents[0]->ensure_grad();
        for (auto& v : g) v += n.grad[0];
    });
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
    return scale(sum(x), T(1) / T(x.numel()));
}

/// Column means of x[n, d] as [1, d].
template <class T>
Tensor<T> mean_rows(const Tensor<T>& x) {
    detail::require_rank(x.shape(), 2, "mean_rows");
    const std::size_t n = x.dim(0), d = x.dim(1);
    std::vector<T> out(d, T(0));
    auto xd = x.data();
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j) out[j] += xd[r * d + j];
    for (auto& v : out) v /= T(n);
    return Tensor<T>::make_result({1, d}, std::move(out), {x}, [n, d](detail::Node<T>& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < d; ++j) g[r * d + j] += nd.grad[j] / T(n);
    });
}

/// x[n, in] * w[in, out] + b[out].
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    return add_rowvec(matmul(x, w), b);
}

}  // namespace ino
