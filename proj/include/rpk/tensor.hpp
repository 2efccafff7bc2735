#ifndef RPK_TENSOR_HPP
#define RPK_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "rpk/common.hpp"

namespace rpk {

// Dimension convention: activations are (batch, channels, length); conv
// weights (out_ch, in_ch, kernel); transpose-conv weights (in_ch, out_ch,
// kernel); per-channel parameters (1, channels, 1); scalars (1, 1, 1).
struct Shape {
    int64_t d0 = 1, d1 = 1, d2 = 1;
    Shape() = default;
    Shape(int64_t a, int64_t b, int64_t c) : d0(a), d1(b), d2(c) {}
    int64_t numel() const { return d0 * d1 * d2; }
    bool operator==(const Shape& o) const { return d0 == o.d0 && d1 == o.d1 && d2 == o.d2; }
    bool operator!=(const Shape& o) const { return !(*this == o); }
    std::string str() const {
        return "(" + std::to_string(d0) + "," + std::to_string(d1) + "," + std::to_string(d2) + ")";
    }
};

namespace autodiff {

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void()> backprop;  // accumulates this->grad into parents
};

inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

// Disables graph recording in scope; forward passes become plain numerics.
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode_flag()) { grad_mode_flag() = false; }
    ~NoGradGuard() { grad_mode_flag() = prev; }
};

inline void ensure_grad(TensorNode* n) {
    if (n->grad.size() != n->value.size()) n->grad.assign(n->value.size(), 0.0);
}

}  // namespace autodiff

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape s, bool requires_grad = false) {
        Tensor t;
        t.node_ = std::make_shared<autodiff::TensorNode>();
        t.node_->shape = s;
        t.node_->value.assign(static_cast<size_t>(s.numel()), 0.0);
        t.node_->requires_grad = requires_grad;
        return t;
    }

    static Tensor from_values(Shape s, std::vector<double> v, bool requires_grad = false) {
        if (static_cast<int64_t>(v.size()) != s.numel())
            throw ShapeError("Tensor::from_values: " + std::to_string(v.size()) + " values for shape " + s.str());
        Tensor t = zeros(s, requires_grad);
        t.node_->value = std::move(v);
        return t;
    }

    static Tensor scalar(double v) { return from_values(Shape{1, 1, 1}, {v}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int64_t numel() const { return node_->shape.numel(); }
    bool requires_grad() const { return node_->requires_grad; }

    const std::vector<double>& values() const { return node_->value; }
    // In-place access; intended for leaves (parameter updates, input staging).
    std::vector<double>& values_mut() { return node_->value; }

    double at(int64_t b, int64_t c, int64_t l) const {
        const Shape& s = node_->shape;
        return node_->value[static_cast<size_t>((b * s.d1 + c) * s.d2 + l)];
    }

    bool has_grad() const { return node_->grad.size() == node_->value.size(); }
    const std::vector<double>& grad() const {
        if (!has_grad()) throw UsageError("Tensor::grad: no gradient accumulated");
        return node_->grad;
    }
    void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

    double item() const {
        if (numel() != 1) throw UsageError("Tensor::item: tensor is not scalar");
        return node_->value[0];
    }

    // Reverse-mode accumulation from a scalar. Intermediate gradients are
    // reset per call; leaf gradients accumulate until zero_grad().
    void backward() const {
        if (numel() != 1) throw UsageError("backward: loss must be scalar");
        using autodiff::TensorNode;
        std::vector<TensorNode*> topo;
        std::unordered_set<TensorNode*> visited;
        struct Frame {
            TensorNode* n;
            size_t next_parent;
        };
        std::vector<Frame> stack{{node_.get(), 0}};
        visited.insert(node_.get());
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next_parent < f.n->parents.size()) {
                TensorNode* p = f.n->parents[f.next_parent++].get();
                if (visited.insert(p).second) stack.push_back({p, 0});
            } else {
                topo.push_back(f.n);
                stack.pop_back();
            }
        }
        for (TensorNode* n : topo)
            if (!n->parents.empty()) n->grad.assign(n->value.size(), 0.0);
        autodiff::ensure_grad(node_.get());
        node_->grad[0] += 1.0;
        for (auto it = topo.rbegin(); it != topo.rend(); ++it)
            if ((*it)->backprop) (*it)->backprop();
    }

    std::shared_ptr<autodiff::TensorNode> node() const { return node_; }

private:
    std::shared_ptr<autodiff::TensorNode> node_;
    friend Tensor make_op_node(Shape, std::vector<Tensor>);
};

inline Tensor make_op_node(Shape s, std::vector<Tensor> inputs) {
    bool rec = autodiff::grad_mode_flag();
    bool any_req = false;
    for (const auto& in : inputs) any_req = any_req || in.requires_grad();
    Tensor out = Tensor::zeros(s, rec && any_req);
    if (out.requires_grad())
        for (auto& in : inputs) out.node()->parents.push_back(in.node());
    return out;
}

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

namespace detail {

inline int64_t conv_out_len(int64_t L, int64_t k, int64_t stride, int64_t padding) {
    return (L + 2 * padding - k) / stride + 1;
}

// valid output range [t_lo, t_hi] such that t*stride - padding + k lands in [0, L)
inline void conv_tap_range(int64_t L, int64_t Lo, int64_t stride, int64_t padding, int64_t k, int64_t& t_lo,
                           int64_t& t_hi) {
    t_lo = padding > k ? (padding - k + stride - 1) / stride : 0;
    int64_t num = L - 1 + padding - k;
    t_hi = num < 0 ? -1 : std::min(Lo - 1, num / stride);
}

}  // namespace detail

// Cross-correlation with zero padding. x (B, Ci, L), w (Co, Ci, K), bias (1, Co, 1).
inline Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, int64_t stride, int64_t padding) {
    const Shape xs = x.shape(), ws = w.shape();
    if (xs.d1 != ws.d1)
        throw ShapeError("conv1d: input channels " + std::to_string(xs.d1) + " != weight in-channels " +
                         std::to_string(ws.d1));
    if (bias.shape() != Shape{1, ws.d0, 1}) throw ShapeError("conv1d: bias shape " + bias.shape().str());
    if (stride < 1 || padding < 0) throw ConfigError("conv1d: bad stride/padding");
    const int64_t B = xs.d0, Ci = xs.d1, L = xs.d2, Co = ws.d0, K = ws.d2;
    if (L + 2 * padding < K) throw ShapeError("conv1d: padded length below kernel size");
    const int64_t Lo = detail::conv_out_len(L, K, stride, padding);
    if (Lo < 1) throw ShapeError("conv1d: empty output");

    Tensor out = make_op_node(Shape{B, Co, Lo}, {x, w, bias});
    const double* xv = x.values().data();
    const double* wv = w.values().data();
    const double* bv = bias.values().data();
    double* yv = out.values_mut().data();
    parallel_for(B * Co, [&](int64_t lo, int64_t hi) {
        for (int64_t bc = lo; bc < hi; ++bc) {
            const int64_t b = bc / Co, o = bc % Co;
            double* yrow = yv + (b * Co + o) * Lo;
            for (int64_t t = 0; t < Lo; ++t) yrow[t] = bv[o];
            for (int64_t i = 0; i < Ci; ++i) {
                const double* xrow = xv + (b * Ci + i) * L;
                const double* wrow = wv + (o * Ci + i) * K;
                for (int64_t k = 0; k < K; ++k) {
                    int64_t t_lo, t_hi;
                    detail::conv_tap_range(L, Lo, stride, padding, k, t_lo, t_hi);
                    const double wk = wrow[k];
                    const int64_t off = k - padding;
                    for (int64_t t = t_lo; t <= t_hi; ++t) yrow[t] += wk * xrow[t * stride + off];
                }
            }
        }
    });

    if (out.requires_grad()) {
        auto* on = out.node().get();
        auto* xn = x.node().get();
        auto* wn = w.node().get();
        auto* bn = bias.node().get();
        on->backprop = [on, xn, wn, bn, B, Ci, Co, L, Lo, K, stride, padding]() {
            const double* gy = on->grad.data();
            if (xn->requires_grad || !xn->parents.empty()) {
                autodiff::ensure_grad(xn);
                double* gx = xn->grad.data();
                const double* wv2 = wn->value.data();
                parallel_for(B, [&](int64_t blo, int64_t bhi) {
                    for (int64_t b = blo; b < bhi; ++b)
                        for (int64_t o = 0; o < Co; ++o) {
                            const double* gyrow = gy + (b * Co + o) * Lo;
                            for (int64_t i = 0; i < Ci; ++i) {
                                double* gxrow = gx + (b * Ci + i) * L;
                                const double* wrow = wv2 + (o * Ci + i) * K;
                                for (int64_t k = 0; k < K; ++k) {
                                    int64_t t_lo, t_hi;
                                    detail::conv_tap_range(L, Lo, stride, padding, k, t_lo, t_hi);
                                    const double wk = wrow[k];
                                    const int64_t off = k - padding;
                                    for (int64_t t = t_lo; t <= t_hi; ++t) gxrow[t * stride + off] += wk * gyrow[t];
                                }
                            }
                        }
                });
            }
            if (wn->requires_grad) {
                autodiff::ensure_grad(wn);
                double* gw = wn->grad.data();
                const double* xv2 = xn->value.data();
                parallel_for(Co, [&](int64_t olo, int64_t ohi) {
                    for (int64_t o = olo; o < ohi; ++o)
                        for (int64_t b = 0; b < B; ++b) {
                            const double* gyrow = gy + (b * Co + o) * Lo;
                            for (int64_t i = 0; i < Ci; ++i) {
                                const double* xrow = xv2 + (b * Ci + i) * L;
                                double* gwrow = gw + (o * Ci + i) * K;
                                for (int64_t k = 0; k < K; ++k) {
                                    int64_t t_lo, t_hi;
                                    detail::conv_tap_range(L, Lo, stride, padding, k, t_lo, t_hi);
                                    const int64_t off = k - padding;
                                    double acc = 0.0;
                                    for (int64_t t = t_lo; t <= t_hi; ++t) acc += gyrow[t] * xrow[t * stride + off];
                                    gwrow[k] += acc;
                                }
                            }
                        }
                });
            }
            if (bn->requires_grad) {
                autodiff::ensure_grad(bn);
                double* gb = bn->grad.data();
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t o = 0; o < Co; ++o) {
                        const double* gyrow = gy + (b * Co + o) * Lo;
                        double acc = 0.0;
                        for (int64_t t = 0; t < Lo; ++t) acc += gyrow[t];
                        gb[o] += acc;
                    }
            }
        };
    }
    return out;
}

// Adjoint of conv1d under a shared spec. x (B, Ci, L), w (Ci, Co, K), bias (1, Co, 1).
inline Tensor conv1d_transpose(const Tensor& x, const Tensor& w, const Tensor& bias, int64_t stride, int64_t padding,
                               int64_t output_padding = 0) {
    const Shape xs = x.shape(), ws = w.shape();
    if (xs.d1 != ws.d0)
        throw ShapeError("conv1d_transpose: input channels " + std::to_string(xs.d1) + " != weight in-channels " +
                         std::to_string(ws.d0));
    if (bias.shape() != Shape{1, ws.d1, 1}) throw ShapeError("conv1d_transpose: bias shape " + bias.shape().str());
    if (stride < 1 || padding < 0 || output_padding < 0 || output_padding >= stride)
        throw ConfigError("conv1d_transpose: bad stride/padding");
    const int64_t B = xs.d0, Ci = xs.d1, L = xs.d2, Co = ws.d1, K = ws.d2;
    const int64_t Lo = (L - 1) * stride - 2 * padding + K + output_padding;
    if (Lo < 1) throw ShapeError("conv1d_transpose: computed output length " + std::to_string(Lo));

    Tensor out = make_op_node(Shape{B, Co, Lo}, {x, w, bias});
    const double* xv = x.values().data();
    const double* wv = w.values().data();
    const double* bv = bias.values().data();
    double* yv = out.values_mut().data();
    parallel_for(B, [&](int64_t blo, int64_t bhi) {
        for (int64_t b = blo; b < bhi; ++b) {
            for (int64_t o = 0; o < Co; ++o) {
                double* yrow = yv + (b * Co + o) * Lo;
                for (int64_t u = 0; u < Lo; ++u) yrow[u] = bv[o];
            }
            for (int64_t i = 0; i < Ci; ++i) {
                const double* xrow = xv + (b * Ci + i) * L;
                for (int64_t o = 0; o < Co; ++o) {
                    double* yrow = yv + (b * Co + o) * Lo;
                    const double* wrow = wv + (i * Co + o) * K;
                    for (int64_t k = 0; k < K; ++k) {
                        int64_t t_lo, t_hi;
                        detail::conv_tap_range(Lo, L, stride, padding, k, t_lo, t_hi);
                        const double wk = wrow[k];
                        const int64_t off = k - padding;
                        for (int64_t t = t_lo; t <= t_hi; ++t) yrow[t * stride + off] += wk * xrow[t];
                    }
                }
            }
        }
    });

    if (out.requires_grad()) {
        auto* on = out.node().get();
        auto* xn = x.node().get();
        auto* wn = w.node().get();
        auto* bn = bias.node().get();
        on->backprop = [on, xn, wn, bn, B, Ci, Co, L, Lo, K, stride, padding]() {
            const double* gy = on->grad.data();
            if (xn->requires_grad || !xn->parents.empty()) {
                autodiff::ensure_grad(xn);
                double* gx = xn->grad.data();
                const double* wv2 = wn->value.data();
                parallel_for(B, [&](int64_t blo, int64_t bhi) {
                    for (int64_t b = blo; b < bhi; ++b)
                        for (int64_t i = 0; i < Ci; ++i) {
                            double* gxrow = gx + (b * Ci + i) * L;
                            for (int64_t o = 0; o < Co; ++o) {
                                const double* gyrow = gy + (b * Co + o) * Lo;
                                const double* wrow = wv2 + (i * Co + o) * K;
                                for (int64_t k = 0; k < K; ++k) {
                                    int64_t t_lo, t_hi;
                                    detail::conv_tap_range(Lo, L, stride, padding, k, t_lo, t_hi);
                                    const double wk = wrow[k];
                                    const int64_t off = k - padding;
                                    for (int64_t t = t_lo; t <= t_hi; ++t) gxrow[t] += wk * gyrow[t * stride + off];
                                }
                            }
                        }
                });
            }
            if (wn->requires_grad) {
                autodiff::ensure_grad(wn);
                double* gw = wn->grad.data();
                const double* xv2 = xn->value.data();
                parallel_for(Ci, [&](int64_t ilo, int64_t ihi) {
                    for (int64_t i = ilo; i < ihi; ++i)
                        for (int64_t b = 0; b < B; ++b) {
                            const double* xrow = xv2 + (b * Ci + i) * L;
                            for (int64_t o = 0; o < Co; ++o) {
                                const double* gyrow = gy + (b * Co + o) * Lo;
                                double* gwrow = gw + (i * Co + o) * K;
                                for (int64_t k = 0; k < K; ++k) {
                                    int64_t t_lo, t_hi;
                                    detail::conv_tap_range(Lo, L, stride, padding, k, t_lo, t_hi);
                                    const int64_t off = k - padding;
                                    double acc = 0.0;
                                    for (int64_t t = t_lo; t <= t_hi; ++t) acc += xrow[t] * gyrow[t * stride + off];
                                    gwrow[k] += acc;
                                }
                            }
                        }
                });
            }
            if (bn->requires_grad) {
                autodiff::ensure_grad(bn);
                double* gb = bn->grad.data();
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t o = 0; o < Co; ++o) {
                        const double* gyrow = gy + (b * Co + o) * Lo;
                        double acc = 0.0;
                        for (int64_t u = 0; u < Lo; ++u) acc += gyrow[u];
                        gb[o] += acc;
                    }
            }
        };
    }
    return out;
}

inline Tensor leaky_relu(const Tensor& x, double slope = 0.2) {
    Tensor out = make_op_node(x.shape(), {x});
    const auto& xv = x.values();
    auto& yv = out.values_mut();
    for (size_t i = 0; i < xv.size(); ++i) yv[i] = xv[i] >= 0.0 ? xv[i] : slope * xv[i];
    if (out.requires_grad()) {
        auto* on = out.node().get();
        auto* xn = x.node().get();
        on->backprop = [on, xn, slope]() {
            autodiff::ensure_grad(xn);
            for (size_t i = 0; i < xn->value.size(); ++i)
                xn->grad[i] += on->grad[i] * (xn->value[i] >= 0.0 ? 1.0 : slope);
        };
    }
    return out;
}

inline Tensor sigmoid(const Tensor& x) {
    Tensor out = make_op_node(x.shape(), {x});
    const auto& xv = x.values();
    auto& yv = out.values_mut();
    for (size_t i = 0; i < xv.size(); ++i) yv[i] = 1.0 / (1.0 + std::exp(-xv[i]));
    if (out.requires_grad()) {
        auto* on = out.node().get();
        auto* xn = x.node().get();
        on->backprop = [on, xn]() {
            autodiff::ensure_grad(xn);
            for (size_t i = 0; i < xn->value.size(); ++i) {
                double y = on->value[i];
                xn->grad[i] += on->grad[i] * y * (1.0 - y);
            }
        };
    }
    return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    Tensor out = make_op_node(a.shape(), {a, b});
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& yv = out.values_mut();
    for (size_t i = 0; i < av.size(); ++i) yv[i] = av[i] + bv[i];
    if (out.requires_grad()) {
        auto* on = out.node().get();
        auto* an = a.node().get();
        auto* bn = b.node().get();
        on->backprop = [on, an, bn]() {
            if (an->requires_grad || !an->parents.empty()) {
                autodiff::ensure_grad(an);
                for (size_t i = 0; i < an->value.size(); ++i) an->grad[i] += on->grad[i];
            }
            if (bn->requires_grad || !bn->parents.empty()) {
                autodiff::ensure_grad(bn);
                for (size_t i = 0; i < bn->value.size(); ++i) bn->grad[i] += on->grad[i];
            }
        };
    }
    return out;
}

// a occupies the leading channels of the result.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const Shape as = a.shape(), bs = b.shape();
    if (as.d0 != bs.d0 || as.d2 != bs.d2)
        throw ShapeError("concat_channels: batch/length mismatch " + as.str() + " vs " + bs.str());
    const int64_t B = as.d0, Ca = as.d1, Cb = bs.d1, L = as.d2;
    Tensor out = make_op_node(Shape{B, Ca + Cb, L}, {a, b});
    const double* av = a.values().data();
    const double* bv = b.values().data();
    double* yv = out.values_mut().data();
    for (int64_t n = 0; n < B; ++n) {
        std::copy(av + n * Ca * L, av + (n + 1) * Ca * L, yv + n * (Ca + Cb) * L);
        std::copy(bv + n * Cb * L, bv + (n + 1) * Cb * L, yv + n * (Ca + Cb) * L + Ca * L);
    }
    if (out.requires_grad()) {
        auto* on = out.node().get();
        auto* an = a.node().get();
        auto* bn = b.node().get();
        on->backprop = [on, an, bn, B, Ca, Cb, L]() {
            const double* gy = on->grad.data();
            if (an->requires_grad || !an->parents.empty()) {
                autodiff::ensure_grad(an);
                double* ga = an->grad.data();
                for (int64_t n = 0; n < B; ++n)
                    for (int64_t i = 0; i < Ca * L; ++i) ga[n * Ca * L + i] += gy[n * (Ca + Cb) * L + i];
            }
            if (bn->requires_grad || !bn->parents.empty()) {
                autodiff::ensure_grad(bn);
                double* gb = bn->grad.data();
                for (int64_t n = 0; n < B; ++n)
                    for (int64_t i = 0; i < Cb * L; ++i) gb[n * Cb * L + i] += gy[n * (Ca + Cb) * L + Ca * L + i];
            }
        };
    }
    return out;
}

struct BatchNormState {
    Tensor gamma;  // (1, C, 1)
    Tensor beta;   // (1, C, 1)
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;  // running = (1-m)*running + m*batch
    double eps = 1e-5;
    bool training = true;

    static BatchNormState make(int64_t channels) {
        BatchNormState st;
        st.gamma = Tensor::from_values(Shape{1, channels, 1}, std::vector<double>(channels, 1.0), true);
        st.beta = Tensor::zeros(Shape{1, channels, 1}, true);
        st.running_mean.assign(channels, 0.0);
        st.running_var.assign(channels, 1.0);
        return st;
    }
    int64_t channels() const { return gamma.shape().d1; }
};

// Train mode normalizes by per-channel batch statistics (biased variance) and
// updates running stats (unbiased variance, PyTorch momentum convention).
// Eval mode normalizes by the running stats.
inline Tensor batch_norm(const Tensor& x, BatchNormState& st) {
    const Shape xs = x.shape();
    const int64_t B = xs.d0, C = xs.d1, L = xs.d2;
    if (C != st.channels())
        throw ShapeError("batch_norm: " + std::to_string(C) + " channels vs state " + std::to_string(st.channels()));
    const int64_t N = B * L;
    if (st.training && N <= 1) throw InputError("batch_norm: train mode needs batch*length > 1");

    Tensor out = make_op_node(xs, {x, st.gamma, st.beta});
    const double* xv = x.values().data();
    const double* gv = st.gamma.values().data();
    const double* bv = st.beta.values().data();
    double* yv = out.values_mut().data();

    std::vector<double> inv_std(static_cast<size_t>(C));
    std::vector<double> xhat;  // saved for backward
    bool need_xhat = out.requires_grad();
    if (need_xhat) xhat.resize(static_cast<size_t>(B * C * L));

    if (st.training) {
        for (int64_t c = 0; c < C; ++c) {
            double sum = 0.0;
            for (int64_t b = 0; b < B; ++b) {
                const double* row = xv + (b * C + c) * L;
                for (int64_t l = 0; l < L; ++l) sum += row[l];
            }
            double mean = sum / static_cast<double>(N);
            double sq = 0.0;
            for (int64_t b = 0; b < B; ++b) {
                const double* row = xv + (b * C + c) * L;
                for (int64_t l = 0; l < L; ++l) {
                    double d = row[l] - mean;
                    sq += d * d;
                }
            }
            double var = sq / static_cast<double>(N);
            double istd = 1.0 / std::sqrt(var + st.eps);
            inv_std[static_cast<size_t>(c)] = istd;
            for (int64_t b = 0; b < B; ++b) {
                const double* row = xv + (b * C + c) * L;
                double* yrow = yv + (b * C + c) * L;
                for (int64_t l = 0; l < L; ++l) {
                    double xh = (row[l] - mean) * istd;
                    if (need_xhat) xhat[static_cast<size_t>((b * C + c) * L + l)] = xh;
                    yrow[l] = gv[c] * xh + bv[c];
                }
            }
            st.running_mean[static_cast<size_t>(c)] =
                (1.0 - st.momentum) * st.running_mean[static_cast<size_t>(c)] + st.momentum * mean;
            double unbiased = var * static_cast<double>(N) / static_cast<double>(N - 1);
            st.running_var[static_cast<size_t>(c)] =
                (1.0 - st.momentum) * st.running_var[static_cast<size_t>(c)] + st.momentum * unbiased;
        }
    } else {
        for (int64_t c = 0; c < C; ++c) {
            double istd = 1.0 / std::sqrt(st.running_var[static_cast<size_t>(c)] + st.eps);
            inv_std[static_cast<size_t>(c)] = istd;
            double mean = st.running_mean[static_cast<size_t>(c)];
            for (int64_t b = 0; b < B; ++b) {
                const double* row = xv + (b * C + c) * L;
                double* yrow = yv + (b * C + c) * L;
                for (int64_t l = 0; l < L; ++l) {
                    double xh = (row[l] - mean) * istd;
                    if (need_xhat) xhat[static_cast<size_t>((b * C + c) * L + l)] = xh;
                    yrow[l] = gv[c] * xh + bv[c];
                }
            }
        }
    }

    if (out.requires_grad()) {
        auto* on = out.node().get();
        auto* xn = x.node().get();
        auto* gn = st.gamma.node().get();
        auto* betan = st.beta.node().get();
        bool train_stats = st.training;
        on->backprop = [on, xn, gn, betan, B, C, L, N, train_stats, inv_std = std::move(inv_std),
                        xhat = std::move(xhat)]() {
            const double* gy = on->grad.data();
            const double* gamma = gn->value.data();
            bool need_x = xn->requires_grad || !xn->parents.empty();
            if (need_x) autodiff::ensure_grad(xn);
            if (gn->requires_grad) autodiff::ensure_grad(gn);
            if (betan->requires_grad) autodiff::ensure_grad(betan);
            for (int64_t c = 0; c < C; ++c) {
                double sum_dy = 0.0, sum_dy_xh = 0.0;
                for (int64_t b = 0; b < B; ++b) {
                    const double* gyrow = gy + (b * C + c) * L;
                    const double* xhrow = xhat.data() + (b * C + c) * L;
                    for (int64_t l = 0; l < L; ++l) {
                        sum_dy += gyrow[l];
                        sum_dy_xh += gyrow[l] * xhrow[l];
                    }
                }
                if (gn->requires_grad) gn->grad[static_cast<size_t>(c)] += sum_dy_xh;
                if (betan->requires_grad) betan->grad[static_cast<size_t>(c)] += sum_dy;
                if (need_x) {
                    double scale = gamma[c] * inv_std[static_cast<size_t>(c)];
                    if (train_stats) {
                        double mean_dy = sum_dy / static_cast<double>(N);
                        double mean_dy_xh = sum_dy_xh / static_cast<double>(N);
                        for (int64_t b = 0; b < B; ++b) {
                            double* gxrow = xn->grad.data() + (b * C + c) * L;
                            const double* gyrow = gy + (b * C + c) * L;
                            const double* xhrow = xhat.data() + (b * C + c) * L;
                            for (int64_t l = 0; l < L; ++l)
                                gxrow[l] += scale * (gyrow[l] - mean_dy - xhrow[l] * mean_dy_xh);
                        }
                    } else {
                        for (int64_t b = 0; b < B; ++b) {
                            double* gxrow = xn->grad.data() + (b * C + c) * L;
                            const double* gyrow = gy + (b * C + c) * L;
                            for (int64_t l = 0; l < L; ++l) gxrow[l] += scale * gyrow[l];
                        }
                    }
                }
            }
        };
    }
    return out;
}

// Mean-reduced SmoothL1 on y_diff = target - pred:
//   0.5 * d^2        if |d| < 1
//   |d| - 0.5        otherwise
inline Tensor smooth_l1(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw ShapeError("smooth_l1: shape mismatch " + pred.shape().str() + " vs " + target.shape().str());
    const auto& pv = pred.values();
    const auto& tv = target.values();
    const int64_t N = pred.numel();
    Tensor out = make_op_node(Shape{1, 1, 1}, {pred, target});
    double acc = 0.0;
    for (int64_t i = 0; i < N; ++i) {
        double d = tv[static_cast<size_t>(i)] - pv[static_cast<size_t>(i)];
        double a = std::abs(d);
        acc += a < 1.0 ? 0.5 * d * d : a - 0.5;
    }
    out.values_mut()[0] = acc / static_cast<double>(N);
    if (out.requires_grad()) {
        auto* on = out.node().get();
        auto* pn = pred.node().get();
        auto* tn = target.node().get();
        on->backprop = [on, pn, tn, N]() {
            const double g = on->grad[0] / static_cast<double>(N);
            bool need_p = pn->requires_grad || !pn->parents.empty();
            bool need_t = tn->requires_grad || !tn->parents.empty();
            if (need_p) autodiff::ensure_grad(pn);
            if (need_t) autodiff::ensure_grad(tn);
            for (int64_t i = 0; i < N; ++i) {
                double d = tn->value[static_cast<size_t>(i)] - pn->value[static_cast<size_t>(i)];
                double phi = std::abs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0);
                if (need_p) pn->grad[static_cast<size_t>(i)] -= g * phi;
                if (need_t) tn->grad[static_cast<size_t>(i)] += g * phi;
            }
        };
    }
    return out;
}

}  // namespace rpk

#endif  // RPK_TENSOR_HPP
